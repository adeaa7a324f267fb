#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvcan/matrix.hpp"

namespace mvcan {

/// Bias-corrected Adam over an ordered list of parameter tensors. The
/// moment accumulators mirror the tensor sizes registered at
/// construction; updates must pass tensors in the same order.
struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;

    std::vector<std::vector<double>> m;  // first moments, one slot per tensor
    std::vector<std::vector<double>> v;  // second moments

    AdamState() = default;
    AdamState(const std::vector<std::size_t>& sizes, double lr) : learning_rate(lr) {
        m.reserve(sizes.size());
        v.reserve(sizes.size());
        for (std::size_t s : sizes) {
            m.emplace_back(s, 0.0);
            v.emplace_back(s, 0.0);
        }
    }
};

/// One Adam update. `params[i]` and `grads[i]` must match the i-th
/// registered accumulator size.
inline void adam_step(const std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads,
                      AdamState& state) {
    if (params.size() != state.m.size() || grads.size() != state.m.size())
        throw ShapeError("adam_step: got " + std::to_string(params.size()) +
                         " tensors, state has " + std::to_string(state.m.size()));
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        std::span<double> p = params[t];
        std::span<const double> g = grads[t];
        std::vector<double>& m = state.m[t];
        std::vector<double>& v = state.v[t];
        if (p.size() != m.size() || g.size() != m.size())
            throw ShapeError("adam_step: tensor " + std::to_string(t) + " has size " +
                             std::to_string(p.size()) + ", state expects " +
                             std::to_string(m.size()));
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace mvcan
