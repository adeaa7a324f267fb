#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvcan/matrix.hpp"
#include "mvcan/random.hpp"

namespace mvcan {

enum class Activation { linear, relu };

/// One fully connected layer: h = act(x Wᵀ + b).
struct DenseLayer {
    Matrix weight;             // out×in
    std::vector<double> bias;  // out
    Activation activation = Activation::linear;

    std::size_t in_width() const { return weight.cols; }
    std::size_t out_width() const { return weight.rows; }
};

struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t input_width() const { return layers.front().in_width(); }
    std::size_t output_width() const { return layers.back().out_width(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Layer k's input width must equal layer k-1's output width.
    void check_chained() const {
        for (std::size_t k = 1; k < layers.size(); ++k)
            if (layers[k].in_width() != layers[k - 1].out_width())
                throw ShapeError("mlp: layer " + std::to_string(k) + " expects input " +
                                 std::to_string(layers[k].in_width()) + " but layer " +
                                 std::to_string(k - 1) + " outputs " +
                                 std::to_string(layers[k - 1].out_width()));
    }
};

/// Uniform(-a, a) with a = sqrt(6/(fan_in+fan_out)); biases zero.
inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer layer;
    layer.weight.resize(out, in);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weight.data) w = uniform_range(rng, -a, a);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    return layer;
}

inline Mlp make_mlp(const std::vector<std::size_t>& widths,
                    const std::vector<Activation>& acts, Rng& rng) {
    if (widths.size() < 2 || acts.size() != widths.size() - 1)
        throw ShapeError("make_mlp: need n+1 widths for n activations");
    Mlp mlp;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k)
        mlp.layers.push_back(make_dense(widths[k], widths[k + 1], acts[k], rng));
    return mlp;
}

/// Canonical encoder: input-500-500-2000-embed, ReLU on hidden layers,
/// linear embedding so the representation is unconstrained in sign.
inline Mlp make_encoder(std::size_t input_dim, std::size_t embed_dim, Rng& rng) {
    return make_mlp({input_dim, 500, 500, 2000, embed_dim},
                    {Activation::relu, Activation::relu, Activation::relu,
                     Activation::linear},
                    rng);
}

/// Mirror decoder: embed-2000-500-500-output, linear output layer.
inline Mlp make_decoder(std::size_t embed_dim, std::size_t output_dim, Rng& rng) {
    return make_mlp({embed_dim, 2000, 500, 500, output_dim},
                    {Activation::relu, Activation::relu, Activation::relu,
                     Activation::linear},
                    rng);
}

/// Per-layer activations recorded by a cached forward pass; required by
/// backward(). inputs[k] is the batch fed to layer k, pre[k] its
/// pre-activation output.
struct ForwardCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
    bool valid = false;
};

namespace detail {

inline void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::relu)
        for (double& v : m.data)
            if (v < 0.0) v = 0.0;
}

inline void layer_forward(const DenseLayer& layer, const Matrix& x, std::size_t index,
                          Matrix& out) {
    if (x.cols != layer.in_width())
        throw ShapeError("layer " + std::to_string(index) + ": input width " +
                         std::to_string(x.cols) + ", expected " +
                         std::to_string(layer.in_width()));
    matmul_nt_into(x, layer.weight, out);  // (B×in)·(out×in)ᵀ
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* r = out.row_ptr(i);
        for (std::size_t j = 0; j < out.cols; ++j) r[j] += layer.bias[j];
    }
}

}  // namespace detail

inline Matrix forward(const Mlp& mlp, const Matrix& x) {
    Matrix cur = x;
    Matrix next;
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        detail::layer_forward(mlp.layers[k], cur, k, next);
        detail::apply_activation(next, mlp.layers[k].activation);
        std::swap(cur, next);
    }
    return cur;
}

/// Forward pass that records the per-layer state backward() needs.
inline Matrix forward(const Mlp& mlp, const Matrix& x, ForwardCache& cache) {
    cache.inputs.assign(mlp.layers.size(), Matrix{});
    cache.pre.assign(mlp.layers.size(), Matrix{});
    Matrix cur = x;
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        cache.inputs[k] = cur;
        detail::layer_forward(mlp.layers[k], cur, k, cache.pre[k]);
        cur = cache.pre[k];
        detail::apply_activation(cur, mlp.layers[k].activation);
    }
    cache.valid = true;
    return cur;
}

/// Z^v = E(X^v): representations from the per-view encoder.
inline Matrix encode(const Matrix& x_batch, const Mlp& phi) {
    Matrix z = forward(phi, x_batch);
    require_finite(z, "encode");
    return z;
}

/// X̂^v = D(Z^v): reconstruction from the per-view decoder.
inline Matrix decode(const Matrix& z_batch, const Mlp& psi) {
    Matrix x = forward(psi, z_batch);
    require_finite(x, "decode");
    return x;
}

/// Gradient buffers shaped like an Mlp's parameters.
struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;

    static MlpGrads zeros_like(const Mlp& mlp) {
        MlpGrads g;
        g.weight.reserve(mlp.layers.size());
        g.bias.reserve(mlp.layers.size());
        for (const auto& l : mlp.layers) {
            g.weight.emplace_back(l.weight.rows, l.weight.cols);
            g.bias.emplace_back(l.bias.size(), 0.0);
        }
        return g;
    }
};

/// Backpropagates `upstream` (dL/d output, B×out) through the network.
/// Fills `grads` and returns dL/d input. Requires the cache produced by
/// the cached forward() on the same batch.
inline Matrix backward(const Mlp& mlp, const ForwardCache& cache, const Matrix& upstream,
                       MlpGrads& grads) {
    if (!cache.valid || cache.inputs.size() != mlp.layers.size())
        throw StateError("backward: no cached forward pass for this network");
    if (upstream.cols != mlp.output_width() || upstream.rows != cache.inputs[0].rows)
        throw ShapeError("backward: upstream gradient is " + std::to_string(upstream.rows) +
                         "x" + std::to_string(upstream.cols) + ", expected " +
                         std::to_string(cache.inputs[0].rows) + "x" +
                         std::to_string(mlp.output_width()));
    if (grads.weight.size() != mlp.layers.size()) grads = MlpGrads::zeros_like(mlp);

    Matrix delta = upstream;  // dL/d post-activation of current layer
    Matrix next_delta;
    for (std::size_t k = mlp.layers.size(); k-- > 0;) {
        const DenseLayer& layer = mlp.layers[k];
        // dL/d pre-activation
        if (layer.activation == Activation::relu) {
            const Matrix& pre = cache.pre[k];
            for (std::size_t i = 0; i < delta.data.size(); ++i)
                if (pre.data[i] <= 0.0) delta.data[i] = 0.0;
        }
        matmul_tn_into(delta, cache.inputs[k], grads.weight[k]);  // (out×B)·(B×in)
        std::vector<double>& db = grads.bias[k];
        db.assign(layer.bias.size(), 0.0);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* r = delta.row_ptr(i);
            for (std::size_t j = 0; j < delta.cols; ++j) db[j] += r[j];
        }
        if (k > 0) {
            matmul_into(delta, layer.weight, next_delta);  // (B×out)·(out×in)
            std::swap(delta, next_delta);
        } else {
            matmul_into(delta, layer.weight, next_delta);
        }
    }
    return next_delta;
}

/// Squared Frobenius norm of the reconstruction residual.
inline double reconstruction_loss(const Matrix& x, const Matrix& x_hat) {
    require_same_shape(x, x_hat, "reconstruction_loss");
    return squared_frobenius_diff(x, x_hat);
}

/// dL/dX̂ for the reconstruction loss.
inline Matrix reconstruction_grad(const Matrix& x, const Matrix& x_hat) {
    require_same_shape(x, x_hat, "reconstruction_grad");
    Matrix g(x.rows, x.cols);
    for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] = 2.0 * (x_hat.data[i] - x.data[i]);
    return g;
}

}  // namespace mvcan
