#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mvcan/adam.hpp"
#include "mvcan/dataset.hpp"
#include "mvcan/hungarian.hpp"
#include "mvcan/kmeans.hpp"
#include "mvcan/metrics.hpp"
#include "mvcan/mlp.hpp"
#include "mvcan/soft_labels.hpp"

namespace mvcan {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
    std::size_t clusters = 2;            // K
    double lambda = 100.0;               // trade-off between the two loss terms
    std::size_t target_refresh_iters = 2;  // iterations of the non-parametric phase
    std::size_t epochs_per_cycle = 100;    // gradient epochs per refreshed target
    std::size_t total_epochs = 200;
    std::size_t pretrain_epochs = 50;
    std::size_t batch_size = 256;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    std::size_t embed_dim = 10;          // per-view representation width
    std::size_t threads = 1;
    std::size_t kmeans_restarts = 10;    // best-of-N inits for fused/init k-means

    void validate() const {
        if (clusters < 2) throw ConfigError("config: clusters must be >= 2");
        if (lambda <= 0.0) throw ConfigError("config: lambda must be positive");
        if (target_refresh_iters < 1)
            throw ConfigError("config: target_refresh_iters must be >= 1");
        if (epochs_per_cycle < 1) throw ConfigError("config: epochs_per_cycle must be >= 1");
        if (total_epochs < 1) throw ConfigError("config: total_epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("config: learning_rate must be positive");
        if (embed_dim < 1) throw ConfigError("config: embed_dim must be >= 1");
        if (threads < 1) throw ConfigError("config: threads must be >= 1");
        if (kmeans_restarts < 1)
            throw ConfigError("config: kmeans_restarts must be >= 1");
    }
};

enum class AblationMode { full, no_matching, shared_params, rec_only, clu_only, kmeans_concat };

inline std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::full: return "full";
        case AblationMode::no_matching: return "no-matching";
        case AblationMode::shared_params: return "shared-params";
        case AblationMode::rec_only: return "rec-only";
        case AblationMode::clu_only: return "clu-only";
        case AblationMode::kmeans_concat: return "kmeans-concat";
    }
    return "full";
}

inline AblationMode parse_ablation_mode(const std::string& s) {
    if (s == "full") return AblationMode::full;
    if (s == "no-matching") return AblationMode::no_matching;
    if (s == "shared-params") return AblationMode::shared_params;
    if (s == "rec-only") return AblationMode::rec_only;
    if (s == "clu-only") return AblationMode::clu_only;
    if (s == "kmeans-concat") return AblationMode::kmeans_concat;
    throw ConfigError("unknown ablation mode: " + s);
}

/// One view's decoupled model: autoencoder, trainable centroids, and the
/// view's own optimizer. No storage is shared with any other view.
struct ViewState {
    Mlp encoder;
    Mlp decoder;
    Matrix centroids;     // K×embed_dim
    AdamState optimizer;  // covers encoder, decoder, centroids (in that order)
};

namespace detail {

inline std::vector<std::size_t> parameter_sizes(const ViewState& view) {
    std::vector<std::size_t> sizes;
    for (const auto& l : view.encoder.layers) {
        sizes.push_back(l.weight.size());
        sizes.push_back(l.bias.size());
    }
    for (const auto& l : view.decoder.layers) {
        sizes.push_back(l.weight.size());
        sizes.push_back(l.bias.size());
    }
    sizes.push_back(view.centroids.size());
    return sizes;
}

inline std::vector<std::span<double>> parameter_spans(ViewState& view) {
    std::vector<std::span<double>> spans;
    for (auto& l : view.encoder.layers) {
        spans.emplace_back(l.weight.data);
        spans.emplace_back(l.bias);
    }
    for (auto& l : view.decoder.layers) {
        spans.emplace_back(l.weight.data);
        spans.emplace_back(l.bias);
    }
    spans.emplace_back(view.centroids.data);
    return spans;
}

inline std::vector<std::span<const double>> gradient_spans(const MlpGrads& enc,
                                                           const MlpGrads& dec,
                                                           const Matrix& centroid_grad) {
    std::vector<std::span<const double>> spans;
    for (std::size_t k = 0; k < enc.weight.size(); ++k) {
        spans.emplace_back(enc.weight[k].data);
        spans.emplace_back(enc.bias[k]);
    }
    for (std::size_t k = 0; k < dec.weight.size(); ++k) {
        spans.emplace_back(dec.weight[k].data);
        spans.emplace_back(dec.bias[k]);
    }
    spans.emplace_back(centroid_grad.data);
    return spans;
}

}  // namespace detail

/// Sizes (or re-sizes) the view's optimizer for its current tensors.
inline void attach_optimizer(ViewState& view, double learning_rate) {
    view.optimizer = AdamState(detail::parameter_sizes(view), learning_rate);
}

inline ViewState make_view_state(std::size_t input_dim, const TrainConfig& cfg,
                                 std::uint64_t init_seed) {
    Rng rng(init_seed);
    ViewState view;
    view.encoder = make_encoder(input_dim, cfg.embed_dim, rng);
    view.decoder = make_decoder(cfg.embed_dim, input_dim, rng);
    view.centroids.resize(cfg.clusters, cfg.embed_dim);
    attach_optimizer(view, cfg.learning_rate);
    return view;
}

/// FNV-1a over the raw bytes of every trainable tensor; used to show the
/// non-parametric phase leaves parameters untouched.
inline std::uint64_t parameter_checksum(const std::vector<ViewState>& views) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&h](const double* p, std::size_t n) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const ViewState& v : views) {
        for (const auto& l : v.encoder.layers) {
            eat(l.weight.data.data(), l.weight.size());
            eat(l.bias.data(), l.bias.size());
        }
        for (const auto& l : v.decoder.layers) {
            eat(l.weight.data.data(), l.weight.size());
            eat(l.bias.data(), l.bias.size());
        }
        eat(v.centroids.data.data(), v.centroids.size());
    }
    return h;
}

/// State of the non-parametric iteration: the per-view scaling factors,
/// the scaled (block-concatenated) representation they produce, and the
/// fused soft labels. `weights` are the factors behind the stored
/// representation; `next_weights` is the latest factor update, consumed
/// by the next iteration.
struct ScalingState {
    std::size_t iteration = 0;  // total refresh iterations run so far
    std::vector<double> weights;
    std::vector<double> next_weights;
    Matrix scaled;           // N × sum of view widths
    Matrix fused_centroids;  // K × sum of view widths
    Matrix robust_labels;    // N×K

    bool initialized() const { return iteration > 0; }
};

struct EpochRecord {
    std::string phase;  // "pretrain" or "train"
    std::size_t epoch = 0;
    std::size_t view = 0;
    double loss_rec = 0.0;
    double loss_clu = 0.0;
    double loss_total = 0.0;
};

struct RefreshRecord {
    std::size_t cycle = 0;
    std::size_t epoch = 0;
    std::size_t iteration = 0;  // global refresh-iteration index (1-based)
    std::vector<double> weights;       // factors used for this iteration
    std::vector<double> next_weights;  // factor update produced by it
};

struct MatchRecord {
    std::size_t cycle = 0;
    std::size_t epoch = 0;
    double matched_cost = 0.0;    // Σ_v ||T A^v - Y^v||²
    double unmatched_cost = 0.0;  // Σ_v ||T - Y^v||²
    bool params_unchanged = true;
};

struct TrainReport {
    std::string mode = "full";
    std::vector<EpochRecord> epochs;
    std::vector<RefreshRecord> refreshes;
    std::vector<MatchRecord> match_records;
    std::vector<double> final_weights;
    std::vector<int> final_labels;
    std::optional<ClusteringMetrics> metrics;
    std::size_t epochs_run = 0;
    double wall_seconds = 0.0;
};

namespace detail {

/// Mini-batch index schedule: epoch-wise shuffles, last partial batch kept.
inline std::vector<std::vector<std::vector<std::size_t>>> batch_schedule(
    std::size_t n, std::size_t batch_size, std::size_t epochs, Rng& rng) {
    const std::size_t bs = std::min(batch_size, n);
    std::vector<std::vector<std::vector<std::size_t>>> schedule(epochs);
    for (std::size_t e = 0; e < epochs; ++e) {
        std::vector<std::size_t> order = shuffled_indices(n, rng);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t stop = std::min(start + bs, n);
            schedule[e].emplace_back(order.begin() + start, order.begin() + stop);
        }
    }
    return schedule;
}

template <typename Fn>
void for_each_view(std::size_t view_count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || view_count <= 1) {
        for (std::size_t v = 0; v < view_count; ++v) fn(v);
        return;
    }
    std::vector<std::exception_ptr> errors(view_count);
    std::vector<std::thread> pool;
    pool.reserve(view_count);
    for (std::size_t v = 0; v < view_count; ++v)
        pool.emplace_back([&, v] {
            try {
                fn(v);
            } catch (...) {
                errors[v] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Trains each view's autoencoder on its own reconstruction objective
/// with its own optimizer. Views never exchange gradients.
inline void pretrain(std::vector<ViewState>& views, const MultiViewDataset& data,
                     const TrainConfig& cfg, Rng& batch_rng, TrainReport* report = nullptr) {
    data.check_consistent();
    if (views.size() != data.view_count())
        throw ShapeError("pretrain: " + std::to_string(views.size()) + " view states for " +
                         std::to_string(data.view_count()) + " views");
    if (cfg.pretrain_epochs == 0) return;
    const auto schedule =
        detail::batch_schedule(data.sample_count(), cfg.batch_size, cfg.pretrain_epochs, batch_rng);

    std::vector<EpochRecord> records(cfg.pretrain_epochs * views.size());
    detail::for_each_view(views.size(), cfg.threads, [&](std::size_t v) {
        ViewState& view = views[v];
        const Matrix& x = data.views[v];
        // Pretraining gets its own optimizer so the main phase starts
        // with clean moments.
        std::vector<std::size_t> sizes;
        for (const auto& l : view.encoder.layers) {
            sizes.push_back(l.weight.size());
            sizes.push_back(l.bias.size());
        }
        for (const auto& l : view.decoder.layers) {
            sizes.push_back(l.weight.size());
            sizes.push_back(l.bias.size());
        }
        AdamState opt(sizes, cfg.learning_rate);
        MlpGrads genc = MlpGrads::zeros_like(view.encoder);
        MlpGrads gdec = MlpGrads::zeros_like(view.decoder);
        ForwardCache cache_enc, cache_dec;
        for (std::size_t e = 0; e < cfg.pretrain_epochs; ++e) {
            double loss = 0.0;
            for (const auto& idx : schedule[e]) {
                const Matrix xb = gather_rows(x, idx);
                const Matrix z = forward(view.encoder, xb, cache_enc);
                const Matrix xr = forward(view.decoder, z, cache_dec);
                loss += reconstruction_loss(xb, xr);
                const Matrix dxr = reconstruction_grad(xb, xr);
                const Matrix dz = backward(view.decoder, cache_dec, dxr, gdec);
                backward(view.encoder, cache_enc, dz, genc);
                std::vector<std::span<double>> params;
                std::vector<std::span<const double>> grads;
                for (std::size_t k = 0; k < view.encoder.layers.size(); ++k) {
                    params.emplace_back(view.encoder.layers[k].weight.data);
                    params.emplace_back(view.encoder.layers[k].bias);
                    grads.emplace_back(genc.weight[k].data);
                    grads.emplace_back(genc.bias[k]);
                }
                for (std::size_t k = 0; k < view.decoder.layers.size(); ++k) {
                    params.emplace_back(view.decoder.layers[k].weight.data);
                    params.emplace_back(view.decoder.layers[k].bias);
                    grads.emplace_back(gdec.weight[k].data);
                    grads.emplace_back(gdec.bias[k]);
                }
                adam_step(params, grads, opt);
            }
            records[e * views.size() + v] = {"pretrain", e, v, loss, 0.0, loss};
        }
    });
    if (report)
        report->epochs.insert(report->epochs.end(), records.begin(), records.end());
}

/// Per-view centroids from k-means on each view's own representation.
/// Every view uses the same seed, so identical views get identical
/// centroid sets.
inline void init_centroids(std::vector<ViewState>& views, const MultiViewDataset& data,
                           const TrainConfig& cfg) {
    if (data.sample_count() < cfg.clusters)
        throw std::invalid_argument("init_centroids: fewer samples than clusters");
    const std::uint64_t seed = derive_seed(cfg.seed, 0x11a2);
    detail::for_each_view(views.size(), cfg.threads, [&](std::size_t v) {
        const Matrix z = encode(data.views[v], views[v].encoder);
        views[v].centroids =
            kmeans_restarted(z, cfg.clusters, seed, cfg.kmeans_restarts).centroids;
    });
}

/// Shared-centroid ablation state: one centroid set tied across views,
/// with its own optimizer.
struct SharedCentroids {
    Matrix values;
    AdamState optimizer;
};

namespace detail {

inline const Matrix& centroids_for_view(const std::vector<ViewState>& views, std::size_t v,
                                        const SharedCentroids* shared) {
    return shared ? shared->values : views[v].centroids;
}

}  // namespace detail

/// Runs `iters` iterations of the non-parametric process and returns the
/// sharpened learning target built from the final fused soft labels.
/// Reads the views but never modifies any parameter. The scaling factors
/// carry across calls through `scaling`; the very first iteration uses
/// unit factors.
inline Matrix build_learning_target(const std::vector<ViewState>& views,
                                    ScalingState& scaling, const MultiViewDataset& data,
                                    const TrainConfig& cfg, std::uint64_t kmeans_seed,
                                    std::size_t iters, TrainReport* report = nullptr,
                                    std::size_t cycle = 0, std::size_t epoch = 0,
                                    const SharedCentroids* shared = nullptr) {
    if (iters < 1)
        throw ConfigError("build_learning_target: need at least one iteration");
    if (data.sample_count() < cfg.clusters)
        throw std::invalid_argument("build_learning_target: fewer samples than clusters");
    const std::size_t nviews = views.size();
    const std::size_t n = data.sample_count();

    // Representations and per-view hard labels are fixed for the whole
    // call: parameters do not change here.
    std::vector<Matrix> z(nviews);
    std::vector<std::vector<int>> hard(nviews);
    std::size_t total_width = 0;
    detail::for_each_view(nviews, cfg.threads, [&](std::size_t v) {
        z[v] = encode(data.views[v], views[v].encoder);
        hard[v] = argmax_labels(soft_assign(z[v], detail::centroids_for_view(views, v, shared)));
    });
    for (const Matrix& zv : z) total_width += zv.cols;

    if (!scaling.initialized()) scaling.next_weights.assign(nviews, 1.0);

    for (std::size_t it = 0; it < iters; ++it) {
        scaling.weights = scaling.next_weights;
        scaling.scaled.resize(n, total_width);
        std::size_t offset = 0;
        for (std::size_t v = 0; v < nviews; ++v) {
            const double w = scaling.weights[v];
            for (std::size_t i = 0; i < n; ++i) {
                const double* src = z[v].row_ptr(i);
                double* dst = scaling.scaled.row_ptr(i) + offset;
                for (std::size_t j = 0; j < z[v].cols; ++j) dst[j] = w * src[j];
            }
            offset += z[v].cols;
        }
        const KmeansResult km =
            kmeans_restarted(scaling.scaled, cfg.clusters, kmeans_seed, cfg.kmeans_restarts);
        scaling.fused_centroids = km.centroids;
        scaling.robust_labels = soft_assign(scaling.scaled, scaling.fused_centroids);
        const std::vector<int> fused_hard = argmax_labels(scaling.robust_labels);
        for (std::size_t v = 0; v < nviews; ++v)
            scaling.next_weights[v] = std::exp(nmi(hard[v], fused_hard));
        scaling.iteration += 1;
        if (report)
            report->refreshes.push_back(
                {cycle, epoch, scaling.iteration, scaling.weights, scaling.next_weights});
    }
    return sharpen_target(scaling.robust_labels);
}

struct MatchingResult {
    std::vector<Permutation> perms;
    double matched_cost = 0.0;    // Σ_v ||T A^v - Y^v||²
    double unmatched_cost = 0.0;  // Σ_v ||T - Y^v||²
};

/// Per-view permutations aligning the target's columns with each view's
/// soft labels. The matched objective can never exceed the unmatched one
/// because the identity permutation is always feasible.
inline MatchingResult compute_view_matchings(const Matrix& target,
                                             const std::vector<ViewState>& views,
                                             const MultiViewDataset& data,
                                             const SharedCentroids* shared = nullptr,
                                             std::size_t threads = 1) {
    MatchingResult res;
    res.perms.resize(views.size());
    std::vector<double> matched(views.size(), 0.0), unmatched(views.size(), 0.0);
    detail::for_each_view(views.size(), threads, [&](std::size_t v) {
        const Matrix z = encode(data.views[v], views[v].encoder);
        const Matrix y = soft_assign(z, detail::centroids_for_view(views, v, shared));
        res.perms[v] = match_labels(target, y);
        matched[v] = squared_frobenius_diff(apply_column_permutation(target, res.perms[v]), y);
        unmatched[v] = squared_frobenius_diff(target, y);
    });
    for (std::size_t v = 0; v < views.size(); ++v) {
        res.matched_cost += matched[v];
        res.unmatched_cost += unmatched[v];
    }
    return res;
}

struct ClusteringLossGrads {
    double loss = 0.0;
    MlpGrads encoder;
    Matrix centroids;
};

/// One view's clustering term ||T A^v - Y^v||² on a sample batch, with
/// gradients w.r.t. the view's encoder and centroids only.
inline ClusteringLossGrads clustering_loss(const ViewState& view, const Matrix& x_batch,
                                           const Matrix& aligned_target_batch) {
    if (aligned_target_batch.cols != view.centroids.rows)
        throw ShapeError("clustering_loss: target has " +
                         std::to_string(aligned_target_batch.cols) + " columns for " +
                         std::to_string(view.centroids.rows) + " clusters");
    ClusteringLossGrads out;
    ForwardCache cache;
    const Matrix z = forward(view.encoder, x_batch, cache);
    const Matrix y = soft_assign(z, view.centroids);
    out.loss = squared_frobenius_diff(y, aligned_target_batch);
    Matrix dz(z.rows, z.cols);
    out.centroids.resize(view.centroids.rows, view.centroids.cols);
    soft_assign_backward(z, view.centroids, y, aligned_target_batch, 1.0, dz, out.centroids);
    out.encoder = MlpGrads::zeros_like(view.encoder);
    backward(view.encoder, cache, dz, out.encoder);
    return out;
}

/// Gradient phase: `epochs` epochs of mini-batch Adam on the combined
/// objective, the target and matchings held fixed throughout. Each view
/// is updated only by its own optimizer on its own gradients.
inline void train_with_target(std::vector<ViewState>& views, const MultiViewDataset& data,
                              const Matrix& target, const std::vector<Permutation>& matchings,
                              const TrainConfig& cfg, std::size_t epochs, Rng& batch_rng,
                              TrainReport* report = nullptr, std::size_t epoch_offset = 0,
                              bool use_reconstruction = true,
                              SharedCentroids* shared = nullptr) {
    if (matchings.size() != views.size())
        throw ShapeError("train_with_target: " + std::to_string(matchings.size()) +
                         " matchings for " + std::to_string(views.size()) + " views");
    const std::size_t n = data.sample_count();
    const auto schedule = detail::batch_schedule(n, cfg.batch_size, epochs, batch_rng);

    // Aligned targets T·A^v, fixed for the whole phase.
    std::vector<Matrix> aligned(views.size());
    for (std::size_t v = 0; v < views.size(); ++v)
        aligned[v] = apply_column_permutation(target, matchings[v]);

    std::vector<EpochRecord> records(epochs * views.size());

    if (!shared) {
        detail::for_each_view(views.size(), cfg.threads, [&](std::size_t v) {
            ViewState& view = views[v];
            const Matrix& x = data.views[v];
            MlpGrads genc = MlpGrads::zeros_like(view.encoder);
            MlpGrads gdec = MlpGrads::zeros_like(view.decoder);
            Matrix dmu(view.centroids.rows, view.centroids.cols);
            ForwardCache cache_enc, cache_dec;
            for (std::size_t e = 0; e < epochs; ++e) {
                double lrec = 0.0, lclu = 0.0;
                for (const auto& idx : schedule[e]) {
                    const Matrix xb = gather_rows(x, idx);
                    const Matrix z = forward(view.encoder, xb, cache_enc);
                    Matrix dz(z.rows, z.cols);
                    if (use_reconstruction) {
                        const Matrix xr = forward(view.decoder, z, cache_dec);
                        lrec += reconstruction_loss(xb, xr);
                        const Matrix dxr = reconstruction_grad(xb, xr);
                        dz = backward(view.decoder, cache_dec, dxr, gdec);
                    } else {
                        for (auto& g : gdec.weight) g.data.assign(g.data.size(), 0.0);
                        for (auto& g : gdec.bias) g.assign(g.size(), 0.0);
                    }
                    const Matrix y = soft_assign(z, view.centroids);
                    const Matrix pb = gather_rows(aligned[v], idx);
                    lclu += squared_frobenius_diff(y, pb);
                    dmu.resize(view.centroids.rows, view.centroids.cols);
                    soft_assign_backward(z, view.centroids, y, pb, cfg.lambda, dz, dmu);
                    backward(view.encoder, cache_enc, dz, genc);
                    adam_step(detail::parameter_spans(view),
                              detail::gradient_spans(genc, gdec, dmu), view.optimizer);
                }
                if (!std::isfinite(lrec) || !std::isfinite(lclu))
                    throw std::runtime_error("train_with_target: loss diverged in view " +
                                             std::to_string(v));
                records[e * views.size() + v] = {"train", epoch_offset + e, v,
                                                 lrec, lclu, lrec + cfg.lambda * lclu};
            }
        });
    } else {
        // Shared-centroid ablation: views contribute gradients to one tied
        // centroid set, so batches run view-synchronized.
        std::vector<MlpGrads> genc, gdec;
        for (auto& view : views) {
            genc.push_back(MlpGrads::zeros_like(view.encoder));
            gdec.push_back(MlpGrads::zeros_like(view.decoder));
        }
        Matrix dmu_shared(shared->values.rows, shared->values.cols);
        Matrix dmu_own;
        ForwardCache cache_enc, cache_dec;
        std::vector<double> lrec(views.size()), lclu(views.size());
        for (std::size_t e = 0; e < epochs; ++e) {
            lrec.assign(views.size(), 0.0);
            lclu.assign(views.size(), 0.0);
            for (const auto& idx : schedule[e]) {
                dmu_shared.resize(shared->values.rows, shared->values.cols);
                for (std::size_t v = 0; v < views.size(); ++v) {
                    ViewState& view = views[v];
                    const Matrix xb = gather_rows(data.views[v], idx);
                    const Matrix z = forward(view.encoder, xb, cache_enc);
                    Matrix dz(z.rows, z.cols);
                    if (use_reconstruction) {
                        const Matrix xr = forward(view.decoder, z, cache_dec);
                        lrec[v] += reconstruction_loss(xb, xr);
                        const Matrix dxr = reconstruction_grad(xb, xr);
                        dz = backward(view.decoder, cache_dec, dxr, gdec[v]);
                    } else {
                        for (auto& g : gdec[v].weight) g.data.assign(g.data.size(), 0.0);
                        for (auto& g : gdec[v].bias) g.assign(g.size(), 0.0);
                    }
                    const Matrix y = soft_assign(z, shared->values);
                    const Matrix pb = gather_rows(aligned[v], idx);
                    lclu[v] += squared_frobenius_diff(y, pb);
                    soft_assign_backward(z, shared->values, y, pb, cfg.lambda, dz, dmu_shared);
                    backward(view.encoder, cache_enc, dz, genc[v]);
                    dmu_own.resize(view.centroids.rows, view.centroids.cols);
                    adam_step(detail::parameter_spans(view),
                              detail::gradient_spans(genc[v], gdec[v], dmu_own),
                              view.optimizer);
                }
                adam_step({std::span<double>(shared->values.data)},
                          {std::span<const double>(dmu_shared.data)}, shared->optimizer);
            }
            for (std::size_t v = 0; v < views.size(); ++v)
                records[e * views.size() + v] = {"train", epoch_offset + e, v, lrec[v],
                                                 lclu[v], lrec[v] + cfg.lambda * lclu[v]};
        }
    }
    if (report)
        report->epochs.insert(report->epochs.end(), records.begin(), records.end());
}

struct MvcanModel {
    TrainConfig config;
    std::vector<ViewState> views;
    ScalingState scaling;

    bool fitted() const { return scaling.initialized(); }
};

struct FitResult {
    MvcanModel model;
    TrainReport report;
};

struct PredictResult {
    std::vector<int> labels;
    Matrix soft_labels;
    Matrix scaled;  // fused representation the labels were read from
};

/// Deterministic inference: recompute representations with the stored
/// scaling factors and fused centroids. No fresh k-means runs here, and
/// rows are independent. Expects features on the same scale as training
/// (the CLI normalizes datasets once at load time).
inline PredictResult predict(const MvcanModel& model, const MultiViewDataset& data) {
    if (!model.fitted()) throw StateError("predict: model has not been fitted");
    data.check_consistent();
    if (data.view_count() != model.views.size())
        throw ShapeError("predict: dataset has " + std::to_string(data.view_count()) +
                         " views, model expects " + std::to_string(model.views.size()));
    for (std::size_t v = 0; v < model.views.size(); ++v)
        if (data.views[v].cols != model.views[v].encoder.input_width())
            throw ShapeError("predict: view " + std::to_string(v) + " width " +
                             std::to_string(data.views[v].cols) + ", model expects " +
                             std::to_string(model.views[v].encoder.input_width()));

    const std::size_t n = data.sample_count();
    Matrix scaled(n, model.scaling.fused_centroids.cols);
    std::size_t offset = 0;
    for (std::size_t v = 0; v < model.views.size(); ++v) {
        const Matrix z = encode(data.views[v], model.views[v].encoder);
        const double w = model.scaling.weights[v];
        for (std::size_t i = 0; i < n; ++i) {
            const double* src = z.row_ptr(i);
            double* dst = scaled.row_ptr(i) + offset;
            for (std::size_t j = 0; j < z.cols; ++j) dst[j] = w * src[j];
        }
        offset += z.cols;
    }
    PredictResult out;
    out.soft_labels = soft_assign(scaled, model.scaling.fused_centroids);
    out.labels = argmax_labels(out.soft_labels);
    out.scaled = std::move(scaled);
    return out;
}

/// Trains the designated variant. `full` is the complete method; the
/// other modes disable one ingredient each, plus the raw-concatenation
/// k-means baseline. Features are consumed as given (the CLI applies
/// unit-range normalization once at load time).
inline FitResult ablate(const MultiViewDataset& data, const TrainConfig& cfg,
                        AblationMode mode) {
    cfg.validate();
    data.check_consistent();
    if (data.sample_count() < cfg.clusters)
        throw std::invalid_argument("fit: fewer samples than clusters");
    const auto t_start = std::chrono::steady_clock::now();

    FitResult res;
    res.model.config = cfg;
    res.report.mode = to_string(mode);

    if (mode == AblationMode::kmeans_concat) {
        std::size_t total = 0;
        for (const auto& v : data.views) total += v.cols;
        Matrix concat(data.sample_count(), total);
        std::size_t offset = 0;
        for (const auto& v : data.views) {
            for (std::size_t i = 0; i < v.rows; ++i)
                for (std::size_t j = 0; j < v.cols; ++j) concat(i, offset + j) = v(i, j);
            offset += v.cols;
        }
        const KmeansResult km = kmeans_restarted(concat, cfg.clusters,
                                                 derive_seed(cfg.seed, 0xc0c0),
                                                 cfg.kmeans_restarts);
        res.report.final_labels = km.labels;
        if (data.has_labels)
            res.report.metrics = evaluate_clustering(km.labels, data.labels);
        res.report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return res;
    }

    const bool use_rec = mode != AblationMode::clu_only;
    const double effective_lambda = mode == AblationMode::rec_only ? 0.0 : cfg.lambda;

    std::vector<ViewState>& views = res.model.views;
    for (std::size_t v = 0; v < data.view_count(); ++v)
        views.push_back(
            make_view_state(data.views[v].cols, cfg, derive_seed(cfg.seed, 0x71e3, v)));

    Rng batch_rng(derive_seed(cfg.seed, 0xba7c));
    pretrain(views, data, cfg, batch_rng, &res.report);
    init_centroids(views, data, cfg);

    SharedCentroids shared;
    SharedCentroids* shared_ptr = nullptr;
    if (mode == AblationMode::shared_params) {
        // One centroid set for all views, fit on the stacked embeddings.
        Matrix stacked(data.sample_count() * views.size(), cfg.embed_dim);
        for (std::size_t v = 0; v < views.size(); ++v) {
            const Matrix z = encode(data.views[v], views[v].encoder);
            for (std::size_t i = 0; i < z.rows; ++i)
                for (std::size_t j = 0; j < z.cols; ++j)
                    stacked(v * z.rows + i, j) = z(i, j);
        }
        shared.values = kmeans_restarted(stacked, cfg.clusters,
                                         derive_seed(cfg.seed, 0x5a6d),
                                         cfg.kmeans_restarts)
                            .centroids;
        shared.optimizer = AdamState({shared.values.size()}, cfg.learning_rate);
        shared_ptr = &shared;
    }

    TrainConfig loss_cfg = cfg;
    loss_cfg.lambda = effective_lambda;

    ScalingState& scaling = res.model.scaling;
    const std::uint64_t km_seed_base = derive_seed(cfg.seed, 0x7e4a);
    std::size_t epoch = 0, cycle = 0;
    while (epoch < cfg.total_epochs) {
        const std::uint64_t before = parameter_checksum(views);
        const Matrix target =
            build_learning_target(views, scaling, data, cfg, km_seed_base + epoch,
                                  cfg.target_refresh_iters, &res.report, cycle, epoch,
                                  shared_ptr);
        const bool unchanged = parameter_checksum(views) == before;

        MatchingResult match;
        if (mode == AblationMode::no_matching) {
            match.perms.assign(views.size(), Permutation::identity(cfg.clusters));
            const MatchingResult actual =
                compute_view_matchings(target, views, data, shared_ptr, cfg.threads);
            match.matched_cost = actual.unmatched_cost;  // identity matching applied
            match.unmatched_cost = actual.unmatched_cost;
        } else {
            match = compute_view_matchings(target, views, data, shared_ptr, cfg.threads);
        }
        res.report.match_records.push_back(
            {cycle, epoch, match.matched_cost, match.unmatched_cost, unchanged});

        std::size_t block = cfg.epochs_per_cycle;
        if (effective_lambda == 0.0 && !use_rec) block = 0;  // nothing to train
        if (block > 0)
            train_with_target(views, data, target, match.perms, loss_cfg, block, batch_rng,
                              &res.report, epoch, use_rec, shared_ptr);
        epoch += cfg.epochs_per_cycle;
        cycle += 1;
    }

    // Final refresh so the reported assignment reflects the trained
    // representations; parameters stay untouched.
    const std::uint64_t before = parameter_checksum(views);
    const Matrix final_target =
        build_learning_target(views, scaling, data, cfg, km_seed_base + epoch,
                              cfg.target_refresh_iters, &res.report, cycle, epoch, shared_ptr);
    const MatchingResult final_match =
        compute_view_matchings(final_target, views, data, shared_ptr, cfg.threads);
    const double final_matched = mode == AblationMode::no_matching
                                     ? final_match.unmatched_cost
                                     : final_match.matched_cost;
    res.report.match_records.push_back({cycle, epoch, final_matched,
                                        final_match.unmatched_cost,
                                        parameter_checksum(views) == before});

    res.report.final_weights = scaling.next_weights;
    res.report.final_labels = argmax_labels(scaling.robust_labels);
    res.report.epochs_run = epoch;
    if (data.has_labels)
        res.report.metrics = evaluate_clustering(res.report.final_labels, data.labels);
    res.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

/// The complete bi-level procedure: pretraining, centroid init, then
/// alternating non-parametric target refreshes and gradient epochs until
/// the epoch budget is consumed.
inline FitResult fit(const MultiViewDataset& data, const TrainConfig& cfg) {
    return ablate(data, cfg, AblationMode::full);
}

}  // namespace mvcan
