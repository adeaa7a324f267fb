#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvcan/dataset.hpp"
#include "mvcan/engine.hpp"

namespace mvcan {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'M', 'V', 'C', 'K'};
inline constexpr const char* kCheckpointVersion = "mvcan-ckpt/1";

namespace detail {

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
    return {{"clusters", cfg.clusters},
            {"lambda", cfg.lambda},
            {"target_refresh_iters", cfg.target_refresh_iters},
            {"epochs_per_cycle", cfg.epochs_per_cycle},
            {"total_epochs", cfg.total_epochs},
            {"pretrain_epochs", cfg.pretrain_epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"seed", cfg.seed},
            {"embed_dim", cfg.embed_dim},
            {"threads", cfg.threads},
            {"kmeans_restarts", cfg.kmeans_restarts}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.clusters = j.at("clusters").get<std::size_t>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.target_refresh_iters = j.at("target_refresh_iters").get<std::size_t>();
    cfg.epochs_per_cycle = j.at("epochs_per_cycle").get<std::size_t>();
    cfg.total_epochs = j.at("total_epochs").get<std::size_t>();
    cfg.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.threads = j.at("threads").get<std::size_t>();
    cfg.kmeans_restarts = j.value("kmeans_restarts", std::size_t{10});
    return cfg;
}

inline nlohmann::json mlp_shape(const Mlp& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : mlp.layers)
        layers.push_back({{"out", l.weight.rows},
                          {"in", l.weight.cols},
                          {"activation", l.activation == Activation::relu ? "relu" : "linear"}});
    return layers;
}

inline Mlp mlp_from_shape(const nlohmann::json& layers) {
    Mlp mlp;
    for (const auto& l : layers) {
        DenseLayer layer;
        layer.weight.resize(l.at("out").get<std::size_t>(), l.at("in").get<std::size_t>());
        layer.bias.assign(l.at("out").get<std::size_t>(), 0.0);
        layer.activation =
            l.at("activation").get<std::string>() == "relu" ? Activation::relu
                                                            : Activation::linear;
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

inline void write_payload(std::ostream& os, const MvcanModel& model) {
    auto block = [&os](const std::vector<double>& data) { write_f64_block(os, data); };
    for (const ViewState& view : model.views) {
        for (const auto& l : view.encoder.layers) {
            block(l.weight.data);
            block(l.bias);
        }
        for (const auto& l : view.decoder.layers) {
            block(l.weight.data);
            block(l.bias);
        }
        block(view.centroids.data);
    }
    block(model.scaling.weights);
    block(model.scaling.next_weights);
    block(model.scaling.scaled.data);
    block(model.scaling.fused_centroids.data);
    block(model.scaling.robust_labels.data);
}

inline void read_payload(std::istream& is, MvcanModel& model) {
    auto block = [&is](std::vector<double>& data) {
        read_f64_block(is, data, data.size());
    };
    for (ViewState& view : model.views) {
        for (auto& l : view.encoder.layers) {
            block(l.weight.data);
            block(l.bias);
        }
        for (auto& l : view.decoder.layers) {
            block(l.weight.data);
            block(l.bias);
        }
        block(view.centroids.data);
    }
    block(model.scaling.weights);
    block(model.scaling.next_weights);
    block(model.scaling.scaled.data);
    block(model.scaling.fused_centroids.data);
    block(model.scaling.robust_labels.data);
}

}  // namespace detail

/// Self-describing container: magic, length-prefixed JSON header (version
/// string, config echo, seed, tensor shapes), then all numeric payloads
/// as little-endian 64-bit floats in header order.
inline void save_model(const MvcanModel& model, const std::filesystem::path& path) {
    if (!model.fitted()) throw StateError("save_model: model has not been fitted");
    nlohmann::json header;
    header["version"] = kCheckpointVersion;
    header["config"] = detail::config_to_json(model.config);
    header["seed"] = model.config.seed;
    header["views"] = nlohmann::json::array();
    for (const ViewState& view : model.views)
        header["views"].push_back({{"encoder", detail::mlp_shape(view.encoder)},
                                   {"decoder", detail::mlp_shape(view.decoder)},
                                   {"centroid_rows", view.centroids.rows},
                                   {"centroid_cols", view.centroids.cols}});
    header["scaling"] = {{"iteration", model.scaling.iteration},
                         {"view_count", model.scaling.weights.size()},
                         {"scaled_rows", model.scaling.scaled.rows},
                         {"scaled_cols", model.scaling.scaled.cols},
                         {"centroid_rows", model.scaling.fused_centroids.rows},
                         {"centroid_cols", model.scaling.fused_centroids.cols},
                         {"label_rows", model.scaling.robust_labels.rows},
                         {"label_cols", model.scaling.robust_labels.cols}};

    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
    os.write(kCheckpointMagic, 4);
    const std::string text = header.dump();
    detail::write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    detail::write_payload(os, model);
    if (!os) throw CheckpointError("write failed for " + path.string());
}

inline MvcanModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError("not a checkpoint file: " + path.string());
    const std::uint64_t len = detail::read_u64(is);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (is.gcount() != static_cast<std::streamsize>(len))
        throw CheckpointError("checkpoint: truncated header");
    nlohmann::json header = nlohmann::json::parse(text);
    if (header.at("version").get<std::string>() != kCheckpointVersion)
        throw CheckpointError("checkpoint version " +
                              header.at("version").get<std::string>() + ", expected " +
                              kCheckpointVersion);

    MvcanModel model;
    model.config = detail::config_from_json(header.at("config"));
    for (const auto& vj : header.at("views")) {
        ViewState view;
        view.encoder = detail::mlp_from_shape(vj.at("encoder"));
        view.decoder = detail::mlp_from_shape(vj.at("decoder"));
        view.centroids.resize(vj.at("centroid_rows").get<std::size_t>(),
                              vj.at("centroid_cols").get<std::size_t>());
        model.views.push_back(std::move(view));
    }
    const auto& sj = header.at("scaling");
    model.scaling.iteration = sj.at("iteration").get<std::size_t>();
    model.scaling.weights.resize(sj.at("view_count").get<std::size_t>());
    model.scaling.next_weights.resize(model.scaling.weights.size());
    model.scaling.scaled.resize(sj.at("scaled_rows").get<std::size_t>(),
                                sj.at("scaled_cols").get<std::size_t>());
    model.scaling.fused_centroids.resize(sj.at("centroid_rows").get<std::size_t>(),
                                         sj.at("centroid_cols").get<std::size_t>());
    model.scaling.robust_labels.resize(sj.at("label_rows").get<std::size_t>(),
                                       sj.at("label_cols").get<std::size_t>());
    try {
        detail::read_payload(is, model);
    } catch (const TruncatedError&) {
        throw CheckpointError("checkpoint: truncated payload");
    }
    return model;
}

/// Line-delimited training report for external plotting; one JSON record
/// per line.
inline void write_report(const TrainReport& report, std::ostream& os) {
    using nlohmann::json;
    for (const EpochRecord& r : report.epochs)
        os << json{{"record", "epoch"}, {"phase", r.phase},     {"epoch", r.epoch},
                   {"view", r.view},    {"loss_rec", r.loss_rec}, {"loss_clu", r.loss_clu},
                   {"loss_total", r.loss_total}}
                  .dump()
           << "\n";
    for (const RefreshRecord& r : report.refreshes)
        os << json{{"record", "refresh"},
                   {"cycle", r.cycle},
                   {"epoch", r.epoch},
                   {"iteration", r.iteration},
                   {"weights", r.weights},
                   {"next_weights", r.next_weights}}
                  .dump()
           << "\n";
    for (const MatchRecord& r : report.match_records)
        os << json{{"record", "matching"},
                   {"cycle", r.cycle},
                   {"epoch", r.epoch},
                   {"matched_cost", r.matched_cost},
                   {"unmatched_cost", r.unmatched_cost},
                   {"params_unchanged", r.params_unchanged}}
                  .dump()
           << "\n";
    // Wall time stays out of the serialized report so identical runs
    // produce identical files; the CLI prints it instead.
    json final{{"record", "final"},
               {"mode", report.mode},
               {"epochs_run", report.epochs_run},
               {"weights", report.final_weights}};
    if (report.metrics)
        final["metrics"] = {{"acc", report.metrics->acc},
                            {"nmi", report.metrics->nmi},
                            {"ari", report.metrics->ari}};
    os << final.dump() << "\n";
}

inline void write_report(const TrainReport& report, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_report(report, os);
}

}  // namespace mvcan
