// Command-line front end: synthetic data generation, training,
// evaluation, embedding export, ablations, and the theorem
// verification campaigns.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error,
// 3 verification counterexample.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <mvcan/mvcan.hpp>

namespace {

struct GenerateArgs {
    std::string out;
    std::size_t n = 1000;
    std::size_t k = 4;
    std::string views = "inf:20,inf:20";
    std::size_t noise_views = 0;
    std::size_t noise_width = 0;  // 0: mean of the declared view widths
    double spacing = 10.0;
    double stddev = 1.0;
    std::uint64_t seed = 0;
};

std::vector<mvcan::SyntheticViewSpec> parse_view_list(const std::string& text,
                                                      double spacing, double stddev) {
    std::vector<mvcan::SyntheticViewSpec> specs;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("--views", "expected tag:width, got '" + item + "'");
        const std::string tag = item.substr(0, colon);
        const int width = std::stoi(item.substr(colon + 1));
        if (width < 1)
            throw CLI::ValidationError("--views", "width must be positive in '" + item + "'");
        mvcan::SyntheticViewSpec spec;
        spec.width = static_cast<std::size_t>(width);
        spec.spacing = spacing;
        spec.stddev = stddev;
        if (tag == "inf" || tag == "informative")
            spec.informative = true;
        else if (tag == "noise")
            spec.informative = false;
        else
            throw CLI::ValidationError("--views", "unknown view tag '" + tag + "'");
        specs.push_back(spec);
        pos = comma + 1;
    }
    if (specs.empty()) throw CLI::ValidationError("--views", "no views given");
    return specs;
}

int cmd_generate(const GenerateArgs& args) {
    mvcan::SyntheticSpec spec;
    spec.samples = args.n;
    spec.clusters = args.k;
    spec.seed = args.seed;
    spec.views = parse_view_list(args.views, args.spacing, args.stddev);
    std::size_t width_sum = 0;
    for (const auto& v : spec.views) width_sum += v.width;
    std::size_t noise_width = args.noise_width;
    if (noise_width == 0) noise_width = std::max<std::size_t>(1, width_sum / spec.views.size());
    for (std::size_t i = 0; i < args.noise_views; ++i) {
        mvcan::SyntheticViewSpec nv;
        nv.width = noise_width;
        nv.informative = false;
        spec.views.push_back(nv);
    }

    const mvcan::MultiViewDataset ds = mvcan::generate_synthetic(spec);
    mvcan::save_dataset(ds, args.out);
    std::cout << mvcan::manifest_text(ds);

    // Per-view sanity: k-means on each view alone; noise views should
    // score near chance.
    const mvcan::MultiViewDataset norm = mvcan::normalize_unit_range(ds);
    for (std::size_t v = 0; v < norm.view_count(); ++v) {
        const auto km = mvcan::kmeans(norm.views[v], spec.clusters,
                                      mvcan::derive_seed(args.seed, 0x5aff, v));
        const auto m = mvcan::evaluate_clustering(km.labels, norm.labels);
        std::cout << "  kmeans on " << norm.manifest.views[v].name << ": acc " << m.acc
                  << ", nmi " << m.nmi << ", ari " << m.ari << "\n";
    }
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out_dir = ".";
    std::string ablation = "full";
    mvcan::TrainConfig cfg;
    std::size_t k_override = 0;
};

int cmd_train(TrainArgs args) {
    const mvcan::MultiViewDataset ds =
        mvcan::normalize_unit_range(mvcan::load_dataset(args.data));
    args.cfg.clusters = args.k_override > 0 ? args.k_override : ds.manifest.cluster_hint;
    if (args.cfg.clusters < 2)
        throw mvcan::ConfigError("no usable cluster count: pass --k or regenerate the "
                                 "dataset with a cluster hint");
    args.cfg.validate();
    const mvcan::AblationMode mode = mvcan::parse_ablation_mode(args.ablation);

    const mvcan::FitResult result = mvcan::ablate(ds, args.cfg, mode);

    std::filesystem::create_directories(args.out_dir);
    const std::filesystem::path report_path =
        std::filesystem::path(args.out_dir) / "report.jsonl";
    mvcan::write_report(result.report, report_path);
    if (mode != mvcan::AblationMode::kmeans_concat) {
        const std::filesystem::path ckpt_path =
            std::filesystem::path(args.out_dir) / "mvcan.ckpt";
        mvcan::save_model(result.model, ckpt_path);
        std::cout << "checkpoint: " << ckpt_path.string() << "\n";
    }
    std::cout << "report: " << report_path.string() << "\n";
    std::cout << "mode: " << result.report.mode << ", epochs run: "
              << result.report.epochs_run << ", wall " << result.report.wall_seconds
              << "s\n";
    if (!result.report.final_weights.empty()) {
        std::cout << "scaling factors:";
        for (double w : result.report.final_weights) std::cout << " " << w;
        std::cout << "\n";
    }
    if (result.report.metrics)
        std::cout << "acc " << result.report.metrics->acc << ", nmi "
                  << result.report.metrics->nmi << ", ari " << result.report.metrics->ari
                  << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data) {
    const mvcan::MvcanModel model = mvcan::load_model(ckpt);
    const mvcan::MultiViewDataset ds =
        mvcan::normalize_unit_range(mvcan::load_dataset(data));
    const mvcan::PredictResult pred = mvcan::predict(model, ds);
    std::cout << "samples: " << pred.labels.size() << "\n";
    std::cout << "scaling factors:";
    for (double w : model.scaling.weights) std::cout << " " << w;
    std::cout << "\n";
    if (ds.has_labels) {
        const auto m = mvcan::evaluate_clustering(pred.labels, ds.labels);
        std::cout << "acc " << m.acc << ", nmi " << m.nmi << ", ari " << m.ari << "\n";
    } else {
        std::cout << "no ground-truth labels in dataset\n";
    }
    return 0;
}

int cmd_export(const std::string& ckpt, const std::string& data, const std::string& out) {
    const mvcan::MvcanModel model = mvcan::load_model(ckpt);
    const mvcan::MultiViewDataset ds =
        mvcan::normalize_unit_range(mvcan::load_dataset(data));
    const mvcan::PredictResult pred = mvcan::predict(model, ds);

    mvcan::MultiViewDataset exported;
    exported.views.push_back(pred.scaled);
    exported.views.push_back(pred.soft_labels);
    exported.has_labels = true;
    exported.labels = pred.labels;
    exported.manifest.cluster_hint = model.config.clusters;
    exported.manifest.views.push_back(
        {"fused_representation", pred.scaled.cols, "scaled concatenated embeddings"});
    exported.manifest.views.push_back(
        {"soft_labels", pred.soft_labels.cols, "fused soft assignments"});
    mvcan::save_dataset(exported, out);
    std::cout << "wrote " << out << " (" << pred.labels.size() << " rows)\n";
    return 0;
}

struct VerifyArgs {
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    int theorem = 0;  // 0: all
    std::string out;
    double epsilon = 1e-6;
    double margin = 1.0;
    bool inject_sign_bug = false;
};

int cmd_verify(const VerifyArgs& args) {
    mvcan::VerifyOptions opts;
    opts.epsilon = args.epsilon;
    opts.margin = args.margin;
    opts.flip_fused_sign = args.inject_sign_bug;

    std::vector<mvcan::TheoremReport> reports;
    switch (args.theorem) {
        case 0: reports = mvcan::verify_all(args.trials, args.seed, opts); break;
        case 1: reports = {mvcan::verify_accuracy_identity(args.trials, args.seed, opts)}; break;
        case 2: reports = {mvcan::verify_kmeans_decomposition(args.trials, args.seed, opts)}; break;
        case 3: reports = {mvcan::verify_consistency(args.trials, args.seed, opts)}; break;
        case 4: reports = {mvcan::verify_complementarity(args.trials, args.seed, opts)}; break;
        case 5: reports = {mvcan::verify_noise_robustness(args.trials, args.seed, opts)}; break;
        default: throw CLI::ValidationError("--theorem", "theorem id must be in 1..5");
    }
    const std::string text = mvcan::report_text(reports);
    std::cout << text;
    if (!args.out.empty()) {
        std::ofstream os(args.out);
        os << text;
    }
    for (const auto& r : reports)
        if (!r.passed()) return 3;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mvcan: noise-robust multi-view clustering"};
    app.require_subcommand(1);

    // MVCAN_SEED provides the default seed wherever --seed is not given.
    std::uint64_t default_seed = 0;
    if (const char* env = std::getenv("MVCAN_SEED")) default_seed = std::strtoull(env, nullptr, 10);

    GenerateArgs gen;
    gen.seed = default_seed;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
    generate->add_option("--out", gen.out, "output dataset path")->required();
    generate->add_option("--n", gen.n, "sample count");
    generate->add_option("--k", gen.k, "cluster count")->required();
    generate->add_option("--views", gen.views, "comma list of tag:width (tags: inf, noise)");
    generate->add_option("--noise-views", gen.noise_views, "extra noise views to append");
    generate->add_option("--noise-width", gen.noise_width,
                         "noise view width (default: mean of declared widths)");
    generate->add_option("--spacing", gen.spacing, "cluster centroid spacing");
    generate->add_option("--std", gen.stddev, "within-cluster standard deviation");
    generate->add_option("--seed", gen.seed, "generator seed");

    TrainArgs train;
    train.cfg.seed = default_seed;
    CLI::App* train_cmd = app.add_subcommand("train", "fit the model on a dataset");
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "train a designated variant");
    for (CLI::App* cmd : {train_cmd, ablate_cmd}) {
        cmd->add_option("--data", train.data, "dataset path")->required();
        cmd->add_option("--out-dir", train.out_dir, "output directory");
        cmd->add_option("--k", train.k_override, "cluster count (default: dataset hint)");
        cmd->add_option("--lambda", train.cfg.lambda, "clustering loss weight");
        cmd->add_option("--t1", train.cfg.target_refresh_iters,
                        "iterations of the non-parametric phase per cycle");
        cmd->add_option("--t2", train.cfg.epochs_per_cycle, "gradient epochs per cycle");
        cmd->add_option("--epochs", train.cfg.total_epochs, "total gradient epochs");
        cmd->add_option("--pretrain-epochs", train.cfg.pretrain_epochs, "pretraining epochs");
        cmd->add_option("--batch-size", train.cfg.batch_size, "mini-batch size");
        cmd->add_option("--lr", train.cfg.learning_rate, "Adam learning rate");
        cmd->add_option("--embed-dim", train.cfg.embed_dim, "per-view embedding width");
        cmd->add_option("--seed", train.cfg.seed, "training seed");
        cmd->add_option("--threads", train.cfg.threads,
                        "worker threads (1 guarantees bit-reproducibility)");
        cmd->add_option("--kmeans-restarts", train.cfg.kmeans_restarts,
                        "k-means inits per call (best objective wins)");
    }
    train_cmd->add_option("--ablate", train.ablation, "variant to run");
    ablate_cmd->add_option("--mode", train.ablation, "variant to run")->required();

    std::string eval_ckpt, eval_data;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "dataset path")->required();

    std::string export_ckpt, export_data, export_out;
    CLI::App* export_cmd =
        app.add_subcommand("export", "write fused embeddings and soft labels");
    export_cmd->add_option("--ckpt", export_ckpt, "checkpoint path")->required();
    export_cmd->add_option("--data", export_data, "dataset path")->required();
    export_cmd->add_option("--out", export_out, "output path")->required();

    VerifyArgs verify;
    verify.seed = default_seed;
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the theorem campaigns");
    verify_cmd->add_option("--trials", verify.trials, "trials per campaign");
    verify_cmd->add_option("--seed", verify.seed, "campaign seed");
    verify_cmd->add_option("--theorem", verify.theorem, "run one theorem (1..5)");
    verify_cmd->add_flag("--all", "run every campaign (default)");
    verify_cmd->add_option("--out", verify.out, "also write the report to a file");
    verify_cmd->add_option("--epsilon", verify.epsilon, "noisy-profile distance gap bound");
    verify_cmd->add_option("--margin", verify.margin, "informative-profile distance gap");
    verify_cmd
        ->add_flag("--inject-fused-sign-bug", verify.inject_sign_bug,
                   "flip the fused distance sign (harness self-test)")
        ->group("");  // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen);
        if (train_cmd->parsed()) return cmd_train(train);
        if (ablate_cmd->parsed()) return cmd_train(train);
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data);
        if (export_cmd->parsed()) return cmd_export(export_ckpt, export_data, export_out);
        if (verify_cmd->parsed()) return cmd_verify(verify);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
