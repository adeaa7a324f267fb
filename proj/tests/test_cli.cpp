#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <mvcan/dataset.hpp>
#include <mvcan/model_io.hpp>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "mvcan_cli_out.txt";
    const std::string cmd =
        std::string(MVCAN_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    CommandResult res;
    res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream is(out);
    res.output.assign(std::istreambuf_iterator<char>(is), {});
    return res;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "mvcan_cli_test";
    fs::create_directories(dir);
    return dir;
}

const std::string kTrainFlags =
    " --epochs 2 --t2 2 --t1 2 --pretrain-epochs 2 --batch-size 64 --lr 1e-3 "
    "--embed-dim 3 --threads 1";

}  // namespace

TEST_CASE("generate writes a loadable dataset and is deterministic") {
    const fs::path dir = temp_dir();
    const fs::path a = dir / "a.mvds";
    const fs::path b = dir / "b.mvds";
    const std::string flags =
        "generate --n 120 --k 4 --views inf:6,inf:6 --noise-views 1 --seed 7 --out ";
    CHECK(run_cli(flags + a.string()).exit_code == 0);
    CHECK(run_cli(flags + b.string()).exit_code == 0);
    CHECK(slurp(a) == slurp(b));

    const mvcan::MultiViewDataset ds = mvcan::load_dataset(a);
    CHECK(ds.view_count() == 3);  // two informative + one appended noise view
    CHECK(ds.sample_count() == 120);
    CHECK(ds.manifest.cluster_hint == 4);
    CHECK(ds.views[2].cols == 6);  // default noise width: mean of declared widths
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("generate --n 10 --out /tmp/x.mvds").exit_code == 2);  // missing --k
    CHECK(run_cli("bogus-subcommand").exit_code == 2);
    CHECK(run_cli("generate --n 10 --k 2 --views inf6 --out /tmp/x.mvds").exit_code == 2);
    CHECK(run_cli("train --data /does/not/exist.mvds").exit_code == 1);
}

TEST_CASE("train, eval, export round trip") {
    const fs::path dir = temp_dir();
    const fs::path data = dir / "train.mvds";
    REQUIRE(run_cli("generate --n 90 --k 3 --views inf:5,inf:5 --seed 3 --spacing 60 "
                    "--std 0.4 --out " +
                    data.string())
                .exit_code == 0);

    const fs::path run_dir = dir / "run";
    const CommandResult train = run_cli("train --data " + data.string() + " --out-dir " +
                                        run_dir.string() + " --seed 5" + kTrainFlags);
    INFO(train.output);
    REQUIRE(train.exit_code == 0);
    CHECK(train.output.find("acc ") != std::string::npos);
    CHECK(fs::exists(run_dir / "mvcan.ckpt"));
    CHECK(fs::exists(run_dir / "report.jsonl"));

    const CommandResult eval = run_cli("eval --ckpt " + (run_dir / "mvcan.ckpt").string() +
                                       " --data " + data.string());
    INFO(eval.output);
    CHECK(eval.exit_code == 0);
    CHECK(eval.output.find("scaling factors:") != std::string::npos);

    // eval right after train reproduces the train-final metrics line.
    const auto metrics_line = [](const std::string& text) {
        const auto pos = text.find("acc ");
        return text.substr(pos, text.find('\n', pos) - pos);
    };
    CHECK(metrics_line(eval.output) == metrics_line(train.output));

    const fs::path exported = dir / "embedding.mvds";
    const CommandResult exp = run_cli("export --ckpt " + (run_dir / "mvcan.ckpt").string() +
                                      " --data " + data.string() + " --out " +
                                      exported.string());
    INFO(exp.output);
    CHECK(exp.exit_code == 0);
    const mvcan::MultiViewDataset emb = mvcan::load_dataset(exported);
    CHECK(emb.sample_count() == 90);
    CHECK(emb.view_count() == 2);  // fused representation + soft labels
    CHECK(emb.views[0].cols == 6);  // two views x embed-dim 3
    CHECK(emb.views[1].cols == 3);

    SECTION("mismatched dataset is reported with widths") {
        const fs::path other = dir / "other.mvds";
        REQUIRE(run_cli("generate --n 30 --k 3 --views inf:7,inf:5 --seed 3 --out " +
                        other.string())
                    .exit_code == 0);
        const CommandResult bad = run_cli("eval --ckpt " +
                                          (run_dir / "mvcan.ckpt").string() + " --data " +
                                          other.string());
        CHECK(bad.exit_code == 1);
        CHECK(bad.output.find("width") != std::string::npos);
    }
    SECTION("same seed twice gives identical reports") {
        const fs::path run2 = dir / "run2";
        REQUIRE(run_cli("train --data " + data.string() + " --out-dir " + run2.string() +
                        " --seed 5" + kTrainFlags)
                    .exit_code == 0);
        CHECK(slurp(run2 / "report.jsonl") == slurp(run_dir / "report.jsonl"));
        CHECK(slurp(run2 / "mvcan.ckpt") == slurp(run_dir / "mvcan.ckpt"));
    }
    SECTION("ablate dispatch") {
        const fs::path run3 = dir / "run3";
        const CommandResult ab = run_cli("train --data " + data.string() + " --out-dir " +
                                         run3.string() + " --seed 5 --ablate rec-only" +
                                         kTrainFlags);
        CHECK(ab.exit_code == 0);
        CHECK(ab.output.find("mode: rec-only") != std::string::npos);
        const CommandResult ab2 = run_cli("ablate --data " + data.string() +
                                          " --out-dir " + run3.string() +
                                          " --seed 5 --mode kmeans-concat" + kTrainFlags);
        CHECK(ab2.exit_code == 0);
        CHECK(ab2.output.find("mode: kmeans-concat") != std::string::npos);
    }
}

TEST_CASE("verify subcommand exit codes") {
    const CommandResult one = run_cli("verify --theorem 4 --trials 20 --seed 1");
    INFO(one.output);
    CHECK(one.exit_code == 0);
    CHECK(one.output.find("theorem 4") != std::string::npos);

    const CommandResult all = run_cli("verify --all --trials 25 --seed 0");
    CHECK(all.exit_code == 0);
    CHECK(all.output.find("theorem 5") != std::string::npos);

    // Harness self-test: a deliberate sign bug must surface as a captured
    // counterexample and a non-zero exit.
    const CommandResult bugged =
        run_cli("verify --theorem 3 --trials 20 --seed 1 --inject-fused-sign-bug");
    CHECK(bugged.exit_code == 3);
    CHECK(bugged.output.find("counterexample") != std::string::npos);

    const CommandResult bad = run_cli("verify --theorem 9 --trials 5");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("MVCAN_SEED provides the default seed") {
    const fs::path dir = temp_dir();
    const fs::path with_flag = dir / "flagged.mvds";
    const fs::path with_env = dir / "env.mvds";
    REQUIRE(run_cli("generate --n 40 --k 2 --views inf:4 --seed 123 --out " +
                    with_flag.string())
                .exit_code == 0);
    const std::string cmd = "MVCAN_SEED=123 " + std::string(MVCAN_CLI_PATH) +
                            " generate --n 40 --k 2 --views inf:4 --out " +
                            with_env.string() + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(slurp(with_flag) == slurp(with_env));
}
