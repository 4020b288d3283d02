#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(DMLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_stderr(const std::string& args) {
    const std::string cmd = std::string(DMLAB_CLI_PATH) + " " + args + " 2>&1 >/dev/null";
    std::string out;
    if (FILE* p = popen(cmd.c_str(), "r")) {
        char buf[256];
        while (fgets(buf, sizeof buf, p)) out += buf;
        pclose(p);
    }
    return out;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

// Small budgets so the whole pipeline runs in seconds.
fs::path write_tiny_config(const fs::path& dir) {
    const json cfg = {{"schema_version", 1},
                      {"seed", 3},
                      {"dataset", {{"size", 32}}},
                      {"pixel_prior", {{"channels", 4}, {"blocks", 1}, {"epochs", 1}, {"variants", 1}}},
                      {"diff_prior",
                       {{"latent_dim", 4}, {"steps", 50}, {"hidden", 16}, {"embed_dim", 8}, {"train_steps", 20}}},
                      {"detector", {{"channels", 2}, {"epochs", 1}}}};
    const auto path = dir / "tiny.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = dmlab::testing::scratch_dir(std::string("cli_") +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        cfg_ = write_tiny_config(dir_);
    }
    std::string common(const std::string& out) const {
        return "--config " + cfg_.string() + " --out " + (dir_ / out).string();
    }
    fs::path dir_;
    fs::path cfg_;
};

}  // namespace

TEST_F(Cli, SynthThenSelfEvalIsPerfect) {
    ASSERT_EQ(run("synth --n 10 " + common("data")), 0);
    for (const char* f : {"images/0000.pgm", "masks/0009.pbm", "manifest.json", "sidecar.json"})
        EXPECT_TRUE(fs::exists(dir_ / "data" / f)) << f;
    const auto side = read_json(dir_ / "data" / "sidecar.json");
    EXPECT_EQ(side.at("command"), "synth");
    EXPECT_EQ(side.at("seed"), 3);
    EXPECT_EQ(side.at("params").at("n"), 10);
    ASSERT_FALSE(side.at("outputs").empty());
    for (const auto& o : side.at("outputs")) EXPECT_EQ(o.at("sha256").get<std::string>().size(), 64u);

    const auto d = (dir_ / "data").string();
    ASSERT_EQ(run("eval --pred " + d + " --gt " + d + " " + common("eval")), 0);
    const auto m = read_json(dir_ / "eval" / "metrics.json").at("metrics");
    EXPECT_EQ(m.at("iou"), 1.0);
    EXPECT_EQ(m.at("pd"), 1.0);
    EXPECT_EQ(m.at("fa"), 0.0);
    EXPECT_TRUE(fs::exists(dir_ / "eval" / "table.txt"));
    EXPECT_EQ(read_json(dir_ / "eval" / "sidecar.json").at("inputs").size(), 3u);  // config, pred, gt
}

TEST_F(Cli, MosaicAugmentRecordsLineage) {
    ASSERT_EQ(run("synth --n 8 " + common("data")), 0);
    ASSERT_EQ(run("augment --data " + (dir_ / "data").string() + " --method mosaic --n 5 " + common("aug")), 0);
    const auto man = read_json(dir_ / "aug" / "manifest.json");
    ASSERT_EQ(man.at("entries").size(), 5u);
    for (const auto& e : man.at("entries")) EXPECT_EQ(e.at("meta").at("lineage"), "mosaic");
    EXPECT_TRUE(fs::exists(dir_ / "aug" / "images" / "0004.pgm"));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("eval --pred " + (dir_ / "nope").string() + " --gt " + (dir_ / "nope").string() + " " +
                  common("e")), 2);
    std::ofstream(dir_ / "bad.json") << R"({"schema_version": 1, "detector": {"chanels": 3}})";
    EXPECT_EQ(run("synth --n 2 --config " + (dir_ / "bad.json").string() + " --out " + (dir_ / "x").string()), 2);
    EXPECT_EQ(run("synth --n 2"), 2);  // --out is required
    EXPECT_EQ(run("frobnicate --out x"), 2);
    ASSERT_EQ(run("synth --n 2 " + common("data")), 0);
    EXPECT_EQ(run("synth --n 2 " + common("data")), 2);  // refuses to overwrite

    // A runaway learning rate drives the loss non-finite.
    std::ofstream(dir_ / "hot.json") << R"({"schema_version": 1, "dataset": {"size": 32},
        "detector": {"channels": 2, "epochs": 4, "lr": 1e300}})";
    const auto args = "train-detector --data " + (dir_ / "data").string() + " --config " +
                      (dir_ / "hot.json").string() + " --out " + (dir_ / "det.ckpt").string();
    EXPECT_EQ(run(args), 3);
    EXPECT_NE(run_stderr(args).find("train-detector"), std::string::npos);
}

TEST_F(Cli, ClassicalDetectWritesScoreAndMask) {
    ASSERT_EQ(run("synth --n 3 " + common("data")), 0);
    for (const char* m : {"tophat", "lcm", "ipi"}) {
        const std::string out = std::string("det_") + m;
        ASSERT_EQ(run(std::string("detect --method ") + m + " --image " + (dir_ / "data/images/0000.pgm").string() +
                      " " + common(out)),
                  0)
            << m;
        EXPECT_TRUE(fs::exists(dir_ / out / "score.pgm"));
        EXPECT_TRUE(fs::exists(dir_ / out / "mask.pbm"));
        EXPECT_TRUE(fs::exists(dir_ / out / "sidecar.json"));
    }
    ASSERT_EQ(run("detect --method tophat --threshold fixed --tau 0.05 --data " + (dir_ / "data").string() + " " +
                  common("det_all")),
              0);
    EXPECT_TRUE(fs::exists(dir_ / "det_all" / "masks" / "0002.pbm"));
    EXPECT_EQ(run("detect --method sobel --image " + (dir_ / "data/images/0000.pgm").string() + " " + common("d2")), 2);
}

TEST_F(Cli, FullPipelineSmoke) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = [&](const char* p) { return (dir_ / p).string(); };
    ASSERT_EQ(run("synth --n 12 " + common("data")), 0);
    ASSERT_EQ(run("train-pixel-prior --data " + d("data") + " " + common("pp.ckpt")), 0);
    ASSERT_EQ(run("train-diff-prior --data " + d("data") + " " + common("diff")), 0);
    ASSERT_EQ(run("resample --data " + d("data") + " --ae " + d("diff/linear_ae.ckpt") + " --denoiser " +
                  d("diff/denoiser.ckpt") + " " + common("resampled")),
              0);
    ASSERT_EQ(run("augment --data " + d("data") + " --method diff_mosaic --n 4 --pixel-prior " + d("pp.ckpt") +
                  " --ae " + d("diff/linear_ae.ckpt") + " --denoiser " + d("diff/denoiser.ckpt") + " " +
                  common("aug")),
              0);
    ASSERT_EQ(run("train-detector --data " + d("data") + " --extra " + d("aug") + " " + common("det.ckpt")), 0);
    ASSERT_EQ(run("predict --model " + d("det.ckpt") + " --data " + d("data") + " " + common("pred")), 0);
    ASSERT_EQ(run("eval --split test --label detector --pred " + d("pred") + " --gt " + d("data") + " " +
                  common("eval")),
              0);
    EXPECT_TRUE(fs::exists(dir_ / "pp.ckpt.json"));
    EXPECT_TRUE(fs::exists(dir_ / "det.ckpt.json"));
    EXPECT_TRUE(fs::exists(dir_ / "pred" / "scores" / "0000.pgm"));
    const auto side = read_json(dir_ / "det.ckpt.json");
    int real_train = 0;
    const auto manifest = read_json(dir_ / "data" / "manifest.json");
    for (const auto& e : manifest.at("entries")) real_train += e.at("split") == "train";
    EXPECT_EQ(side.at("params").at("train_size").get<int>(), real_train + 4);
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 300.0);
}

TEST_F(Cli, ReportWritesTheRunDirectory) {
    std::ofstream(dir_ / "run.json") << R"({"schema_version": 1, "seed": 5,
        "dataset": {"scenes": 12, "size": 32}, "augmentation": {"arms": ["baseline", "mosaic"], "count": 2},
        "detector": {"channels": 2, "epochs": 1}, "eval": {"min_test_scr": 0.0}})";
    ASSERT_EQ(run("report --config " + (dir_ / "run.json").string() + " --out " + (dir_ / "run").string()), 0);
    for (const char* f : {"config.resolved", "reports/report.json", "reports/table.txt", "data/real/manifest.json",
                          "checkpoints/detector_mosaic.ckpt", "sidecar.json"})
        EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
    EXPECT_EQ(read_json(dir_ / "run" / "reports" / "report.json").at("rows").size(), 2u);
}
