#include "dmlab/errors.hpp"
#include "dmlab/experiment.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace dmlab;
using nlohmann::json;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.seed = 7;
    c.scenes = 16;
    c.dataset.scene.size = 32;
    c.count = 4;
    c.pixel_prior = {4, 1};
    c.pixel_prior_train.epochs = 1;
    c.pixel_prior_train.variants = 1;
    c.diff_prior.latent_dim = 4;
    c.diff_prior.steps = 50;
    c.diff_prior.denoiser = {16, 8};
    c.diff_prior.train.steps = 20;
    c.diff_prior.train.batch = 8;
    c.detector = {2};
    c.detector_train.epochs = 1;
    c.min_test_scr = 0.0;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(ExperimentConfig, JsonRoundTrip) {
    auto c = tiny_config();
    c.arms = {AugmentKind::None, AugmentKind::CutMix, AugmentKind::Mixup};
    c.paste.invert_convention = true;
    const auto j = c.to_json();
    EXPECT_EQ(ExperimentConfig::from_json(j).to_json(), j);
    EXPECT_EQ(j.at("augmentation").at("arms"), (json{"baseline", "cutmix", "mixup"}));
}

TEST(ExperimentConfig, StrictParsing) {
    const auto base = tiny_config().to_json();
    auto j = base;
    j["detector"]["chanels"] = 4;
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = base;
    j["schema_version"] = 2;
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = base;
    j["scenes"] = "many";
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = base;
    j["augmentation"]["arms"] = json{"mosaic", "mosaic"};
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = base;
    j["augmentation"]["arms"] = json{"stylegan"};
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    j = base;
    j["dataset"]["size"] = 30;  // detector needs a multiple of 4
    EXPECT_THROW(ExperimentConfig::from_json(j), ConfigError);
    // Missing keys keep their defaults.
    EXPECT_EQ(ExperimentConfig::from_json(json{{"schema_version", 1}, {"seed", 5}}).count, ExperimentConfig{}.count);
    EXPECT_EQ(parse_augment_kind("none"), AugmentKind::None);
    EXPECT_EQ(parse_augment_kind("baseline"), AugmentKind::None);
}

TEST(ExperimentConfig, LoadConfigReportsMissingAndMalformedFiles) {
    const auto dir = dmlab::testing::scratch_dir("cfg");
    EXPECT_THROW(load_config(dir / "absent.json"), IoError);
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Ablation, SingleBaselineArmGivesOneRow) {
    auto c = tiny_config();
    c.arms = {AugmentKind::None};
    const auto r = run_ablation(c);
    ASSERT_EQ(r.json.at("rows").size(), 1u);
    const auto& row = r.json.at("rows")[0];
    EXPECT_EQ(row.at("arm"), "baseline");
    EXPECT_EQ(row.at("augmented"), 0);
    EXPECT_TRUE(row.at("metrics").contains("iou"));
    EXPECT_TRUE(row.at("pool_qd_mean").is_null());
    EXPECT_EQ(r.json.at("status"), "complete");
    EXPECT_NE(r.table.find("baseline (+0)"), std::string::npos);
}

TEST(Ablation, SameSeedGivesIdenticalReportFiles) {
    auto c = tiny_config();
    c.arms = {AugmentKind::None, AugmentKind::DiffMosaic};
    const auto a = dmlab::testing::scratch_dir("abl_a"), b = dmlab::testing::scratch_dir("abl_b");
    run_ablation(c, a);
    run_ablation(c, b);
    EXPECT_EQ(slurp(a / "reports" / "report.json"), slurp(b / "reports" / "report.json"));
    EXPECT_EQ(slurp(a / "reports" / "table.txt"), slurp(b / "reports" / "table.txt"));
    EXPECT_EQ(slurp(a / "config.resolved"), slurp(b / "config.resolved"));
    for (const char* f : {"checkpoints/linear_ae.ckpt", "checkpoints/denoiser.ckpt", "checkpoints/pixel_prior.ckpt",
                          "checkpoints/detector_diff_mosaic.ckpt", "data/real/manifest.json",
                          "data/diff_mosaic/manifest.json"}) {
        ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const auto resolved = load_config(a / "config.resolved");
    EXPECT_EQ(resolved.to_json(), c.to_json());
}

TEST(ScaleSweep, CountsGiveTrainingSizesInAscendingOrder) {
    auto c = tiny_config();
    c.sweep_arm = AugmentKind::Mosaic;
    c.sweep_counts = {4, 0, 2};
    const auto r = run_scale_sweep(c);
    const auto& rows = r.json.at("rows");
    ASSERT_EQ(rows.size(), 3u);
    const int n = r.json.at("dataset").at("train");
    const int counts[] = {0, 2, 4};
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(rows[i].at("augmented"), counts[i]);
        EXPECT_EQ(rows[i].at("train_size"), n + counts[i]);
    }
    EXPECT_EQ(r.json.at("kind"), "scale_sweep");
}

TEST(ScaleSweep, SinglePointEqualsAblationOfThatArm) {
    auto c = tiny_config();
    c.arms = {AugmentKind::PixelPrior};
    c.sweep_arm = AugmentKind::PixelPrior;
    c.sweep_counts = {c.count};
    const auto a = run_ablation(c), s = run_scale_sweep(c);
    auto ra = a.json.at("rows"), rs = s.json.at("rows");
    // Only the checkpoint file name carries the sweep count.
    ra[0].erase("checkpoint");
    rs[0].erase("checkpoint");
    EXPECT_EQ(ra, rs);
    EXPECT_EQ(a.table, s.table);
}

TEST(Ablation, CheckpointsReEvaluateToTheLoggedMetrics) {
    auto c = tiny_config();
    c.arms = {AugmentKind::None, AugmentKind::Mosaic, AugmentKind::CutMix};
    const auto dir = dmlab::testing::scratch_dir("abl_reload");
    const auto r = run_ablation(c, dir);
    const auto ds = make_dataset(c.scenes, c.dataset, stage_seed(c, "dataset"));
    const auto test = easy_split(ds.test(), c.min_test_scr);
    for (const auto& row : r.json.at("rows")) {
        const auto net = det_from_checkpoint(nn::read_checkpoint(dir / row.at("checkpoint").get<std::string>()));
        const auto m = evaluate_detector(net, test, c.threshold, c.match_distance, c.macro);
        EXPECT_EQ(metrics_to_json(m), row.at("metrics")) << row.at("arm");
    }
}

TEST(Ablation, FailureLeavesAReportWithFinishedRows) {
    auto c = tiny_config();
    c.arms = {AugmentKind::None, AugmentKind::Mosaic};
    const auto dir = dmlab::testing::scratch_dir("abl_fail");
    // A directory where the second checkpoint should go makes that write fail.
    std::filesystem::create_directories(dir / "checkpoints" / "detector_mosaic.ckpt");
    EXPECT_THROW(run_ablation(c, dir), IoError);
    const auto j = json::parse(slurp(dir / "reports" / "report.json"));
    EXPECT_EQ(j.at("status"), "failed");
    EXPECT_TRUE(j.contains("error"));
    ASSERT_EQ(j.at("rows").size(), 1u);
    EXPECT_EQ(j.at("rows")[0].at("arm"), "baseline");
}

TEST(Ablation, LabelsSurviveEveryPool) {
    auto c = tiny_config();
    c.arms = {AugmentKind::Mosaic, AugmentKind::CutMix, AugmentKind::Mixup, AugmentKind::PixelPrior,
              AugmentKind::DiffMosaic};
    const auto ds = make_dataset(c.scenes, c.dataset, stage_seed(c, "dataset"));
    const auto train = ds.train();
    const auto priors = train_priors(c, train, c.arms);
    for (auto arm : c.arms) {
        const auto pool = augment_pool(c, arm, 6, train, priors);
        ASSERT_EQ(pool.size(), 6u);
        for (const auto& s : pool) {
            EXPECT_TRUE(s.mask.same_dims(s.image));
            EXPECT_EQ(s.image.width(), c.dataset.scene.size);
        }
        // Prefix consistency: a smaller request is the start of a larger one.
        const auto small = augment_pool(c, arm, 3, train, priors);
        for (int i = 0; i < 3; ++i) EXPECT_EQ(small[i].image, pool[i].image) << to_string(arm);
    }
}

TEST(MetricTable, Layout) {
    MetricSet m;
    m.iou = 0.5;
    m.pd = 0.75;
    m.fa = 2.5e-6;
    const auto t = format_metric_table({{"mosaic (+4)", m}});
    EXPECT_NE(t.find("IoU(%)"), std::string::npos);
    EXPECT_NE(t.find("50.00"), std::string::npos);
    EXPECT_NE(t.find("75.00"), std::string::npos);
    EXPECT_NE(t.find("2.50"), std::string::npos);
}
