#include "dmlab/errors.hpp"
#include "dmlab/metrics.hpp"
#include "metric_oracle.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace dmlab;

namespace {

BinaryMask mask_of(int w, int h, std::initializer_list<Pixel> on) {
    BinaryMask m(w, h);
    for (const auto& p : on) m.set(p.x, p.y, true);
    return m;
}

void fill_square(BinaryMask& m, int x0, int y0, int side) {
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) m.set(x, y, true);
}

}  // namespace

TEST(PixelIou, SpotValues) {
    const auto a = mask_of(4, 4, {{1, 1}, {2, 2}});
    EXPECT_EQ(pixel_iou(a, a).iou, 1.0);
    const auto r = pixel_iou(mask_of(2, 2, {{0, 0}, {0, 1}}), mask_of(2, 2, {{0, 1}, {1, 1}}));
    EXPECT_EQ(r.inter, 1u);
    EXPECT_EQ(r.uni, 3u);
    EXPECT_DOUBLE_EQ(r.iou, 1.0 / 3.0);
    EXPECT_EQ(pixel_iou(BinaryMask(3, 3), BinaryMask(3, 3)).iou, 1.0);
    EXPECT_THROW(pixel_iou(BinaryMask(3, 3), BinaryMask(3, 4)), ShapeMismatch);
}

TEST(PdFa, SpotValues) {
    BinaryMask gt(32, 32);
    fill_square(gt, 2, 2, 3);
    fill_square(gt, 20, 20, 3);
    const auto same = pd_fa(gt, gt);
    EXPECT_EQ(same.correct, 2u);
    EXPECT_EQ(same.false_pixels, 0u);

    BinaryMask pred(32, 32);
    fill_square(pred, 2, 2, 3);  // exact hit on the first target
    for (int x = 10; x < 15; ++x) pred.set(x, 28, true);  // far 5-pixel blob
    const auto r = pd_fa(pred, gt);
    EXPECT_EQ(r.correct, 1u);
    EXPECT_EQ(r.targets, 2u);
    EXPECT_EQ(r.false_pixels, 5u);

    const auto empty = pd_fa(BinaryMask(32, 32), gt);
    EXPECT_EQ(empty.correct, 0u);
    EXPECT_EQ(empty.false_pixels, 0u);
}

TEST(PdFa, OneToOneMatching) {
    // Two predictions near one target: only one can match, the other is false.
    BinaryMask gt(16, 16);
    gt.set(8, 8, true);
    BinaryMask pred(16, 16);
    pred.set(8, 9, true);
    pred.set(6, 8, true);
    const auto r = pd_fa(pred, gt);
    EXPECT_EQ(r.correct, 1u);
    EXPECT_EQ(r.false_pixels, 1u);
}

TEST(Metrics, MatchBruteForceOracle) {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const double dp = rng.uniform(0.0, 0.3), dg = rng.uniform(0.0, 0.3);
        const auto p = dmlab::testing::random_mask(32, 32, dp, rng);
        const auto g = dmlab::testing::random_mask(32, 32, dg, rng);
        const auto a = pixel_iou(p, g), b = dmlab::testing::oracle_iou(p, g);
        ASSERT_EQ(a.inter, b.inter);
        ASSERT_EQ(a.uni, b.uni);
        ASSERT_EQ(a.iou, b.iou);
        const auto c = pd_fa(p, g), d = dmlab::testing::oracle_pd_fa(p, g, kDefaultMatchDistance);
        ASSERT_EQ(c.correct, d.correct) << i;
        ASSERT_EQ(c.targets, d.targets) << i;
        ASSERT_EQ(c.false_pixels, d.false_pixels) << i;
    }
}

TEST(EvaluateSet, MicroAverageAndDegenerateSets) {
    const auto p1 = mask_of(2, 2, {{0, 0}, {0, 1}});
    const auto g1 = mask_of(2, 2, {{0, 1}, {1, 1}});
    const auto p2 = mask_of(2, 2, {{1, 0}});
    const std::vector<BinaryMask> preds{p1, p2}, gts{g1, p2};
    const auto m = evaluate_set(preds, gts);
    EXPECT_DOUBLE_EQ(m.iou, 0.5);  // (1 + 1) / (3 + 1)
    const auto macro = evaluate_set(preds, gts, kDefaultMatchDistance, true);
    EXPECT_DOUBLE_EQ(macro.iou, (1.0 / 3.0 + 1.0) / 2.0);

    const std::vector<BinaryMask> one_p{p1}, one_g{g1};
    const auto single = evaluate_set(one_p, one_g);
    const auto iu = pixel_iou(p1, g1);
    const auto pf = pd_fa(p1, g1);
    EXPECT_EQ(single.iou, iu.iou);
    EXPECT_EQ(single.correct, pf.correct);
    EXPECT_EQ(single.false_pixels, pf.false_pixels);

    const auto perfect = evaluate_set(gts, gts);
    EXPECT_EQ(perfect.iou, 1.0);
    EXPECT_EQ(perfect.pd, 1.0);
    EXPECT_EQ(perfect.fa, 0.0);

    const std::vector<BinaryMask> blank{BinaryMask(4, 4)};
    EXPECT_EQ(evaluate_set(blank, blank).pd, 1.0);
    EXPECT_THROW(evaluate_set(preds, one_g), ShapeMismatch);
}
