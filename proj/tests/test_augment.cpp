#include "dmlab/augment.hpp"
#include "dmlab/errors.hpp"
#include "label_contracts.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace dmlab;
using dmlab::testing::max_abs_diff;
using dmlab::testing::random_image;
using dmlab::testing::random_mask;

namespace {

DegradeConfig noop_degrade() {
    DegradeConfig c;
    c.orders = 1;
    c.blur_sigma = {1e-9, 1e-9};
    c.resize_scale = {1.0, 1.0};
    c.noise_sigma = {0.0, 0.0};
    return c;
}

std::vector<Sample> random_samples(int n, int size, Rng& rng) {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        out.emplace_back(random_image(size, size, rng), random_mask(size, size, 0.2, rng));
        out.back().meta["index"] = std::to_string(i);
    }
    return out;
}

}  // namespace

TEST(Degrade, NoOpLimitIsIdentity) {
    Rng rng(1), r(2);
    const auto img = random_image(16, 16, rng);
    EXPECT_LT(max_abs_diff(degrade(img, noop_degrade(), r), img), 1e-6);
}

TEST(Degrade, ConstantImageStaysConstantUpToNoise) {
    DegradeConfig cfg;  // defaults
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const auto out = degrade(GrayImage(48, 48, 0.5), cfg, rng);
        double s = 0.0, sq = 0.0;
        for (double v : out.pixels()) {
            s += v - 0.5;
            sq += (v - 0.5) * (v - 0.5);
        }
        const double n = static_cast<double>(out.size());
        const double sd = std::sqrt(sq / n - (s / n) * (s / n));
        // Two rounds of noise at most 0.05 each; blur and resampling only shrink it.
        EXPECT_LE(sd, std::sqrt(2.0) * 0.05 * 1.1);
    }
}

TEST(Degrade, TwoOrdersEqualsOneOrderTwice) {
    Rng img_rng(3);
    const auto img = random_image(20, 20, img_rng);
    DegradeConfig two;
    DegradeConfig one = two;
    one.orders = 1;
    Rng a(7), b(7);
    const auto x = degrade(img, two, a);
    const auto y = degrade(degrade(img, one, b), one, b);
    EXPECT_EQ(x, y);
}

TEST(Degrade, InvalidConfigIsAnError) {
    DegradeConfig c;
    c.orders = 0;
    EXPECT_THROW(c.validate(), InvalidParameter);
    c = {};
    c.blur_sigma = {2.0, 1.0};
    EXPECT_THROW(c.validate(), InvalidParameter);
    PasteConfig p;
    p.region_frac = {0.0, 0.5};
    EXPECT_THROW(p.validate(), InvalidParameter);
    p.region_frac = {0.5, 1.0};
    EXPECT_THROW(p.validate(), InvalidParameter);
}

TEST(SampleMask, ExactAreaForFixedFraction) {
    PasteConfig cfg;
    cfg.region_frac = {0.25, 0.25};
    Rng rng(4);
    const auto m = sample_mask(8, 8, cfg, rng);
    EXPECT_EQ(m.count(), 16u);
    EXPECT_EQ(connected_components(m).size(), 1u);
}

TEST(SampleMask, AreasStayInRangeAndRectangular) {
    PasteConfig cfg;
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const int w = rng.uniform_int(4, 40), h = rng.uniform_int(4, 40);
        const auto m = sample_mask(w, h, cfg, rng);
        const double frac = double(m.count()) / (w * h);
        ASSERT_GE(frac, cfg.region_frac.lo - 1e-12) << w << "x" << h;
        ASSERT_LE(frac, cfg.region_frac.hi + 1e-12) << w << "x" << h;
        const auto comps = connected_components(m);
        ASSERT_EQ(comps.size(), 1u);
        int x0 = w, x1 = 0, y0 = h, y1 = 0;
        for (const auto& p : comps[0].pixels) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
        ASSERT_EQ(std::size_t((x1 - x0 + 1) * (y1 - y0 + 1)), m.count());
    }
    Rng a(6), b(6);
    EXPECT_EQ(sample_mask(32, 32, cfg, a), sample_mask(32, 32, cfg, b));
    EXPECT_THROW(sample_mask(3, 8, cfg, a), InvalidParameter);
}

TEST(CutAndPaste, FormulaLimitsAndOracle) {
    Rng rng(7);
    const auto a = random_image(12, 10, rng), d = random_image(12, 10, rng);
    EXPECT_EQ(cut_and_paste(a, d, BinaryMask(12, 10)), a);
    BinaryMask ones(12, 10);
    for (std::size_t i = 0; i < ones.size(); ++i) ones.set(i, true);
    EXPECT_EQ(cut_and_paste(a, d, ones), d);
    for (int t = 0; t < 50; ++t) {
        const auto m = random_mask(12, 10, 0.5, rng);
        const auto out = cut_and_paste(a, d, m);
        const auto inv = cut_and_paste(a, d, m, true);
        for (std::size_t i = 0; i < out.size(); ++i) {
            ASSERT_EQ(out[i], m[i] ? d[i] : a[i]);
            ASSERT_EQ(inv[i], m[i] ? a[i] : d[i]);
        }
        EXPECT_EQ(cut_and_paste(out, d, m), out);  // idempotent in the mask region
    }
    EXPECT_THROW(cut_and_paste(a, random_image(10, 12, rng), BinaryMask(12, 10)), ShapeMismatch);
    EXPECT_THROW(cut_and_paste(a, d, BinaryMask(10, 10)), ShapeMismatch);
}

TEST(Mosaic, ConstantInputsGiveConstantOutput) {
    std::vector<Sample> four(4, Sample(GrayImage(16, 16, 0.4), BinaryMask(16, 16)));
    Rng rng(8);
    const auto out = mosaic(four, 32, rng);
    EXPECT_EQ(quadrant_stats(out.image).quadrant_discrepancy, 0.0);
    EXPECT_EQ(out.meta.at("lineage"), "mosaic");
}

TEST(Mosaic, CentreSplitPlacesEachInputInItsQuadrant) {
    Rng rng(9);
    auto s = random_samples(4, 32, rng);
    const auto out = mosaic_at(s, 64, 32, 32);
    for (int q = 0; q < 4; ++q) {
        const int ox = (q % 2) * 32, oy = (q / 2) * 32;
        const auto img = resize_bilinear(s[q].image, 32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) ASSERT_EQ(out.image.at(ox + x, oy + y), img.at(x, y));
    }
    EXPECT_EQ(dmlab::testing::mosaic_violations(s, out), 0u);
}

TEST(Mosaic, SplitRangeAndLabelTransport) {
    Rng rng(10);
    for (int t = 0; t < 200; ++t) {
        const auto s = random_samples(4, rng.uniform_int(8, 40), rng);
        const int size = 4 * rng.uniform_int(4, 16);
        const auto out = mosaic(s, size, rng);
        const auto& split = out.meta.at("split");
        const int sx = std::stoi(split.substr(0, split.find(',')));
        const int sy = std::stoi(split.substr(split.find(',') + 1));
        ASSERT_GE(sx, 0.25 * size);
        ASSERT_LE(sx, 0.75 * size);
        ASSERT_GE(sy, 0.25 * size);
        ASSERT_LE(sy, 0.75 * size);
        ASSERT_EQ(dmlab::testing::mosaic_violations(s, out), 0u);
        // Every output target pixel traces back to a source target pixel's transform.
        std::size_t expected = 0;
        const int ws[4] = {sx, size - sx, sx, size - sx}, hs[4] = {sy, sy, size - sy, size - sy};
        for (int q = 0; q < 4; ++q) expected += resize_mask(s[q].mask, ws[q], hs[q]).count();
        ASSERT_EQ(out.mask.count(), expected);
    }
    Rng r(1);
    EXPECT_THROW(mosaic(std::vector<Sample>(3, Sample(GrayImage(8, 8), BinaryMask(8, 8))), 16, r), InvalidParameter);
}

TEST(CutMix, FullRectangleReturnsB) {
    Rng rng(11);
    auto s = random_samples(2, 16, rng);
    BinaryMask all(16, 16);
    for (std::size_t i = 0; i < all.size(); ++i) all.set(i, true);
    const auto out = cutmix_with(s[0], s[1], all);
    EXPECT_EQ(out.image, s[1].image);
    EXPECT_EQ(out.mask, s[1].mask);
}

TEST(CutMix, LabelsFollowThePastedRectangle) {
    Rng rng(12);
    for (int t = 0; t < 200; ++t) {
        auto s = random_samples(2, 24, rng);
        const auto out = cutmix(s[0], s[1], rng);
        ASSERT_EQ(dmlab::testing::cutmix_violations(s[0], s[1], out), 0u);
    }
    auto s = random_samples(2, 8, rng);
    const Sample other(GrayImage(9, 8), BinaryMask(9, 8));
    EXPECT_THROW(cutmix(s[0], other, rng), ShapeMismatch);
}

TEST(Mixup, EndpointsAndUnionLabel) {
    Rng rng(13);
    auto s = random_samples(2, 16, rng);
    EXPECT_EQ(mixup(s[0], s[1], 1.0).image, s[0].image);
    EXPECT_EQ(mixup(s[0], s[1], 0.0).image, s[1].image);
    const auto m = mixup(s[0], s[1], 0.3);
    EXPECT_EQ(dmlab::testing::mixup_violations(s[0], s[1], m), 0u);
    for (std::size_t i = 0; i < m.image.size(); ++i) {
        EXPECT_NEAR(m.image[i], 0.3 * s[0].image[i] + 0.7 * s[1].image[i], 1e-15);
    }
    EXPECT_THROW(mixup(s[0], s[1], 1.5), InvalidParameter);
}

TEST(Stage1, CollapsesToMosaicWithNoOpDegradeAndTinyRegion) {
    Rng rng(14);
    auto s = random_samples(4, 16, rng);
    PasteConfig paste;
    paste.region_frac = {0.2, 0.2};
    Rng a(5), b(5);
    const auto out = diffmosaic_stage1(s, 32, noop_degrade(), paste, a);
    const auto m = mosaic(s, 32, b);
    EXPECT_LT(max_abs_diff(out.image, m.image), 1e-6);
    EXPECT_EQ(out.mask, m.mask);
    EXPECT_EQ(out.meta.at("lineage"), "mosaic,degrade,cut_and_paste");
}

TEST(Stage1, EqualsManualComposition) {
    Rng rng(15);
    auto s = random_samples(4, 16, rng);
    const DegradeConfig deg;
    const PasteConfig paste;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng a(seed), b(seed);
        const auto out = diffmosaic_stage1(s, 32, deg, paste, a);
        const auto m = mosaic(s, 32, b);
        const auto d = degrade(m.image, deg, b);
        const auto region = sample_mask(32, 32, paste, b);
        EXPECT_EQ(out.image, cut_and_paste(m.image, d, region));
        EXPECT_EQ(dmlab::testing::identity_violations(m.mask, out), 0u);
    }
}
