#include "dmlab/dataset.hpp"
#include "dmlab/detector.hpp"
#include "dmlab/errors.hpp"
#include "dmlab/nn/convert.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace dmlab;
using dmlab::testing::gradcheck;

namespace {

nn::Tensor mask_tensor(int n, int h, int w, int on, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n) * h * w, 0.0);
    for (int i = 0; i < on; ++i) v[static_cast<std::size_t>(rng.uniform_int(0, int(v.size()) - 1))] = 1.0;
    return nn::Tensor::from_values({n, 1, h, w}, std::move(v));
}

}  // namespace

TEST(SoftIouLoss, SpotValues) {
    std::vector<double> g(64, 0.0);
    for (int i = 0; i < 10; ++i) g[static_cast<std::size_t>(i * 6)] = 1.0;
    const auto gt = nn::Tensor::from_values({1, 1, 8, 8}, g);
    EXPECT_EQ(soft_iou_loss(gt, gt).item(), 0.0);
    EXPECT_NEAR(soft_iou_loss(nn::Tensor::zeros({1, 1, 8, 8}), gt).item(), 10.0 / 11.0, 1e-12);
    EXPECT_THROW(soft_iou_loss(gt, nn::Tensor::zeros({1, 1, 8, 7})), ShapeMismatch);
    EXPECT_THROW(IouLossConfig{0.0}.validate(), InvalidParameter);
}

TEST(SoftIouLoss, PerImageAveragesImageLosses) {
    Rng rng(1);
    const auto p = dmlab::testing::random_tensor({2, 1, 4, 4}, rng, 0.0, 1.0);
    const auto g = mask_tensor(2, 4, 4, 5, rng);
    IouLossConfig cfg{1.0, true};
    double want = 0.0;
    for (int k = 0; k < 2; ++k) {
        const std::vector<double> pv(p.values().begin() + k * 16, p.values().begin() + (k + 1) * 16);
        const std::vector<double> gv(g.values().begin() + k * 16, g.values().begin() + (k + 1) * 16);
        want += soft_iou_loss(nn::Tensor::from_values({1, 1, 4, 4}, pv), nn::Tensor::from_values({1, 1, 4, 4}, gv)).item();
    }
    EXPECT_NEAR(soft_iou_loss(p, g, cfg).item(), want / 2.0, 1e-15);
}

TEST(SoftIouLoss, GradientMatchesFiniteDifferences) {
    Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const int n = rng.uniform_int(1, 3);
        const auto g = mask_tensor(n, 5, 6, rng.uniform_int(0, 12), rng);
        const auto p = dmlab::testing::random_tensor({n, 1, 5, 6}, rng, 0.0, 1.0);
        const IouLossConfig cfg{rng.uniform(0.5, 2.0), i % 2 == 1};
        const auto r = gradcheck([&](const std::vector<nn::Tensor>& in) { return soft_iou_loss(in[0], g, cfg); }, {p},
                                 rng);
        EXPECT_LT(r.max_rel_error, 1e-4) << "instance " << i;
    }
}

TEST(DetectorNet, ProbabilitiesAndShape) {
    DetectorNet net({4}, 3);
    Rng rng(4);
    const std::vector<GrayImage> imgs{dmlab::testing::random_image(16, 16, rng), dmlab::testing::random_image(16, 16, rng)};
    const auto out = net.forward(nn::images_to_tensor(imgs));
    EXPECT_EQ(out.shape(), (nn::Shape{2, 1, 16, 16}));
    for (double v : out.values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    EXPECT_THROW(net.forward(nn::Tensor::zeros({1, 1, 10, 16})), ShapeMismatch);
    EXPECT_THROW(DetectorNet({0}, 1), InvalidParameter);
}

TEST(DetectorNet, GradientsReachEveryParameter) {
    // Wide enough that every attention bottleneck has several hidden units; a
    // single unit can start dead behind its relu.
    DetectorNet net({16}, 5);
    Rng rng(6);
    std::vector<GrayImage> imgs;
    for (int i = 0; i < 4; ++i) imgs.push_back(dmlab::testing::random_image(8, 8, rng));
    const auto gt = mask_tensor(4, 8, 8, 12, rng);
    soft_iou_loss(net.forward(nn::images_to_tensor(imgs)), gt).backward();
    for (const auto& p : net.params().params()) {
        double mag = 0.0;
        for (double v : p.tensor.grad()) mag += std::abs(v);
        EXPECT_GT(mag, 0.0) << p.name;
    }
}

TEST(DetectorTrain, OverfitsAFewEasySamples) {
    DatasetConfig cfg;
    cfg.scene.size = 32;
    cfg.scene.target_kind = TargetKind::GaussianBlob;
    cfg.scene.scr_min = 6.0;
    cfg.scene.scr_max = 8.0;
    cfg.min_targets = 1;
    cfg.max_targets = 2;
    const auto data = make_dataset(8, cfg, 7).samples;
    DetectorNet net({4}, 8);
    DetectorTrainConfig tc;
    tc.epochs = 150;
    tc.lr = 5e-3;
    tc.batch = 4;
    Rng rng(9);
    const auto log = det_train(net, data, tc, rng);
    EXPECT_LT(log.epoch_loss.back(), 0.2) << log.epoch_loss.front() << " -> " << log.epoch_loss.back();
}

TEST(DetectorTrain, SameSeedSameCheckpoint) {
    DatasetConfig cfg;
    cfg.scene.size = 16;
    const auto data = make_dataset(4, cfg, 10).samples;
    DetectorTrainConfig tc;
    tc.epochs = 2;
    DetectorNet a({2}, 11), b({2}, 11);
    Rng ra(12), rb(12);
    det_train(a, data, tc, ra);
    det_train(b, data, tc, rb);
    const auto ca = det_checkpoint(a), cb = det_checkpoint(b);
    ASSERT_EQ(ca.arrays.size(), cb.arrays.size());
    for (std::size_t i = 0; i < ca.arrays.size(); ++i) EXPECT_EQ(ca.arrays[i].values, cb.arrays[i].values);

    const auto dir = dmlab::testing::scratch_dir("det_ckpt");
    nn::write_checkpoint(dir / "det.ckpt", ca);
    const auto back = det_from_checkpoint(nn::read_checkpoint(dir / "det.ckpt"));
    EXPECT_EQ(det_forward(back, data[0].image).values, det_forward(a, data[0].image).values);
    EXPECT_EQ(det_predict(back, data[1].image), det_predict(a, data[1].image));
    EXPECT_THROW(det_train(a, std::vector<Sample>{}, tc, ra), InvalidParameter);
}
