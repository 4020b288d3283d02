#pragma once

#include "dmlab/image.hpp"
#include "dmlab/nn/checkpoint.hpp"
#include "dmlab/nn/layers.hpp"
#include "dmlab/pixel_prior.hpp"
#include "dmlab/synth.hpp"

#include <span>
#include <vector>

namespace dmlab {

struct IouLossConfig {
    double alpha = 1.0;
    /// false: one global numerator/denominator over the batch; true: per-image losses averaged.
    bool per_image = false;

    void validate() const;
};

/// 1 - (sum(p g) + alpha) / (sum(p) + sum(g) - sum(p g) + alpha), differentiable in `pred`.
/// Both tensors are [N, 1, H, W]; `gt` holds 0/1 values.
nn::Tensor soft_iou_loss(const nn::Tensor& pred, const nn::Tensor& gt, const IouLossConfig& cfg = {});

struct DetectorConfig {
    int channels = 16;

    void validate() const;
};

/// Three-scale, depth-two nested grid of residual attention blocks with dense
/// skips, fused by a 1x1 conv over the full-resolution nodes. Input height and
/// width must be multiples of 4.
class DetectorNet {
public:
    DetectorNet(const DetectorConfig& cfg, std::uint64_t seed);
    DetectorNet(const DetectorNet&) = delete;
    DetectorNet& operator=(const DetectorNet&) = delete;
    DetectorNet(DetectorNet&&) = default;
    DetectorNet& operator=(DetectorNet&&) = default;

    /// [N, 1, H, W] -> probabilities [N, 1, H, W].
    nn::Tensor forward(const nn::Tensor& x) const;

    const DetectorConfig& config() const noexcept { return cfg_; }
    nn::ParamSet& params() noexcept { return params_; }
    const nn::ParamSet& params() const noexcept { return params_; }

private:
    struct Block {
        nn::Conv2d conv1;
        nn::Conv2d conv2;
        nn::ChannelAttention ca;
        nn::SpatialAttention sa;
        bool has_proj = false;
        nn::Conv2d proj;

        nn::Tensor operator()(const nn::Tensor& x) const;
    };

    Block make_block(const std::string& name, int in, int out, Rng& rng);

    DetectorConfig cfg_;
    nn::ParamSet params_;
    nn::Conv2d stem_;
    Block x00_, x10_, x20_, x01_, x11_, x02_;
    nn::Conv2d head_;
};

ScoreMap det_forward(const DetectorNet& net, const GrayImage& img);
/// Pixels with probability above `threshold`.
BinaryMask det_predict(const DetectorNet& net, const GrayImage& img, double threshold = 0.5);

struct DetectorTrainConfig {
    int epochs = 30;
    double lr = 1e-3;
    int batch = 4;
    IouLossConfig loss;

    void validate() const;
};

TrainLog det_train(DetectorNet& net, std::span<const Sample> samples, const DetectorTrainConfig& cfg, Rng& rng,
                   nn::Adam* opt = nullptr);

nn::Checkpoint det_checkpoint(const DetectorNet& net, const nn::Adam* opt = nullptr);
DetectorNet det_from_checkpoint(const nn::Checkpoint& ckpt);

}  // namespace dmlab
