#pragma once

#include "dmlab/augment.hpp"
#include "dmlab/image.hpp"
#include "dmlab/nn/checkpoint.hpp"
#include "dmlab/nn/layers.hpp"
#include "dmlab/synth.hpp"

#include <span>
#include <vector>

namespace dmlab {

struct PixelPriorConfig {
    int channels = 32;
    int blocks = 4;

    void validate() const;
};

/// Shallow conv, residual conv blocks, shallow + deep fusion, and a conv head
/// added onto the input. The head starts at zero, so a fresh net is the identity.
class PixelPriorNet {
public:
    PixelPriorNet(const PixelPriorConfig& cfg, std::uint64_t seed);
    // Layers alias tensors in params_, so a memberwise copy would share weights.
    PixelPriorNet(const PixelPriorNet&) = delete;
    PixelPriorNet& operator=(const PixelPriorNet&) = delete;
    PixelPriorNet(PixelPriorNet&&) = default;
    PixelPriorNet& operator=(PixelPriorNet&&) = default;

    /// [N, 1, H, W] -> [N, 1, H, W], unclamped.
    nn::Tensor forward(const nn::Tensor& x) const;

    const PixelPriorConfig& config() const noexcept { return cfg_; }
    nn::ParamSet& params() noexcept { return params_; }
    const nn::ParamSet& params() const noexcept { return params_; }

private:
    struct Block {
        nn::Conv2d a;
        nn::Conv2d b;
    };

    PixelPriorConfig cfg_;
    nn::ParamSet params_;
    nn::Conv2d shallow_;
    std::vector<Block> blocks_;
    nn::Conv2d head_;
};

/// Output clamped to [0, 1].
GrayImage pp_forward(const PixelPriorNet& net, const GrayImage& img);

struct PixelPriorTrainConfig {
    int epochs = 20;
    double lr = 1e-3;
    int batch = 4;
    /// Degraded/pasted inputs drawn per training image, fixed for the whole run.
    int variants = 4;

    void validate() const;
};

struct TrainLog {
    std::vector<double> epoch_loss;
};

/// Minimizes mse(net(mix), original) where mix = cut_and_paste(original, degrade(original), region).
/// Uses `opt` when given (so its state can be saved), otherwise a fresh Adam at train_cfg.lr.
TrainLog pp_train(PixelPriorNet& net, std::span<const Sample> samples, const DegradeConfig& degrade_cfg,
                  const PasteConfig& paste_cfg, const PixelPriorTrainConfig& train_cfg, Rng& rng,
                  nn::Adam* opt = nullptr);

/// Degrade + cut-and-paste on a mosaic, then the network. The mask is carried over untouched.
Sample harmonize(const PixelPriorNet& net, const Sample& mosaic_sample, const DegradeConfig& degrade_cfg,
                 const PasteConfig& paste_cfg, Rng& rng);

nn::Checkpoint pp_checkpoint(const PixelPriorNet& net, const nn::Adam* opt = nullptr);
PixelPriorNet pp_from_checkpoint(const nn::Checkpoint& ckpt);

}  // namespace dmlab
