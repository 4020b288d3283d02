#include "dmlab/pixel_prior.hpp"

#include "dmlab/errors.hpp"
#include "dmlab/nn/convert.hpp"
#include "dmlab/nn/ops.hpp"
#include "dmlab/nn/optim.hpp"

#include <cmath>
#include <numeric>

namespace dmlab {

void PixelPriorConfig::validate() const {
    if (channels < 1 || blocks < 0) throw InvalidParameter("pixel prior: channels >= 1 and blocks >= 0 required");
}

void PixelPriorTrainConfig::validate() const {
    if (epochs < 0 || batch < 1 || variants < 1) {
        throw InvalidParameter("pixel prior training: epochs >= 0, batch >= 1, variants >= 1 required");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("pixel prior training: lr must be >= 0");
}

PixelPriorNet::PixelPriorNet(const PixelPriorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int c = cfg_.channels;
    shallow_ = nn::Conv2d::create(params_, "shallow", 1, c, 3, rng);
    for (int i = 0; i < cfg_.blocks; ++i) {
        const auto name = "block" + std::to_string(i);
        // Second conv of each block is scaled down so the residual branch starts small.
        blocks_.push_back({nn::Conv2d::create(params_, name + ".a", c, c, 3, rng),
                           nn::Conv2d::create(params_, name + ".b", c, c, 3, rng, 0.1)});
    }
    head_ = nn::Conv2d::create(params_, "head", c, 1, 3, rng);
    std::fill(head_.weight.mutable_values().begin(), head_.weight.mutable_values().end(), 0.0);
}

nn::Tensor PixelPriorNet::forward(const nn::Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != 1) throw ShapeMismatch("pixel prior expects [N, 1, H, W] input");
    const auto shallow = shallow_(x);
    auto deep = shallow;
    for (const auto& b : blocks_) deep = nn::add(deep, b.b(nn::relu(b.a(deep))));
    const auto fused = nn::add(shallow, deep);
    return nn::add(x, head_(fused));
}

GrayImage pp_forward(const PixelPriorNet& net, const GrayImage& img) {
    nn::NoGradGuard guard;
    const auto out = net.forward(nn::images_to_tensor(std::span<const GrayImage>(&img, 1)));
    for (double v : out.values())
        if (!std::isfinite(v)) throw NumericFailure("pixel-prior", "non-finite network output");
    return nn::tensor_to_image(out);
}

TrainLog pp_train(PixelPriorNet& net, std::span<const Sample> samples, const DegradeConfig& degrade_cfg,
                  const PasteConfig& paste_cfg, const PixelPriorTrainConfig& train_cfg, Rng& rng, nn::Adam* opt) {
    if (samples.empty()) throw InvalidParameter("pixel prior training: empty dataset");
    train_cfg.validate();
    degrade_cfg.validate();
    paste_cfg.validate();

    std::vector<GrayImage> inputs;
    std::vector<GrayImage> targets;
    for (int v = 0; v < train_cfg.variants; ++v) {
        for (const auto& s : samples) {
            const auto& img = s.image;
            const auto degraded = degrade(img, degrade_cfg, rng);
            const auto region = sample_mask(img.width(), img.height(), paste_cfg, rng);
            inputs.push_back(cut_and_paste(img, degraded, region, paste_cfg.invert_convention));
            targets.push_back(img);
        }
    }

    nn::Adam local({train_cfg.lr});
    nn::Adam& adam = opt ? *opt : local;
    auto& params = net.params().params();
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    const auto b = static_cast<std::size_t>(train_cfg.batch);

    TrainLog log;
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double sq_sum = 0.0;
        double count = 0.0;
        for (std::size_t start = 0; start < order.size(); start += b) {
            std::vector<GrayImage> xb;
            std::vector<GrayImage> yb;
            for (std::size_t i = start; i < std::min(order.size(), start + b); ++i) {
                xb.push_back(inputs[order[i]]);
                yb.push_back(targets[order[i]]);
            }
            net.params().zero_grad();
            const auto target = nn::images_to_tensor(yb);
            const auto loss = nn::mse(net.forward(nn::images_to_tensor(xb)), target);
            if (!std::isfinite(loss.item())) throw NumericFailure("train-pixel-prior", "non-finite loss");
            loss.backward();
            if (!nn::grads_finite(params)) throw NumericFailure("train-pixel-prior", "non-finite gradient");
            adam.step(params);
            const auto n = static_cast<double>(target.numel());
            sq_sum += loss.item() * n;
            count += n;
        }
        log.epoch_loss.push_back(sq_sum / count);
    }
    return log;
}

Sample harmonize(const PixelPriorNet& net, const Sample& mosaic_sample, const DegradeConfig& degrade_cfg,
                 const PasteConfig& paste_cfg, Rng& rng) {
    const auto mixed = mix_stage(mosaic_sample, degrade_cfg, paste_cfg, rng);
    Sample out(pp_forward(net, mixed.image), mixed.mask, mixed.meta);
    append_lineage(out, "pixel_prior");
    return out;
}

nn::Checkpoint pp_checkpoint(const PixelPriorNet& net, const nn::Adam* opt) {
    return nn::snapshot(net.params(), opt,
                        {{"model", "pixel_prior"},
                         {"channels", net.config().channels},
                         {"blocks", net.config().blocks}});
}

PixelPriorNet pp_from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.meta.value("model", "") != "pixel_prior") throw InvalidParameter("checkpoint is not a pixel prior");
    PixelPriorConfig cfg{ckpt.meta.at("channels").get<int>(), ckpt.meta.at("blocks").get<int>()};
    PixelPriorNet net(cfg, 0);
    nn::load_params(net.params(), ckpt);
    return net;
}

}  // namespace dmlab
