#include "dmlab/detector.hpp"

#include "dmlab/errors.hpp"
#include "dmlab/nn/convert.hpp"
#include "dmlab/nn/ops.hpp"
#include "dmlab/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dmlab {

void IouLossConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidParameter("soft IoU: alpha must be positive");
}

nn::Tensor soft_iou_loss(const nn::Tensor& pred, const nn::Tensor& gt, const IouLossConfig& cfg) {
    cfg.validate();
    if (pred.shape() != gt.shape()) {
        throw ShapeMismatch("soft IoU: prediction " + nn::shape_str(pred.shape()) + " vs label " +
                            nn::shape_str(gt.shape()));
    }
    if (pred.rank() != 4 || pred.numel() == 0) throw ShapeMismatch("soft IoU: expected non-empty [N, 1, H, W]");
    const int groups = cfg.per_image ? pred.dim(0) : 1;
    const std::size_t len = pred.numel() / static_cast<std::size_t>(groups);
    const auto p = pred.values();
    const auto g = gt.values();
    // Per group: I = sum p g, S = sum p + sum g - I.
    std::vector<double> inter(static_cast<std::size_t>(groups), 0.0);
    std::vector<double> uni(static_cast<std::size_t>(groups), 0.0);
    for (int k = 0; k < groups; ++k) {
        double i_sum = 0.0;
        double p_sum = 0.0;
        double g_sum = 0.0;
        for (std::size_t j = k * len; j < (k + 1) * len; ++j) {
            i_sum += p[j] * g[j];
            p_sum += p[j];
            g_sum += g[j];
        }
        inter[static_cast<std::size_t>(k)] = i_sum;
        uni[static_cast<std::size_t>(k)] = p_sum + g_sum - i_sum;
    }
    const double alpha = cfg.alpha;
    double loss = 0.0;
    for (int k = 0; k < groups; ++k) {
        loss += 1.0 - (inter[static_cast<std::size_t>(k)] + alpha) / (uni[static_cast<std::size_t>(k)] + alpha);
    }
    loss /= groups;
    return nn::make_result({1}, {loss}, {pred, gt}, [inter, uni, alpha, groups, len](nn::Node& self) {
        nn::Node& in = *self.inputs[0];
        if (!in.requires_grad) return;
        in.ensure_grad();
        const auto& gv = self.inputs[1]->value;
        const double up = self.grad[0] / groups;
        for (int k = 0; k < groups; ++k) {
            const double num = inter[static_cast<std::size_t>(k)] + alpha;
            const double den = uni[static_cast<std::size_t>(k)] + alpha;
            const double inv = 1.0 / (den * den);
            for (std::size_t j = k * len; j < (k + 1) * len; ++j) {
                in.grad[j] -= up * (gv[j] * den - num * (1.0 - gv[j])) * inv;
            }
        }
    });
}

void DetectorConfig::validate() const {
    if (channels < 1) throw InvalidParameter("detector: channels must be >= 1");
}

nn::Tensor DetectorNet::Block::operator()(const nn::Tensor& x) const {
    auto y = conv2(nn::relu(conv1(x)));
    y = sa(ca(y));
    return nn::relu(nn::add(y, has_proj ? proj(x) : x));
}

DetectorNet::Block DetectorNet::make_block(const std::string& name, int in, int out, Rng& rng) {
    Block b;
    b.conv1 = nn::Conv2d::create(params_, name + ".conv1", in, out, 3, rng);
    b.conv2 = nn::Conv2d::create(params_, name + ".conv2", out, out, 3, rng);
    // Narrow widths (tiny test nets) shrink the bottleneck instead of failing.
    b.ca = nn::ChannelAttention::create(params_, name + ".ca", out, rng, std::min(nn::kAttentionReduction, out));
    b.sa = nn::SpatialAttention::create(params_, name + ".sa", rng);
    if (in != out) {
        b.has_proj = true;
        b.proj = nn::Conv2d::create(params_, name + ".proj", in, out, 1, rng, 1.0);
    }
    return b;
}

DetectorNet::DetectorNet(const DetectorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int c = cfg_.channels;
    stem_ = nn::Conv2d::create(params_, "stem", 1, c, 3, rng);
    x00_ = make_block("x00", c, c, rng);
    x10_ = make_block("x10", c, 2 * c, rng);
    x20_ = make_block("x20", 2 * c, 4 * c, rng);
    x01_ = make_block("x01", c + 2 * c, c, rng);
    x11_ = make_block("x11", 2 * c + c + 4 * c, 2 * c, rng);
    x02_ = make_block("x02", c + c + 2 * c, c, rng);
    head_ = nn::Conv2d::create(params_, "head", 3 * c, 1, 1, rng, 1.0);
    // Start from a low foreground prior; targets cover a tiny fraction of each image.
    head_.bias.mutable_values()[0] = -3.0;
}

nn::Tensor DetectorNet::forward(const nn::Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != 1) throw ShapeMismatch("detector expects [N, 1, H, W] input");
    if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0) throw ShapeMismatch("detector input sides must be multiples of 4");
    const auto s = stem_(x);
    const auto x00 = x00_(s);
    const auto x10 = x10_(nn::avgpool2d(x00, 2));
    const auto x20 = x20_(nn::avgpool2d(x10, 2));
    const auto x01 = x01_(nn::concat_channels({x00, nn::upsample_nearest(x10, 2)}));
    const auto x11 = x11_(nn::concat_channels({x10, nn::avgpool2d(x01, 2), nn::upsample_nearest(x20, 2)}));
    const auto x02 = x02_(nn::concat_channels({x00, x01, nn::upsample_nearest(x11, 2)}));
    return nn::sigmoid(head_(nn::concat_channels({x00, x01, x02})));
}

ScoreMap det_forward(const DetectorNet& net, const GrayImage& img) {
    nn::NoGradGuard guard;
    const auto out = net.forward(nn::images_to_tensor(std::span<const GrayImage>(&img, 1)));
    for (double v : out.values())
        if (!std::isfinite(v)) throw NumericFailure("detector", "non-finite network output");
    return nn::tensor_to_scores(out);
}

BinaryMask det_predict(const DetectorNet& net, const GrayImage& img, double threshold) {
    const auto p = det_forward(net, img);
    BinaryMask m(p.width, p.height);
    for (std::size_t i = 0; i < p.values.size(); ++i) m.set(i, p.values[i] > threshold);
    return m;
}

void DetectorTrainConfig::validate() const {
    if (epochs < 0 || batch < 1) throw InvalidParameter("detector training: epochs >= 0 and batch >= 1 required");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("detector training: lr must be >= 0");
    loss.validate();
}

TrainLog det_train(DetectorNet& net, std::span<const Sample> samples, const DetectorTrainConfig& cfg, Rng& rng,
                   nn::Adam* opt) {
    if (samples.empty()) throw InvalidParameter("detector training: empty dataset");
    cfg.validate();
    nn::Adam local({cfg.lr});
    nn::Adam& adam = opt ? *opt : local;
    auto& params = net.params().params();
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    const auto b = static_cast<std::size_t>(cfg.batch);
    TrainLog log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += b) {
            std::vector<GrayImage> xb;
            std::vector<BinaryMask> yb;
            for (std::size_t i = start; i < std::min(order.size(), start + b); ++i) {
                xb.push_back(samples[order[i]].image);
                yb.push_back(samples[order[i]].mask);
            }
            net.params().zero_grad();
            const auto loss = soft_iou_loss(net.forward(nn::images_to_tensor(xb)), nn::masks_to_tensor(yb), cfg.loss);
            if (!std::isfinite(loss.item())) throw NumericFailure("train-detector", "non-finite loss");
            loss.backward();
            if (!nn::grads_finite(params)) throw NumericFailure("train-detector", "non-finite gradient");
            adam.step(params);
            total += loss.item();
            ++batches;
        }
        log.epoch_loss.push_back(total / static_cast<double>(batches));
    }
    return log;
}

nn::Checkpoint det_checkpoint(const DetectorNet& net, const nn::Adam* opt) {
    return nn::snapshot(net.params(), opt, {{"model", "detector"}, {"channels", net.config().channels}});
}

DetectorNet det_from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.meta.value("model", "") != "detector") throw InvalidParameter("checkpoint is not a detector");
    DetectorNet net({ckpt.meta.at("channels").get<int>()}, 0);
    nn::load_params(net.params(), ckpt);
    return net;
}

}  // namespace dmlab
