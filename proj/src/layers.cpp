#include "dmlab/nn/layers.hpp"

#include "dmlab/errors.hpp"

#include <cmath>

namespace dmlab::nn {

Tensor ParamSet::add(const std::string& name, Tensor t) {
    if (name.empty()) throw InvalidParameter("parameter name must not be empty");
    if (find(name)) throw InvalidParameter("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    params_.push_back({name, t});
    return t;
}

const Param* ParamSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

void ParamSet::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

Tensor he_normal(const Shape& shape, Rng& rng, double gain) {
    if (shape.empty()) throw InvalidParameter("he_normal: empty shape");
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= static_cast<std::size_t>(shape[i]);
    const double sd = gain / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = rng.normal(0.0, sd);
    return Tensor::from_values(shape, std::move(v));
}

Conv2d Conv2d::create(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int k, Rng& rng,
                      double gain) {
    if (in_ch < 1 || out_ch < 1 || k < 1) throw InvalidParameter("conv2d layer: sizes must be positive");
    Conv2d c;
    c.weight = ps.add(name + ".weight", he_normal({out_ch, in_ch, k, k}, rng, gain));
    c.bias = ps.add(name + ".bias", Tensor::zeros({out_ch}));
    c.pad = k / 2;
    return c;
}

Linear Linear::create(ParamSet& ps, const std::string& name, int in, int out, Rng& rng, double gain) {
    if (in < 1 || out < 1) throw InvalidParameter("linear layer: sizes must be positive");
    Linear l;
    l.weight = ps.add(name + ".weight", he_normal({out, in}, rng, gain));
    l.bias = ps.add(name + ".bias", Tensor::zeros({out}));
    return l;
}

ChannelAttention ChannelAttention::create(ParamSet& ps, const std::string& name, int channels, Rng& rng,
                                          int reduction) {
    if (reduction < 1 || channels < reduction) {
        throw InvalidParameter("channel attention needs at least " + std::to_string(reduction) +
                               " channels, got " + std::to_string(channels));
    }
    const int hidden = channels / reduction;
    ChannelAttention a;
    a.reduction = reduction;
    a.squeeze = Linear::create(ps, name + ".squeeze", channels, hidden, rng);
    a.excite = Linear::create(ps, name + ".excite", hidden, channels, rng, 1.0);
    return a;
}

SpatialAttention SpatialAttention::create(ParamSet& ps, const std::string& name, Rng& rng, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) throw InvalidParameter("spatial attention kernel must be odd");
    SpatialAttention s;
    s.conv = Conv2d::create(ps, name + ".conv", 2, 1, kernel, rng, 1.0);
    return s;
}

}  // namespace dmlab::nn
