#pragma once

#include "dmlab/nn/ops.hpp"
#include "dmlab/nn/tensor.hpp"
#include "dmlab/rng.hpp"

#include <string>
#include <vector>

namespace dmlab::nn {

struct Param {
    std::string name;
    Tensor tensor;
};

/// Ordered, uniquely named collection of trainable tensors.
class ParamSet {
public:
    /// Registers `t` (marked requires_grad) and returns a handle aliasing it.
    Tensor add(const std::string& name, Tensor t);

    std::vector<Param>& params() noexcept { return params_; }
    const std::vector<Param>& params() const noexcept { return params_; }
    const Param* find(const std::string& name) const;

    std::size_t scalar_count() const;
    void zero_grad();

private:
    std::vector<Param> params_;
};

/// He-normal weight of the given shape, fan-in taken from all but the first dimension.
Tensor he_normal(const Shape& shape, Rng& rng, double gain = 1.4142135623730951);

struct Conv2d {
    Tensor weight;
    Tensor bias;
    int stride = 1;
    int pad = 0;

    /// "same" padding for odd k when stride is 1.
    static Conv2d create(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int k, Rng& rng,
                         double gain = 1.4142135623730951);
    Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }
};

struct Linear {
    Tensor weight;
    Tensor bias;

    static Linear create(ParamSet& ps, const std::string& name, int in, int out, Rng& rng,
                         double gain = 1.4142135623730951);
    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

struct ChannelAttention {
    Linear squeeze;
    Linear excite;
    int reduction = kAttentionReduction;

    static ChannelAttention create(ParamSet& ps, const std::string& name, int channels, Rng& rng,
                                   int reduction = kAttentionReduction);
    Tensor operator()(const Tensor& x) const {
        return channel_attention(x, squeeze.weight, squeeze.bias, excite.weight, excite.bias, reduction);
    }
};

struct SpatialAttention {
    Conv2d conv;

    static SpatialAttention create(ParamSet& ps, const std::string& name, Rng& rng, int kernel = 7);
    Tensor operator()(const Tensor& x) const { return spatial_attention(x, conv.weight, conv.bias); }
};

}  // namespace dmlab::nn
