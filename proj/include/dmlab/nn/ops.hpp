#pragma once

#include "dmlab/nn/tensor.hpp"

#include <vector>

namespace dmlab::nn {

/// Channel-attention hidden width is channels / kAttentionReduction.
inline constexpr int kAttentionReduction = 4;

// Image tensors are NCHW. Weights for conv2d are [F, C, k, k], bias [F].

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 1, int pad = 0);
/// x [N, in], weight [out, in], bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Non-overlapping k x k windows; trailing rows/columns that do not fill a window are dropped.
Tensor avgpool2d(const Tensor& x, int k);
Tensor maxpool2d(const Tensor& x, int k);
Tensor upsample_nearest(const Tensor& x, int factor);

/// Elementwise; `b` may have size-1 dimensions that broadcast against `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);

/// [N, C, H, W] -> [N, C, 1, 1]
Tensor global_avg_pool(const Tensor& x);
/// [N, C, H, W] -> [N, 1, H, W]
Tensor channel_mean(const Tensor& x);
Tensor channel_max(const Tensor& x);

/// x * sigmoid(MLP(GAP(x))) with a ReLU bottleneck of width C / reduction.
Tensor channel_attention(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                         const Tensor& b2, int reduction = kAttentionReduction);
/// x * sigmoid(conv7x7([mean_c(x), max_c(x)])).
Tensor spatial_attention(const Tensor& x, const Tensor& weight, const Tensor& bias);

}  // namespace dmlab::nn
