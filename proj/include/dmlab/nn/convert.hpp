#pragma once

#include "dmlab/image.hpp"
#include "dmlab/nn/tensor.hpp"

#include <span>
#include <vector>

namespace dmlab::nn {

/// Stacks equally sized images into an [N, 1, H, W] tensor.
Tensor images_to_tensor(std::span<const GrayImage> images);
Tensor masks_to_tensor(std::span<const BinaryMask> masks);

/// Channel 0 of batch entry `n` as an image (values clamped into [0, 1]).
GrayImage tensor_to_image(const Tensor& t, int n = 0);
/// Channel 0 of batch entry `n` as an unclamped score map.
ScoreMap tensor_to_scores(const Tensor& t, int n = 0);

}  // namespace dmlab::nn
