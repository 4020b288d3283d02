#include "dmlab/nn/convert.hpp"

#include "dmlab/errors.hpp"

namespace dmlab::nn {

Tensor images_to_tensor(std::span<const GrayImage> images) {
    if (images.empty()) throw InvalidParameter("images_to_tensor: empty batch");
    const int w = images[0].width();
    const int h = images[0].height();
    std::vector<double> v;
    v.reserve(images.size() * images[0].size());
    for (const auto& img : images) {
        if (img.width() != w || img.height() != h) throw ShapeMismatch("images_to_tensor: mixed image sizes");
        v.insert(v.end(), img.pixels().begin(), img.pixels().end());
    }
    return Tensor::from_values({static_cast<int>(images.size()), 1, h, w}, std::move(v));
}

Tensor masks_to_tensor(std::span<const BinaryMask> masks) {
    if (masks.empty()) throw InvalidParameter("masks_to_tensor: empty batch");
    const int w = masks[0].width();
    const int h = masks[0].height();
    std::vector<double> v;
    v.reserve(masks.size() * masks[0].size());
    for (const auto& m : masks) {
        if (m.width() != w || m.height() != h) throw ShapeMismatch("masks_to_tensor: mixed mask sizes");
        for (auto b : m.bits()) v.push_back(b ? 1.0 : 0.0);
    }
    return Tensor::from_values({static_cast<int>(masks.size()), 1, h, w}, std::move(v));
}

namespace {

std::vector<double> plane(const Tensor& t, int n) {
    if (t.rank() != 4 || n < 0 || n >= t.dim(0)) throw ShapeMismatch("expected an [N, C, H, W] tensor");
    const std::size_t sz = static_cast<std::size_t>(t.dim(2)) * t.dim(3);
    const auto* p = t.values().data() + static_cast<std::size_t>(n) * t.dim(1) * sz;
    return {p, p + sz};
}

}  // namespace

GrayImage tensor_to_image(const Tensor& t, int n) { return GrayImage(t.dim(3), t.dim(2), plane(t, n)); }

ScoreMap tensor_to_scores(const Tensor& t, int n) { return {t.dim(3), t.dim(2), plane(t, n)}; }

}  // namespace dmlab::nn
