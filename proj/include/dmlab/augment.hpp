#pragma once

#include "dmlab/image.hpp"
#include "dmlab/rng.hpp"
#include "dmlab/synth.hpp"

#include <array>
#include <span>
#include <utility>

namespace dmlab {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double draw(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

/// Blur -> resize round trip -> noise, repeated `orders` times.
struct DegradeConfig {
    int orders = 2;
    Range blur_sigma{0.2, 2.0};
    Range resize_scale{0.5, 1.5};
    Range noise_sigma{0.0, 0.05};

    void validate() const;
};

/// Selection region for cut-and-paste. Only axis-aligned rectangles are supported.
struct PasteConfig {
    Range region_frac{0.2, 0.6};
    /// false: degraded content fills the selected region (literal blend formula).
    /// true: original content fills the region and the degraded image surrounds it.
    bool invert_convention = false;

    void validate() const;
};

GrayImage degrade(const GrayImage& img, const DegradeConfig& cfg, Rng& rng);

BinaryMask rectangle_mask(int width, int height, int x0, int y0, int rect_w, int rect_h);
BinaryMask sample_mask(int width, int height, const PasteConfig& cfg, Rng& rng);

/// out = (1 - m) * orig + m * degraded, per pixel (swapped when invert is set).
GrayImage cut_and_paste(const GrayImage& orig, const GrayImage& degraded, const BinaryMask& m,
                        bool invert_convention = false);

/// Four-way composition with the split at (split_x, split_y); quadrant order is
/// top-left, top-right, bottom-left, bottom-right.
Sample mosaic_at(std::span<const Sample> samples, int out_size, int split_x, int split_y);
/// Split point drawn uniformly with both coordinates in [0.25, 0.75] * out_size.
Sample mosaic(std::span<const Sample> samples, int out_size, Rng& rng);

/// b's pixels and labels inside `region`, a's elsewhere.
Sample cutmix_with(const Sample& a, const Sample& b, const BinaryMask& region);
/// Region is a rectangle covering a uniformly drawn fraction of the image.
Sample cutmix(const Sample& a, const Sample& b, Rng& rng);
/// Convex blend lambda * a + (1 - lambda) * b; label is the union of both masks.
Sample mixup(const Sample& a, const Sample& b, double lambda);

/// Degrade + cut-and-paste applied to an already composed mosaic.
Sample mix_stage(const Sample& mosaic_sample, const DegradeConfig& degrade_cfg,
                 const PasteConfig& paste_cfg, Rng& rng);

/// Mosaic, then degrade, then cut-and-paste. The mask comes from the mosaic step.
Sample diffmosaic_stage1(std::span<const Sample> samples, int out_size,
                         const DegradeConfig& degrade_cfg, const PasteConfig& paste_cfg, Rng& rng);

/// Appends `step` to the comma-separated meta["lineage"].
void append_lineage(Sample& sample, const std::string& step);

}  // namespace dmlab
