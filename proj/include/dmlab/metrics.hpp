#pragma once

#include "dmlab/image.hpp"

#include <cstddef>
#include <span>

namespace dmlab {

struct IouCounts {
    double iou = 1.0;
    std::size_t inter = 0;
    std::size_t uni = 0;
};

struct PdFaCounts {
    std::size_t correct = 0;      // ground-truth targets matched
    std::size_t targets = 0;      // ground-truth targets
    std::size_t false_pixels = 0; // pixels of unmatched predicted components
    std::size_t pixels = 0;       // all pixels in the image
};

struct MetricSet {
    double iou = 1.0;
    double pd = 1.0;
    double fa = 0.0;
    std::size_t inter = 0;
    std::size_t uni = 0;
    std::size_t correct = 0;
    std::size_t targets = 0;
    std::size_t false_pixels = 0;
    std::size_t pixels = 0;
    std::size_t images = 0;
};

inline constexpr double kDefaultMatchDistance = 3.0;

/// Both masks empty gives iou 1.
IouCounts pixel_iou(const BinaryMask& pred, const BinaryMask& gt);

/// Greedy one-to-one centroid matching, nearest pair first; ties go to the
/// lower ground-truth index, then the lower prediction index.
PdFaCounts pd_fa(const BinaryMask& pred, const BinaryMask& gt, double match_dist = kDefaultMatchDistance);

/// Counts are summed over the set and ratios formed once (micro average).
/// With `macro`, iou/pd/fa are instead per-image ratios averaged over images.
/// A set without ground-truth targets has pd 1.
MetricSet evaluate_set(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts,
                       double match_dist = kDefaultMatchDistance, bool macro = false);

}  // namespace dmlab
