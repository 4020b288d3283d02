#pragma once

// Independent checks of how each augmentation path must treat labels.
// Every function returns the number of violating pixels (0 when the contract holds).

#include "dmlab/augment.hpp"
#include "dmlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <string>

namespace dmlab::testing {

/// Corner-aligned bilinear sample of a mask indicator at output pixel (x, y),
/// thresholded at 0.5. Returns -1 when the sample sits on the threshold to
/// within rounding, where either bit is acceptable.
inline int resized_bit(const BinaryMask& m, int nw, int nh, int x, int y) {
    const double fx = nw > 1 ? x * double(m.width() - 1) / (nw - 1) : (m.width() - 1) / 2.0;
    const double fy = nh > 1 ? y * double(m.height() - 1) / (nh - 1) : (m.height() - 1) / 2.0;
    const int x0 = std::min(int(std::floor(fx)), m.width() - 1);
    const int y0 = std::min(int(std::floor(fy)), m.height() - 1);
    const int x1 = std::min(x0 + 1, m.width() - 1);
    const int y1 = std::min(y0 + 1, m.height() - 1);
    const double tx = fx - x0, ty = fy - y0;
    const auto v = [&](int xx, int yy) { return m.at(xx, yy) ? 1.0 : 0.0; };
    const double top = (1.0 - tx) * v(x0, y0) + tx * v(x1, y0);
    const double bottom = (1.0 - tx) * v(x0, y1) + tx * v(x1, y1);
    const double v01 = (1.0 - ty) * top + ty * bottom;
    if (std::abs(v01 - 0.5) < 1e-9) return -1;
    return v01 >= 0.5 ? 1 : 0;
}

/// Output mask must equal each source mask resized into its quadrant; the
/// split point is read back from the sample's metadata.
inline std::size_t mosaic_violations(std::span<const Sample> src, const Sample& out) {
    const auto& split = out.meta.at("split");
    const auto comma = split.find(',');
    const int sx = std::stoi(split.substr(0, comma));
    const int sy = std::stoi(split.substr(comma + 1));
    const int n = out.mask.width();
    std::size_t bad = out.mask.same_dims(out.image) ? 0 : 1;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const int q = (x >= sx) + 2 * (y >= sy);
            const int qw = x >= sx ? n - sx : sx;
            const int qh = y >= sy ? n - sy : sy;
            const int want = resized_bit(src[q].mask, qw, qh, x - (x >= sx ? sx : 0), y - (y >= sy ? sy : 0));
            bad += want >= 0 && (want == 1) != out.mask.at(x, y);
        }
    }
    return bad;
}

/// The pasted region is recovered as the bounding box of pixels taken from b
/// (inputs with distinct pixel values make this unambiguous); it must be a
/// solid rectangle and the labels must be composited through the same region.
inline std::size_t cutmix_violations(const Sample& a, const Sample& b, const Sample& out) {
    const int w = a.image.width(), h = a.image.height();
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (out.image.at(x, y) != a.image.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    std::size_t bad = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool in = x >= x0 && x <= x1 && y >= y0 && y <= y1;
            const auto& src = in ? b : a;
            bad += out.image.at(x, y) != src.image.at(x, y);
            bad += out.mask.at(x, y) != src.mask.at(x, y);
        }
    }
    return bad;
}

inline std::size_t mixup_violations(const Sample& a, const Sample& b, const Sample& out) {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < out.mask.size(); ++i) bad += out.mask[i] != (a.mask[i] || b.mask[i]);
    return bad;
}

/// Paths that must leave the label untouched (stage 1 after the mosaic,
/// harmonization, resampling).
inline std::size_t identity_violations(const BinaryMask& in, const Sample& out) {
    if (!in.same_dims(out.mask) || !out.mask.same_dims(out.image)) return in.size() + 1;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < in.size(); ++i) bad += in[i] != out.mask[i];
    return bad;
}

}  // namespace dmlab::testing
