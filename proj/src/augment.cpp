#include "dmlab/augment.hpp"

#include "dmlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dmlab {

namespace {

void check_range(const Range& r, const char* what) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
        throw InvalidParameter(std::string(what) + ": range min must not exceed max");
    }
}

void require_same(const GrayImage& a, const GrayImage& b, const char* op) {
    if (!a.same_dims(b)) throw ShapeMismatch(std::string(op) + ": image dimensions differ");
}

}  // namespace

void DegradeConfig::validate() const {
    if (orders < 1) throw InvalidParameter("degrade: orders must be >= 1");
    check_range(blur_sigma, "degrade blur_sigma");
    check_range(resize_scale, "degrade resize_scale");
    check_range(noise_sigma, "degrade noise_sigma");
    if (!(blur_sigma.lo > 0.0)) throw InvalidParameter("degrade: blur sigma must be positive");
    if (!(resize_scale.lo > 0.0)) throw InvalidParameter("degrade: resize scale must be positive");
    if (noise_sigma.lo < 0.0) throw InvalidParameter("degrade: noise sigma must be non-negative");
}

void PasteConfig::validate() const {
    check_range(region_frac, "paste region_frac");
    if (!(region_frac.lo > 0.0) || !(region_frac.hi < 1.0)) {
        throw InvalidParameter("paste: region fraction must satisfy 0 < min <= max < 1");
    }
}

void append_lineage(Sample& sample, const std::string& step) {
    auto& l = sample.meta["lineage"];
    l = l.empty() ? step : l + "," + step;
}

GrayImage degrade(const GrayImage& img, const DegradeConfig& cfg, Rng& rng) {
    cfg.validate();
    GrayImage cur = img;
    const int w = img.width();
    const int h = img.height();
    for (int order = 0; order < cfg.orders; ++order) {
        const double sigma_b = cfg.blur_sigma.draw(rng);
        const double scale = cfg.resize_scale.draw(rng);
        const double sigma_n = cfg.noise_sigma.draw(rng);
        cur = gaussian_blur(cur, sigma_b);
        const int sw = std::max(1, static_cast<int>(std::lround(w * scale)));
        const int sh = std::max(1, static_cast<int>(std::lround(h * scale)));
        if (sw != w || sh != h) cur = resize_bilinear(resize_bilinear(cur, sw, sh), w, h);
        cur = add_gaussian_noise(cur, sigma_n, rng);
    }
    return cur;
}

BinaryMask rectangle_mask(int width, int height, int x0, int y0, int rect_w, int rect_h) {
    BinaryMask m(width, height);
    for (int y = std::max(0, y0); y < std::min(height, y0 + rect_h); ++y)
        for (int x = std::max(0, x0); x < std::min(width, x0 + rect_w); ++x) m.set(x, y, true);
    return m;
}

BinaryMask sample_mask(int width, int height, const PasteConfig& cfg, Rng& rng) {
    cfg.validate();
    if (width < 4 || height < 4) throw InvalidParameter("sample_mask: image must be at least 4x4");
    const double total = static_cast<double>(width) * height;
    const double target = cfg.region_frac.draw(rng) * total;
    const double lo = cfg.region_frac.lo * total - 1e-9;
    const double hi = cfg.region_frac.hi * total + 1e-9;

    // Integer rectangles whose area honours the configured range exactly,
    // preferring aspect ratios within [1/2, 2]; ties broken uniformly.
    std::vector<std::pair<int, int>> best;
    for (const double max_aspect : {2.0, std::numeric_limits<double>::infinity()}) {
        double best_gap = std::numeric_limits<double>::infinity();
        for (int rw = 1; rw <= width; ++rw) {
            for (int rh = 1; rh <= height; ++rh) {
                const double area = static_cast<double>(rw) * rh;
                if (area < lo || area > hi) continue;
                if (std::max(static_cast<double>(rw) / rh, static_cast<double>(rh) / rw) > max_aspect) continue;
                const double gap = std::abs(area - target);
                if (gap < best_gap - 1e-12) {
                    best_gap = gap;
                    best.clear();
                }
                if (gap <= best_gap + 1e-12) best.emplace_back(rw, rh);
            }
        }
        if (!best.empty()) break;
    }
    if (best.empty()) {
        // No integer rectangle fits the range; fall back to the closest area.
        double best_gap = std::numeric_limits<double>::infinity();
        for (int rw = 1; rw <= width; ++rw) {
            const int rh = std::clamp(static_cast<int>(std::lround(target / rw)), 1, height);
            const double gap = std::abs(static_cast<double>(rw) * rh - target);
            if (gap < best_gap) {
                best_gap = gap;
                best.assign(1, {rw, rh});
            }
        }
    }
    const auto [rw, rh] = best[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(best.size()) - 1))];
    const int x0 = rng.uniform_int(0, width - rw);
    const int y0 = rng.uniform_int(0, height - rh);
    return rectangle_mask(width, height, x0, y0, rw, rh);
}

GrayImage cut_and_paste(const GrayImage& orig, const GrayImage& degraded, const BinaryMask& m,
                        bool invert_convention) {
    require_same(orig, degraded, "cut_and_paste");
    if (!m.same_dims(orig)) throw ShapeMismatch("cut_and_paste: mask dimensions differ");
    const GrayImage& inside = invert_convention ? orig : degraded;
    const GrayImage& outside = invert_convention ? degraded : orig;
    std::vector<double> out(orig.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] ? inside[i] : outside[i];
    return GrayImage(orig.width(), orig.height(), std::move(out));
}

Sample mosaic_at(std::span<const Sample> samples, int out_size, int split_x, int split_y) {
    if (samples.size() < 4) throw InvalidParameter("mosaic requires four samples");
    if (out_size < 2 || split_x < 1 || split_y < 1 || split_x >= out_size || split_y >= out_size) {
        throw InvalidParameter("mosaic: split point must lie strictly inside the output");
    }
    std::vector<double> pixels(static_cast<std::size_t>(out_size) * out_size, 0.0);
    BinaryMask mask(out_size, out_size);
    const int xs[4] = {0, split_x, 0, split_x};
    const int ys[4] = {0, 0, split_y, split_y};
    const int ws[4] = {split_x, out_size - split_x, split_x, out_size - split_x};
    const int hs[4] = {split_y, split_y, out_size - split_y, out_size - split_y};
    std::string sources;
    for (std::size_t q = 0; q < 4; ++q) {
        const auto& s = samples[q];
        const auto img = resize_bilinear(s.image, ws[q], hs[q]);
        const auto m = resize_mask(s.mask, ws[q], hs[q]);
        for (int y = 0; y < hs[q]; ++y) {
            for (int x = 0; x < ws[q]; ++x) {
                const auto o = static_cast<std::size_t>((ys[q] + y) * out_size + xs[q] + x);
                pixels[o] = img.at(x, y);
                if (m.at(x, y)) mask.set(o, true);
            }
        }
        const auto idx = s.meta.find("index");
        if (!sources.empty()) sources += ",";
        sources += idx != s.meta.end() ? idx->second : "?";
    }
    Sample out(GrayImage(out_size, out_size, std::move(pixels)), std::move(mask));
    out.meta["lineage"] = "mosaic";
    out.meta["sources"] = sources;
    out.meta["split"] = std::to_string(split_x) + "," + std::to_string(split_y);
    return out;
}

Sample mosaic(std::span<const Sample> samples, int out_size, Rng& rng) {
    if (samples.size() < 4) throw InvalidParameter("mosaic requires four samples");
    const int lo = static_cast<int>(std::ceil(0.25 * out_size));
    const int hi = static_cast<int>(std::floor(0.75 * out_size));
    const int sx = rng.uniform_int(std::max(1, lo), std::min(out_size - 1, hi));
    const int sy = rng.uniform_int(std::max(1, lo), std::min(out_size - 1, hi));
    return mosaic_at(samples, out_size, sx, sy);
}

Sample cutmix_with(const Sample& a, const Sample& b, const BinaryMask& region) {
    require_same(a.image, b.image, "cutmix");
    if (!region.same_dims(a.image)) throw ShapeMismatch("cutmix: region dimensions differ");
    std::vector<double> pixels(a.image.size());
    BinaryMask mask(a.image.width(), a.image.height());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = region[i] ? b.image[i] : a.image[i];
        mask.set(i, region[i] ? b.mask[i] : a.mask[i]);
    }
    Sample out(GrayImage(a.image.width(), a.image.height(), std::move(pixels)), std::move(mask));
    out.meta["lineage"] = "cutmix";
    return out;
}

Sample cutmix(const Sample& a, const Sample& b, Rng& rng) {
    require_same(a.image, b.image, "cutmix");
    const int w = a.image.width();
    const int h = a.image.height();
    // Box side ratio sqrt(1 - lambda), lambda ~ U(0, 1), centre uniform, clipped to the image.
    const double r = std::sqrt(1.0 - rng.uniform());
    const int bw = static_cast<int>(std::lround(w * r));
    const int bh = static_cast<int>(std::lround(h * r));
    const int cx = rng.uniform_int(0, w - 1);
    const int cy = rng.uniform_int(0, h - 1);
    return cutmix_with(a, b, rectangle_mask(w, h, cx - bw / 2, cy - bh / 2, bw, bh));
}

Sample mixup(const Sample& a, const Sample& b, double lambda) {
    require_same(a.image, b.image, "mixup");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidParameter("mixup: lambda must lie in [0, 1]");
    std::vector<double> pixels(a.image.size());
    BinaryMask mask(a.image.width(), a.image.height());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = lambda * a.image[i] + (1.0 - lambda) * b.image[i];
        mask.set(i, a.mask[i] || b.mask[i]);
    }
    Sample out(GrayImage(a.image.width(), a.image.height(), std::move(pixels)), std::move(mask));
    out.meta["lineage"] = "mixup";
    return out;
}

Sample mix_stage(const Sample& mosaic_sample, const DegradeConfig& degrade_cfg,
                 const PasteConfig& paste_cfg, Rng& rng) {
    const auto& img = mosaic_sample.image;
    const auto degraded = degrade(img, degrade_cfg, rng);
    const auto region = sample_mask(img.width(), img.height(), paste_cfg, rng);
    Sample out(cut_and_paste(img, degraded, region, paste_cfg.invert_convention), mosaic_sample.mask,
               mosaic_sample.meta);
    append_lineage(out, "degrade");
    append_lineage(out, "cut_and_paste");
    return out;
}

Sample diffmosaic_stage1(std::span<const Sample> samples, int out_size,
                         const DegradeConfig& degrade_cfg, const PasteConfig& paste_cfg, Rng& rng) {
    const auto m = mosaic(samples, out_size, rng);
    return mix_stage(m, degrade_cfg, paste_cfg, rng);
}

}  // namespace dmlab
