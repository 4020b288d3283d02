#include "dmlab/image.hpp"

#include "dmlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace dmlab {

namespace {

void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
        throw InvalidParameter("image dimensions must be at least 1x1, got " +
                               std::to_string(width) + "x" + std::to_string(height));
    }
}

std::size_t area_of(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(area_of(width, height), std::clamp(fill, 0.0, 1.0));
}

GrayImage::GrayImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), data_(std::move(values)) {
    check_dims(width, height);
    if (data_.size() != area_of(width, height)) {
        throw ShapeMismatch("GrayImage: value count does not match width*height");
    }
    for (double& v : data_) {
        if (!std::isfinite(v)) throw InvalidParameter("GrayImage: non-finite pixel value");
        v = std::clamp(v, 0.0, 1.0);
    }
}

void GrayImage::set(int x, int y, double v) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) throw InvalidParameter("GrayImage: pixel out of range");
    if (!std::isfinite(v)) throw InvalidParameter("GrayImage: non-finite pixel value");
    data_[index(x, y)] = std::clamp(v, 0.0, 1.0);
}

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
    check_dims(width, height);
    bits_.assign(area_of(width, height), 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    check_dims(width, height);
    if (bits_.size() != area_of(width, height)) {
        throw ShapeMismatch("BinaryMask: bit count does not match width*height");
    }
    for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw InvalidParameter("gaussian sigma must be positive and finite");
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    }
    const double total = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k) v /= total;
    return k;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    const int w = img.width();
    const int h = img.height();
    const auto src = img.pixels();

    std::vector<double> tmp(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       src[static_cast<std::size_t>(y * w + reflect_index(x + k, w))];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    std::vector<double> out(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp[static_cast<std::size_t>(reflect_index(y + k, h) * w + x)];
            }
            out[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    return GrayImage(w, h, std::move(out));
}

std::vector<double> resample_bilinear(std::span<const double> src, int width, int height,
                                      int new_width, int new_height) {
    if (new_width < 1 || new_height < 1) {
        throw InvalidParameter("resize target dimensions must be at least 1x1");
    }
    // Corner-aligned: output corners map exactly onto input corners.
    const double sx = new_width > 1 ? static_cast<double>(width - 1) / (new_width - 1) : 0.0;
    const double sy = new_height > 1 ? static_cast<double>(height - 1) / (new_height - 1) : 0.0;
    const double ox = new_width > 1 ? 0.0 : (width - 1) / 2.0;
    const double oy = new_height > 1 ? 0.0 : (height - 1) / 2.0;

    std::vector<double> out(area_of(new_width, new_height));
    for (int y = 0; y < new_height; ++y) {
        const double fy = oy + y * sy;
        const int y0 = std::min(static_cast<int>(std::floor(fy)), height - 1);
        const int y1 = std::min(y0 + 1, height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < new_width; ++x) {
            const double fx = ox + x * sx;
            const int x0 = std::min(static_cast<int>(std::floor(fx)), width - 1);
            const int x1 = std::min(x0 + 1, width - 1);
            const double tx = fx - x0;
            auto px = [&](int xx, int yy) {
                return src[static_cast<std::size_t>(yy) * static_cast<std::size_t>(width) +
                           static_cast<std::size_t>(xx)];
            };
            double v = px(x0, y0);
            // Skip zero-weight taps so identity resizes are bit-exact.
            if (tx != 0.0 || ty != 0.0) {
                const double top = (1.0 - tx) * px(x0, y0) + tx * px(x1, y0);
                const double bottom = (1.0 - tx) * px(x0, y1) + tx * px(x1, y1);
                v = (1.0 - ty) * top + ty * bottom;
            }
            out[static_cast<std::size_t>(y) * static_cast<std::size_t>(new_width) +
                static_cast<std::size_t>(x)] = v;
        }
    }
    return out;
}

GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height) {
    return GrayImage(new_width, new_height,
                     resample_bilinear(img.pixels(), img.width(), img.height(), new_width,
                                       new_height));
}

GrayImage add_gaussian_noise(const GrayImage& img, double sigma, Rng& rng) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw InvalidParameter("noise sigma must be non-negative and finite");
    }
    if (sigma == 0.0) return img;
    std::vector<double> out(img.pixels().begin(), img.pixels().end());
    for (double& v : out) v += sigma * rng.normal();
    return GrayImage(img.width(), img.height(), std::move(out));
}

BinaryMask resize_mask(const BinaryMask& mask, int new_width, int new_height) {
    std::vector<double> indicator(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) indicator[i] = mask[i] ? 1.0 : 0.0;
    const auto resized =
        resample_bilinear(indicator, mask.width(), mask.height(), new_width, new_height);
    std::vector<std::uint8_t> bits(resized.size());
    for (std::size_t i = 0; i < resized.size(); ++i) bits[i] = resized[i] >= 0.5 ? 1 : 0;
    return BinaryMask(new_width, new_height, std::move(bits));
}

std::vector<Component> connected_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<char> seen(mask.size(), 0);
    std::vector<Component> out;
    std::deque<Pixel> queue;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto start = static_cast<std::size_t>(y * w + x);
            if (!mask[start] || seen[start]) continue;
            Component comp;
            seen[start] = 1;
            queue.push_back({x, y});
            while (!queue.empty()) {
                const Pixel p = queue.front();
                queue.pop_front();
                comp.pixels.push_back(p);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx;
                        const int ny = p.y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const auto ni = static_cast<std::size_t>(ny * w + nx);
                        if (mask[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            queue.push_back({nx, ny});
                        }
                    }
                }
            }
            std::sort(comp.pixels.begin(), comp.pixels.end(), [](const Pixel& a, const Pixel& b) {
                return a.y != b.y ? a.y < b.y : a.x < b.x;
            });
            comp.area = comp.pixels.size();
            double sx = 0.0;
            double sy = 0.0;
            for (const auto& p : comp.pixels) {
                sx += p.x;
                sy += p.y;
            }
            comp.cx = sx / static_cast<double>(comp.area);
            comp.cy = sy / static_cast<double>(comp.area);
            out.push_back(std::move(comp));
        }
    }
    return out;
}

QuadrantStats quadrant_stats(const GrayImage& img) {
    const int w = img.width();
    const int h = img.height();
    if (w % 2 != 0 || h % 2 != 0) {
        throw InvalidParameter("quadrant_stats requires even width and height");
    }
    const int hw = w / 2;
    const int hh = h / 2;
    QuadrantStats stats;
    for (int q = 0; q < 4; ++q) {
        const int x0 = (q % 2) * hw;
        const int y0 = (q / 2) * hh;
        double sum = 0.0;
        for (int y = y0; y < y0 + hh; ++y)
            for (int x = x0; x < x0 + hw; ++x) sum += img.at(x, y);
        const double n = static_cast<double>(hw) * hh;
        const double mean = sum / n;
        double ss = 0.0;
        for (int y = y0; y < y0 + hh; ++y)
            for (int x = x0; x < x0 + hw; ++x) ss += (img.at(x, y) - mean) * (img.at(x, y) - mean);
        stats.quadrants[static_cast<std::size_t>(q)] = {mean, std::sqrt(ss / n)};
    }
    double gap = 0.0;
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b)
            gap = std::max(gap, std::abs(stats.quadrants[a].mean - stats.quadrants[b].mean));
    stats.quadrant_discrepancy = gap;
    return stats;
}

}  // namespace dmlab
