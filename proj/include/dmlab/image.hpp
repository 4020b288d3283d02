#pragma once

#include "dmlab/rng.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dmlab {

/// Row-major grayscale raster with intensities in [0, 1].
///
/// Construction clamps every value into [0, 1]; there is no mutable pixel
/// access, so the range invariant holds for the lifetime of the object.
class GrayImage {
public:
    GrayImage(int width, int height, double fill = 0.0);
    GrayImage(int width, int height, std::vector<double> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    double at(int x, int y) const { return data_[index(x, y)]; }
    double operator[](std::size_t i) const { return data_[i]; }
    std::span<const double> pixels() const noexcept { return data_; }
    /// Same clamping and finiteness rules as the constructors.
    void set(int x, int y, double v);

    bool same_dims(const GrayImage& o) const noexcept {
        return width_ == o.width_ && height_ == o.height_;
    }
    bool operator==(const GrayImage&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<double> data_;
};

/// Row-major {0,1} raster.
class BinaryMask {
public:
    BinaryMask(int width, int height);
    BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(int x, int y, bool on) { bits_[index(x, y)] = on ? 1 : 0; }
    void set(std::size_t i, bool on) { bits_[i] = on ? 1 : 0; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }
    bool same_dims(const BinaryMask& o) const noexcept {
        return width_ == o.width_ && height_ == o.height_;
    }
    bool same_dims(const GrayImage& o) const noexcept {
        return width_ == o.width() && height_ == o.height();
    }
    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

/// Unbounded real-valued raster, used for detector score maps.
struct ScoreMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
};

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
};

struct Component {
    std::vector<Pixel> pixels;  // raster order
    std::size_t area = 0;
    double cx = 0.0;
    double cy = 0.0;
};

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

struct QuadrantStats {
    /// Order: top-left, top-right, bottom-left, bottom-right.
    std::array<MeanStd, 4> quadrants{};
    /// Largest absolute difference between any two quadrant means.
    double quadrant_discrepancy = 0.0;
};

/// Half-sample symmetric reflection of `i` into [0, n), periodic for any offset.
int reflect_index(int i, int n) noexcept;

/// Normalized, sampled 1-D Gaussian with radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

GrayImage gaussian_blur(const GrayImage& img, double sigma);
GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height);
GrayImage add_gaussian_noise(const GrayImage& img, double sigma, Rng& rng);

/// Bilinear resample of the mask's indicator followed by thresholding at 0.5.
BinaryMask resize_mask(const BinaryMask& mask, int new_width, int new_height);

/// 8-connected components, ordered by their first pixel in raster order.
std::vector<Component> connected_components(const BinaryMask& mask);

QuadrantStats quadrant_stats(const GrayImage& img);

/// Unclamped bilinear resample used by both image and mask resizing.
std::vector<double> resample_bilinear(std::span<const double> src, int width, int height,
                                      int new_width, int new_height);

}  // namespace dmlab
