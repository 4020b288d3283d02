#pragma once

#include "dmlab/image.hpp"
#include "dmlab/rng.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace dmlab::testing {

inline GrayImage random_image(int w, int h, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (auto& x : v) x = rng.uniform();
    return GrayImage(w, h, std::move(v));
}

inline BinaryMask random_mask(int w, int h, double density, Rng& rng) {
    BinaryMask m(w, h);
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < density);
    return m;
}

inline GrayImage constant_image(int w, int h, double v) { return GrayImage(w, h, v); }

inline double max_abs_diff(const GrayImage& a, const GrayImage& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("dmlab_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace dmlab::testing
