#pragma once

#include "dmlab/image.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace dmlab {

/// White top-hat (img minus its opening) with a disk of the given radius.
/// The image is reflect-padded so the opening never exceeds the input.
ScoreMap tophat(const GrayImage& img, int se_radius = 5);

/// Multi-scale local contrast: per odd cell size s, (max of the centre s x s
/// cell)^2 divided by the largest mean of its eight neighbouring cells; the
/// score is the maximum over scales.
ScoreMap lcm(const GrayImage& img, const std::vector<int>& scales = {3, 5, 7});

/// Elementwise sign(x) * max(|x| - tau, 0).
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double tau);

struct RpcaResult {
    Eigen::MatrixXd low_rank;
    Eigen::MatrixXd sparse;
    int iterations = 0;
    bool converged = false;
    /// ||D - T_k||_* + lambda ||T_k||_1 after each iteration, when requested.
    std::vector<double> objective;
};

/// Inexact augmented Lagrangian solver for min ||B||_* + lambda ||T||_1 s.t. D = B + T.
RpcaResult rpca_ialm(const Eigen::MatrixXd& d, double lambda, double tol = 1e-6, int max_iter = 500,
                     bool record_objective = false);

struct PatchImageConfig {
    int patch = 16;
    int stride = 8;
    /// Defaults to 1 / sqrt(max(rows, cols)) of the patch matrix.
    std::optional<double> lambda;
    double tol = 1e-6;
    int max_iter = 500;

    void validate() const;
};

/// Top-left corners along one axis: every stride step plus a final aligned position.
std::vector<int> patch_positions(int extent, int patch, int stride);
/// Columns are row-major vectorized patches in (y, x) raster order of their corners.
Eigen::MatrixXd unfold_patches(const GrayImage& img, int patch, int stride);
/// Averages overlapping contributions back onto a width x height grid.
std::vector<double> fold_patches(const Eigen::MatrixXd& cols, int width, int height, int patch, int stride);

ScoreMap ipi_detect(const GrayImage& img, const PatchImageConfig& cfg = {});

enum class ThresholdMethod { Fixed, Adaptive };

struct ThresholdSpec {
    ThresholdMethod method = ThresholdMethod::Adaptive;
    double tau = 0.5;  // fixed threshold
    double k = 5.0;    // adaptive: mean + k * stddev
};

/// Strict comparison: a pixel is set when its score exceeds the threshold.
BinaryMask threshold_to_mask(const ScoreMap& scores, const ThresholdSpec& spec = {});

std::string to_string(ThresholdMethod m);

}  // namespace dmlab
