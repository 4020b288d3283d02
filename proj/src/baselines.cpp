#include "dmlab/baselines.hpp"

#include "dmlab/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmlab {

namespace {

struct Offset {
    int dx;
    int dy;
};

std::vector<Offset> disk(int r) {
    std::vector<Offset> out;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= r * r) out.push_back({dx, dy});
    return out;
}

// Min (erode) or max (dilate) over the structuring element; out-of-range taps are skipped.
std::vector<double> morph(const std::vector<double>& src, int w, int h, const std::vector<Offset>& se, bool erode) {
    std::vector<double> out(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = erode ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            for (const auto& o : se) {
                const int xx = x + o.dx;
                const int yy = y + o.dy;
                if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                const double s = src[static_cast<std::size_t>(yy) * w + xx];
                v = erode ? std::min(v, s) : std::max(v, s);
            }
            out[static_cast<std::size_t>(y) * w + x] = v;
        }
    }
    return out;
}

double spectral_norm(const Eigen::MatrixXd& m) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

double nuclear_norm(const Eigen::MatrixXd& m) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().sum();
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double tau) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = (svd.singularValues().array() - tau).max(0.0);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace

ScoreMap tophat(const GrayImage& img, int se_radius) {
    if (se_radius < 1) throw InvalidParameter("tophat: structuring element radius must be >= 1");
    const int pad = 2 * se_radius;
    const int w = img.width();
    const int h = img.height();
    const int pw = w + 2 * pad;
    const int ph = h + 2 * pad;
    std::vector<double> ext(static_cast<std::size_t>(pw) * ph);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            ext[static_cast<std::size_t>(y) * pw + x] = img.at(reflect_index(x - pad, w), reflect_index(y - pad, h));
    const auto se = disk(se_radius);
    const auto opened = morph(morph(ext, pw, ph, se, true), pw, ph, se, false);
    ScoreMap out{w, h, std::vector<double>(img.size())};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double o = opened[static_cast<std::size_t>(y + pad) * pw + x + pad];
            out.values[static_cast<std::size_t>(y) * w + x] = std::max(0.0, img.at(x, y) - o);
        }
    return out;
}

ScoreMap lcm(const GrayImage& img, const std::vector<int>& scales) {
    if (scales.empty()) throw InvalidParameter("lcm: at least one scale is required");
    for (int s : scales)
        if (s < 1 || s % 2 == 0) throw InvalidParameter("lcm: cell sizes must be odd and positive");
    const int w = img.width();
    const int h = img.height();
    const auto px = [&](int x, int y) { return img.at(reflect_index(x, w), reflect_index(y, h)); };
    ScoreMap out{w, h, std::vector<double>(img.size(), -std::numeric_limits<double>::infinity())};
    for (int s : scales) {
        const int half = s / 2;
        const double inv = 1.0 / (s * s);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double centre_max = -std::numeric_limits<double>::infinity();
                double neigh_max = -std::numeric_limits<double>::infinity();
                for (int cy = -1; cy <= 1; ++cy) {
                    for (int cx = -1; cx <= 1; ++cx) {
                        const int ox = x + cx * s;
                        const int oy = y + cy * s;
                        if (cx == 0 && cy == 0) {
                            for (int j = -half; j <= half; ++j)
                                for (int i = -half; i <= half; ++i) centre_max = std::max(centre_max, px(ox + i, oy + j));
                        } else {
                            double sum = 0.0;
                            for (int j = -half; j <= half; ++j)
                                for (int i = -half; i <= half; ++i) sum += px(ox + i, oy + j);
                            neigh_max = std::max(neigh_max, sum * inv);
                        }
                    }
                }
                // A dark neighbourhood (mean 0) would divide by zero; the floor keeps scores finite.
                const double c = centre_max * centre_max / std::max(neigh_max, 1e-12);
                auto& o = out.values[static_cast<std::size_t>(y) * w + x];
                o = std::max(o, c);
            }
        }
    }
    return out;
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double tau) {
    return x.unaryExpr([tau](double v) { return v > tau ? v - tau : v < -tau ? v + tau : 0.0; });
}

RpcaResult rpca_ialm(const Eigen::MatrixXd& d, double lambda, double tol, int max_iter, bool record_objective) {
    if (!d.allFinite()) throw InvalidParameter("rpca: input matrix contains non-finite values");
    if (!(lambda > 0.0) || !(tol > 0.0) || max_iter < 1) {
        throw InvalidParameter("rpca: lambda and tol must be positive, max_iter >= 1");
    }
    RpcaResult r;
    r.low_rank = Eigen::MatrixXd::Zero(d.rows(), d.cols());
    r.sparse = Eigen::MatrixXd::Zero(d.rows(), d.cols());
    const double d_norm = d.norm();
    if (d_norm == 0.0) {
        r.converged = true;
        return r;
    }
    const double norm2 = spectral_norm(d);
    const double norm_inf = d.cwiseAbs().maxCoeff() / lambda;
    Eigen::MatrixXd y = d / std::max(norm2, norm_inf);
    double mu = 1.25 / norm2;
    const double mu_max = mu * 1e7;
    const double rho = 1.1;

    for (int k = 1; k <= max_iter; ++k) {
        r.sparse = soft_threshold(d - r.low_rank + y / mu, lambda / mu);
        r.low_rank = svt(d - r.sparse + y / mu, 1.0 / mu);
        const Eigen::MatrixXd z = d - r.low_rank - r.sparse;
        y += mu * z;
        mu = std::min(rho * mu, mu_max);
        r.iterations = k;
        if (record_objective) {
            // Evaluated at the feasible pair (L, D - L).
            r.objective.push_back(nuclear_norm(r.low_rank) + lambda * (d - r.low_rank).cwiseAbs().sum());
        }
        if (z.norm() / d_norm <= tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

void PatchImageConfig::validate() const {
    if (patch < 1 || stride < 1 || stride > patch) {
        throw InvalidParameter("patch image: need 1 <= stride <= patch");
    }
    if (lambda && !(*lambda > 0.0)) throw InvalidParameter("patch image: lambda must be positive");
    if (!(tol > 0.0) || max_iter < 1) throw InvalidParameter("patch image: tol > 0 and max_iter >= 1 required");
}

std::vector<int> patch_positions(int extent, int patch, int stride) {
    if (extent < patch) throw InvalidParameter("image is smaller than the patch size");
    std::vector<int> pos;
    for (int p = 0; p + patch <= extent; p += stride) pos.push_back(p);
    if (pos.back() + patch < extent) pos.push_back(extent - patch);
    return pos;
}

Eigen::MatrixXd unfold_patches(const GrayImage& img, int patch, int stride) {
    const auto xs = patch_positions(img.width(), patch, stride);
    const auto ys = patch_positions(img.height(), patch, stride);
    Eigen::MatrixXd cols(patch * patch, static_cast<Eigen::Index>(xs.size() * ys.size()));
    Eigen::Index c = 0;
    for (int y0 : ys)
        for (int x0 : xs) {
            for (int j = 0; j < patch; ++j)
                for (int i = 0; i < patch; ++i) cols(j * patch + i, c) = img.at(x0 + i, y0 + j);
            ++c;
        }
    return cols;
}

std::vector<double> fold_patches(const Eigen::MatrixXd& cols, int width, int height, int patch, int stride) {
    const auto xs = patch_positions(width, patch, stride);
    const auto ys = patch_positions(height, patch, stride);
    if (cols.rows() != patch * patch || cols.cols() != static_cast<Eigen::Index>(xs.size() * ys.size())) {
        throw ShapeMismatch("fold_patches: column matrix does not match the patch grid");
    }
    std::vector<double> acc(static_cast<std::size_t>(width) * height, 0.0);
    std::vector<int> count(acc.size(), 0);
    Eigen::Index c = 0;
    for (int y0 : ys)
        for (int x0 : xs) {
            for (int j = 0; j < patch; ++j)
                for (int i = 0; i < patch; ++i) {
                    const auto o = static_cast<std::size_t>(y0 + j) * width + x0 + i;
                    acc[o] += cols(j * patch + i, c);
                    ++count[o];
                }
            ++c;
        }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= count[i];
    return acc;
}

ScoreMap ipi_detect(const GrayImage& img, const PatchImageConfig& cfg) {
    cfg.validate();
    if (img.width() < cfg.patch || img.height() < cfg.patch) {
        throw InvalidParameter("ipi: image smaller than patch size");
    }
    const auto d = unfold_patches(img, cfg.patch, cfg.stride);
    const double lambda = cfg.lambda.value_or(1.0 / std::sqrt(static_cast<double>(std::max(d.rows(), d.cols()))));
    const auto r = rpca_ialm(d, lambda, cfg.tol, cfg.max_iter);
    auto folded = fold_patches(r.sparse, img.width(), img.height(), cfg.patch, cfg.stride);
    for (auto& v : folded) v = std::abs(v);
    return {img.width(), img.height(), std::move(folded)};
}

BinaryMask threshold_to_mask(const ScoreMap& scores, const ThresholdSpec& spec) {
    if (scores.values.size() != static_cast<std::size_t>(scores.width) * scores.height) {
        throw ShapeMismatch("threshold_to_mask: score map size mismatch");
    }
    for (double v : scores.values)
        if (!std::isfinite(v)) throw InvalidParameter("threshold_to_mask: non-finite score");
    double thr = spec.tau;
    BinaryMask m(scores.width, scores.height);
    if (spec.method == ThresholdMethod::Adaptive) {
        // Constant maps have zero spread; summation roundoff must not turn that into detections.
        const auto [lo, hi] = std::minmax_element(scores.values.begin(), scores.values.end());
        if (lo == scores.values.end() || *lo == *hi) return m;
        const auto n = static_cast<double>(scores.values.size());
        double mean = 0.0;
        for (double v : scores.values) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : scores.values) var += (v - mean) * (v - mean);
        thr = mean + spec.k * std::sqrt(var / n);
    }
    for (std::size_t i = 0; i < scores.values.size(); ++i) m.set(i, scores.values[i] > thr);
    return m;
}

std::string to_string(ThresholdMethod m) { return m == ThresholdMethod::Fixed ? "fixed" : "adaptive"; }

}  // namespace dmlab
