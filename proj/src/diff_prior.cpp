#include "dmlab/diff_prior.hpp"

#include "dmlab/errors.hpp"
#include "dmlab/nn/ops.hpp"
#include "dmlab/nn/optim.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace dmlab {

namespace {

Eigen::VectorXd flatten(const GrayImage& img) {
    return Eigen::Map<const Eigen::VectorXd>(img.pixels().data(), static_cast<Eigen::Index>(img.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> to_std_rowmajor(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return out;
}

void check_t(int t, const NoiseSchedule& sched, const char* what) {
    if (t < 1 || t > sched.steps()) {
        throw InvalidParameter(std::string(what) + ": timestep " + std::to_string(t) + " outside [1, " +
                               std::to_string(sched.steps()) + "]");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// LinearAE

LinearAE::LinearAE(int width, int height, Eigen::VectorXd mean, Eigen::MatrixXd basis, Eigen::VectorXd scale)
    : width_(width), height_(height), mean_(std::move(mean)), basis_(std::move(basis)), scale_(std::move(scale)) {
    const auto d = static_cast<Eigen::Index>(width) * height;
    if (width < 1 || height < 1 || mean_.size() != d || basis_.cols() != d || scale_.size() != basis_.rows()) {
        throw ShapeMismatch("LinearAE: inconsistent mean/basis/scale sizes");
    }
    if (basis_.rows() < 1) throw InvalidParameter("LinearAE: latent dimension must be >= 1");
    if ((scale_.array() <= 0.0).any()) throw InvalidParameter("LinearAE: scales must be positive");
}

LinearAE LinearAE::fit(std::span<const GrayImage> images, int k) {
    if (k < 1) throw InvalidParameter("LinearAE: k must be >= 1");
    if (images.size() < static_cast<std::size_t>(k)) {
        throw InvalidParameter("LinearAE: need at least k = " + std::to_string(k) + " images, got " +
                               std::to_string(images.size()));
    }
    const int w = images[0].width();
    const int h = images[0].height();
    const auto n = static_cast<Eigen::Index>(images.size());
    const Eigen::Index d = static_cast<Eigen::Index>(w) * h;
    if (k > d) throw InvalidParameter("LinearAE: k exceeds the pixel count");
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& img = images[static_cast<std::size_t>(i)];
        if (img.width() != w || img.height() != h) throw ShapeMismatch("LinearAE: mixed image sizes");
        x.row(i) = flatten(img).transpose();
    }
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    x.rowwise() -= mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    Eigen::MatrixXd basis = svd.matrixV().leftCols(k).transpose();
    // Fix each direction's sign so the largest-magnitude entry is positive.
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        Eigen::Index arg = 0;
        basis.row(r).cwiseAbs().maxCoeff(&arg);
        if (basis(r, arg) < 0.0) basis.row(r) *= -1.0;
    }
    Eigen::VectorXd scale = svd.singularValues().head(k) / std::sqrt(static_cast<double>(n));
    // Directions with (numerically) zero spread get a floor so whitening stays finite.
    const double floor = std::max(1e-12, 1e-6 * scale(0));
    scale = scale.cwiseMax(floor);
    return LinearAE(w, h, mean, std::move(basis), std::move(scale));
}

Eigen::VectorXd LinearAE::encode_flat(const Eigen::VectorXd& x) const {
    if (x.size() != mean_.size()) throw ShapeMismatch("LinearAE: input size mismatch");
    return (basis_ * (x - mean_)).cwiseQuotient(scale_);
}

Eigen::VectorXd LinearAE::encode(const GrayImage& img) const {
    if (img.width() != width_ || img.height() != height_) throw ShapeMismatch("LinearAE: image size mismatch");
    return encode_flat(flatten(img));
}

Eigen::VectorXd LinearAE::decode_flat(const Eigen::VectorXd& z) const {
    if (z.size() != basis_.rows()) throw ShapeMismatch("LinearAE: latent size mismatch");
    return mean_ + basis_.transpose() * z.cwiseProduct(scale_);
}

GrayImage LinearAE::decode(const Eigen::VectorXd& z) const {
    return GrayImage(width_, height_, to_std(decode_flat(z)));
}

nn::Checkpoint LinearAE::to_checkpoint() const {
    nn::Checkpoint c;
    c.meta = {{"model", "linear_ae"}, {"width", width_}, {"height", height_}, {"k", k()}};
    c.arrays.push_back({"mean", {static_cast<int>(mean_.size())}, to_std(mean_)});
    c.arrays.push_back({"basis", {k(), static_cast<int>(basis_.cols())}, to_std_rowmajor(basis_)});
    c.arrays.push_back({"scale", {k()}, to_std(scale_)});
    return c;
}

LinearAE LinearAE::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.meta.value("model", "") != "linear_ae") throw InvalidParameter("checkpoint is not a linear autoencoder");
    const int w = ckpt.meta.at("width").get<int>();
    const int h = ckpt.meta.at("height").get<int>();
    const auto& m = ckpt.at("mean");
    const auto& b = ckpt.at("basis");
    const auto& s = ckpt.at("scale");
    if (b.shape.size() != 2) throw ShapeMismatch("LinearAE checkpoint: basis must be 2-D");
    Eigen::MatrixXd basis(b.shape[0], b.shape[1]);
    for (int r = 0; r < b.shape[0]; ++r)
        for (int c = 0; c < b.shape[1]; ++c) basis(r, c) = b.values[static_cast<std::size_t>(r) * b.shape[1] + c];
    return LinearAE(w, h, Eigen::Map<const Eigen::VectorXd>(m.values.data(), static_cast<Eigen::Index>(m.values.size())),
                    std::move(basis),
                    Eigen::Map<const Eigen::VectorXd>(s.values.data(), static_cast<Eigen::Index>(s.values.size())));
}

// ---------------------------------------------------------------------------
// NoiseSchedule

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw InvalidParameter("noise schedule: need at least one step");
    alpha_bars_.assign(betas_.size() + 1, 1.0);
    for (std::size_t i = 0; i < betas_.size(); ++i) {
        if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) throw InvalidParameter("noise schedule: betas must lie in (0, 1)");
        alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
    }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw InvalidParameter("noise schedule: steps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end >= beta_start)) {
        throw InvalidParameter("noise schedule: need 0 < beta_start <= beta_end");
    }
    const double k = 1000.0 / steps;
    std::vector<double> b(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double f = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        b[static_cast<std::size_t>(i)] = k * (beta_start + f * (beta_end - beta_start));
    }
    return NoiseSchedule(std::move(b));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) { return NoiseSchedule(std::move(betas)); }

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > steps()) throw InvalidParameter("noise schedule: timestep out of range");
    return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps()) throw InvalidParameter("noise schedule: timestep out of range");
    return alpha_bars_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::posterior_variance(int t) const {
    return beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

// ---------------------------------------------------------------------------
// Denoisers

AnalyticDenoiser::AnalyticDenoiser(Eigen::VectorXd mu, Eigen::VectorXd var, const NoiseSchedule& sched)
    : mu_(std::move(mu)), var_(std::move(var)), sched_(sched) {
    if (mu_.size() != var_.size() || mu_.size() == 0) throw ShapeMismatch("analytic denoiser: mu/var size mismatch");
    if ((var_.array() < 0.0).any() || !var_.allFinite()) {
        throw InvalidParameter("analytic denoiser: variances must be finite and non-negative");
    }
}

Eigen::MatrixXd AnalyticDenoiser::predict(const Eigen::MatrixXd& z, int t) const {
    check_t(t, sched_, "analytic denoiser");
    if (z.cols() != mu_.size()) throw ShapeMismatch("analytic denoiser: latent size mismatch");
    const double ab = sched_.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Eigen::MatrixXd out(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        // Posterior mean E[z0 | z_t] = mu + a v / (a^2 v + b^2) (z_t - a mu).
        const double gain = a * var_(j) / (ab * var_(j) + (1.0 - ab));
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double post = mu_(j) + gain * (z(i, j) - a * mu_(j));
            out(i, j) = (z(i, j) - a * post) / b;
        }
    }
    return out;
}

Eigen::VectorXd analytic_eps(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, const Eigen::VectorXd& z_t,
                             int t, const NoiseSchedule& sched) {
    AnalyticDenoiser den(mu, var, sched);
    return den.predict(z_t.transpose(), t).row(0).transpose();
}

void MlpDenoiserConfig::validate() const {
    if (hidden < 1 || embed_dim < 2 || embed_dim % 2 != 0) {
        throw InvalidParameter("mlp denoiser: hidden >= 1 and an even embed_dim >= 2 required");
    }
}

std::vector<double> timestep_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw InvalidParameter("timestep embedding: dim must be even and >= 2");
    const int half = dim / 2;
    std::vector<double> e(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e[static_cast<std::size_t>(2 * i)] = std::sin(t * freq);
        e[static_cast<std::size_t>(2 * i + 1)] = std::cos(t * freq);
    }
    return e;
}

MlpDenoiser::MlpDenoiser(int dim, const MlpDenoiserConfig& cfg, std::uint64_t seed) : dim_(dim), cfg_(cfg) {
    if (dim < 1) throw InvalidParameter("mlp denoiser: latent dimension must be >= 1");
    cfg_.validate();
    Rng rng(seed);
    l1_ = nn::Linear::create(params_, "fc1", dim + cfg_.embed_dim, cfg_.hidden, rng);
    l2_ = nn::Linear::create(params_, "fc2", cfg_.hidden, cfg_.hidden, rng);
    l3_ = nn::Linear::create(params_, "fc3", cfg_.hidden, dim, rng, 0.1);
}

nn::Tensor MlpDenoiser::forward(const nn::Tensor& z, const std::vector<int>& t) const {
    if (z.rank() != 2 || z.dim(1) != dim_ || static_cast<std::size_t>(z.dim(0)) != t.size()) {
        throw ShapeMismatch("mlp denoiser: expected [N, dim] latents with one timestep per row");
    }
    const int n = z.dim(0);
    const int in = dim_ + cfg_.embed_dim;
    std::vector<double> x(static_cast<std::size_t>(n) * in);
    for (int i = 0; i < n; ++i) {
        auto* row = x.data() + static_cast<std::size_t>(i) * in;
        std::copy_n(z.values().data() + static_cast<std::size_t>(i) * dim_, dim_, row);
        const auto e = timestep_embedding(t[static_cast<std::size_t>(i)], cfg_.embed_dim);
        std::copy(e.begin(), e.end(), row + dim_);
    }
    auto h = nn::relu(l1_(nn::Tensor::from_values({n, in}, std::move(x))));
    h = nn::relu(l2_(h));
    return l3_(h);
}

Eigen::MatrixXd MlpDenoiser::predict(const Eigen::MatrixXd& z, int t) const {
    if (z.cols() != dim_) throw ShapeMismatch("mlp denoiser: latent size mismatch");
    nn::NoGradGuard guard;
    const int n = static_cast<int>(z.rows());
    std::vector<double> v(static_cast<std::size_t>(z.size()));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim_; ++j) v[static_cast<std::size_t>(i) * dim_ + j] = z(i, j);
    const auto out = forward(nn::Tensor::from_values({n, dim_}, std::move(v)), std::vector<int>(static_cast<std::size_t>(n), t));
    Eigen::MatrixXd r(n, dim_);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim_; ++j) r(i, j) = out.values()[static_cast<std::size_t>(i) * dim_ + j];
    return r;
}

nn::Checkpoint MlpDenoiser::to_checkpoint(const nn::Adam* opt) const {
    return nn::snapshot(params_, opt,
                        {{"model", "mlp_denoiser"}, {"dim", dim_}, {"hidden", cfg_.hidden}, {"embed_dim", cfg_.embed_dim}});
}

MlpDenoiser MlpDenoiser::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.meta.value("model", "") != "mlp_denoiser") throw InvalidParameter("checkpoint is not an mlp denoiser");
    MlpDenoiser den(ckpt.meta.at("dim").get<int>(),
                    {ckpt.meta.at("hidden").get<int>(), ckpt.meta.at("embed_dim").get<int>()}, 0);
    nn::load_params(den.params_, ckpt);
    return den;
}

// ---------------------------------------------------------------------------
// Forward / reverse processes

Eigen::MatrixXd forward_diffuse(const Eigen::MatrixXd& z0, int t, const NoiseSchedule& sched, Rng& rng) {
    // t = 0 is allowed: alpha_bar(0) == 1 returns z0 unchanged.
    if (t < 0 || t > sched.steps()) throw InvalidParameter("forward_diffuse: timestep out of range");
    const double ab = sched.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Eigen::MatrixXd out(z0.rows(), z0.cols());
    for (Eigen::Index i = 0; i < z0.rows(); ++i)
        for (Eigen::Index j = 0; j < z0.cols(); ++j) out(i, j) = a * z0(i, j) + b * rng.normal();
    return out;
}

Eigen::VectorXd forward_diffuse(const Eigen::VectorXd& z0, int t, const NoiseSchedule& sched, Rng& rng) {
    return forward_diffuse(Eigen::MatrixXd(z0.transpose()), t, sched, rng).row(0).transpose();
}

void DiffTrainConfig::validate() const {
    if (steps < 0 || batch < 1) throw InvalidParameter("diffusion training: steps >= 0 and batch >= 1 required");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidParameter("diffusion training: lr must be >= 0");
}

DiffTrainLog denoiser_train(MlpDenoiser& den, const Eigen::MatrixXd& latents, const NoiseSchedule& sched,
                            const DiffTrainConfig& cfg, Rng& rng, nn::Adam* opt) {
    cfg.validate();
    if (latents.rows() < 1) throw InvalidParameter("diffusion training: no latents");
    if (latents.cols() != den.dim()) throw ShapeMismatch("diffusion training: latent size mismatch");
    nn::Adam local({cfg.lr});
    nn::Adam& adam = opt ? *opt : local;
    auto& params = den.params().params();
    const int k = den.dim();
    const int n = static_cast<int>(latents.rows());
    DiffTrainLog log;
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<double> zt(static_cast<std::size_t>(cfg.batch) * k);
        std::vector<double> eps(zt.size());
        std::vector<int> ts(static_cast<std::size_t>(cfg.batch));
        for (int i = 0; i < cfg.batch; ++i) {
            const int row = rng.uniform_int(0, n - 1);
            const int t = rng.uniform_int(1, sched.steps());
            ts[static_cast<std::size_t>(i)] = t;
            const double a = std::sqrt(sched.alpha_bar(t));
            const double b = std::sqrt(1.0 - sched.alpha_bar(t));
            for (int j = 0; j < k; ++j) {
                const auto o = static_cast<std::size_t>(i) * k + j;
                eps[o] = rng.normal();
                zt[o] = a * latents(row, j) + b * eps[o];
            }
        }
        den.params().zero_grad();
        const auto target = nn::Tensor::from_values({cfg.batch, k}, std::move(eps));
        const auto loss = nn::mse(den.forward(nn::Tensor::from_values({cfg.batch, k}, std::move(zt)), ts), target);
        if (!std::isfinite(loss.item())) throw NumericFailure("train-diff-prior", "non-finite loss");
        loss.backward();
        if (!nn::grads_finite(params)) throw NumericFailure("train-diff-prior", "non-finite gradient");
        adam.step(params);
        log.step_loss.push_back(loss.item());
    }
    return log;
}

Eigen::MatrixXd reverse_sample(const Denoiser& den, const NoiseSchedule& sched, const Eigen::MatrixXd& z_t, Rng& rng,
                               int t_start) {
    if (t_start < 0 || t_start > sched.steps()) throw InvalidParameter("reverse_sample: t_start out of range");
    if (z_t.cols() != den.dim()) throw ShapeMismatch("reverse_sample: latent size mismatch");
    Eigen::MatrixXd z = z_t;
    for (int t = t_start; t >= 1; --t) {
        const Eigen::MatrixXd eps = den.predict(z, t);
        const double beta = sched.beta(t);
        const double coef = beta / std::sqrt(1.0 - sched.alpha_bar(t));
        z = (z - coef * eps) / std::sqrt(1.0 - beta);
        if (t > 1) {
            const double sd = std::sqrt(sched.posterior_variance(t));
            for (Eigen::Index i = 0; i < z.rows(); ++i)
                for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) += sd * rng.normal();
        }
        if (!z.allFinite()) throw NumericFailure("resample", "non-finite latent during reverse sampling");
    }
    return z;
}

Eigen::VectorXd reverse_sample(const Denoiser& den, const NoiseSchedule& sched, const Eigen::VectorXd& z_t, Rng& rng,
                               int t_start) {
    return reverse_sample(den, sched, Eigen::MatrixXd(z_t.transpose()), rng, t_start).row(0).transpose();
}

Sample resample_image(const LinearAE& ae, const Denoiser& den, const NoiseSchedule& sched, const Sample& sample,
                      double strength, Rng& rng) {
    if (!(strength > 0.0 && strength <= 1.0)) throw InvalidParameter("resample: strength must lie in (0, 1]");
    const int t = static_cast<int>(std::ceil(strength * sched.steps() - 1e-9));
    if (t < 1) throw InvalidParameter("resample: strength * T must be at least 1");
    if (den.dim() != ae.k()) throw ShapeMismatch("resample: denoiser and autoencoder latent sizes differ");
    const Eigen::VectorXd x = flatten(sample.image);
    const Eigen::VectorXd z0 = ae.encode(sample.image);
    const Eigen::VectorXd residual = x - ae.decode_flat(z0);
    const Eigen::VectorXd zt = forward_diffuse(z0, t, sched, rng);
    const Eigen::VectorXd z0p = reverse_sample(den, sched, zt, rng, t);
    const Eigen::VectorXd y = ae.decode_flat(z0p) + residual;
    Sample out(GrayImage(sample.image.width(), sample.image.height(), to_std(y)), sample.mask, sample.meta);
    const double l_realis = (z0 - z0p).squaredNorm();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", l_realis);
    out.meta["l_realis"] = buf;
    auto& lineage = out.meta["lineage"];
    lineage = lineage.empty() ? "diff_prior" : lineage + ",diff_prior";
    return out;
}

}  // namespace dmlab
