#pragma once

#include "dmlab/image.hpp"
#include "dmlab/nn/checkpoint.hpp"
#include "dmlab/nn/layers.hpp"
#include "dmlab/rng.hpp"
#include "dmlab/synth.hpp"

#include <Eigen/Core>

#include <memory>
#include <span>
#include <vector>

namespace dmlab {

/// PCA autoencoder over flattened images. Latents are whitened per component:
/// z = (basis * (x - mean)) / scale, with scale the training std of each component.
class LinearAE {
public:
    LinearAE(int width, int height, Eigen::VectorXd mean, Eigen::MatrixXd basis, Eigen::VectorXd scale);

    /// Top-k principal directions via thin SVD of the centred data. Needs at least k images.
    static LinearAE fit(std::span<const GrayImage> images, int k);

    int k() const noexcept { return static_cast<int>(basis_.rows()); }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    /// k x d, orthonormal rows.
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }
    const Eigen::VectorXd& scale() const noexcept { return scale_; }

    Eigen::VectorXd encode(const GrayImage& img) const;
    Eigen::VectorXd encode_flat(const Eigen::VectorXd& x) const;
    /// Unclamped reconstruction, flattened row-major.
    Eigen::VectorXd decode_flat(const Eigen::VectorXd& z) const;
    /// Reconstruction clamped into [0, 1].
    GrayImage decode(const Eigen::VectorXd& z) const;

    nn::Checkpoint to_checkpoint() const;
    static LinearAE from_checkpoint(const nn::Checkpoint& ckpt);

private:
    int width_;
    int height_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd basis_;
    Eigen::VectorXd scale_;
};

/// alpha_bar(0) == 1 by convention; betas are indexed 1..T.
class NoiseSchedule {
public:
    /// Linear betas from beta_start to beta_end, both scaled by 1000 / T.
    static NoiseSchedule linear(int steps = 100, double beta_start = 1e-4, double beta_end = 0.02);
    static NoiseSchedule from_betas(std::vector<double> betas);

    int steps() const noexcept { return static_cast<int>(betas_.size()); }
    double beta(int t) const;
    double alpha(int t) const { return 1.0 - beta(t); }
    double alpha_bar(int t) const;
    /// beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
    double posterior_variance(int t) const;

    const std::vector<double>& betas() const noexcept { return betas_; }

private:
    explicit NoiseSchedule(std::vector<double> betas);

    std::vector<double> betas_;
    std::vector<double> alpha_bars_;  // index 0 holds 1
};

/// Predicts the noise in z_t. Rows of `z` are independent latents.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual int dim() const = 0;
    virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& z, int t) const = 0;
};

/// Exact conditional-mean noise prediction when z0 ~ N(mu, diag(var)).
class AnalyticDenoiser final : public Denoiser {
public:
    /// var may contain zeros (point mass); negative entries are rejected.
    AnalyticDenoiser(Eigen::VectorXd mu, Eigen::VectorXd var, const NoiseSchedule& sched);

    int dim() const override { return static_cast<int>(mu_.size()); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& z, int t) const override;

private:
    Eigen::VectorXd mu_;
    Eigen::VectorXd var_;
    NoiseSchedule sched_;
};

/// Single-latent form of AnalyticDenoiser::predict.
Eigen::VectorXd analytic_eps(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, const Eigen::VectorXd& z_t,
                             int t, const NoiseSchedule& sched);

struct MlpDenoiserConfig {
    int hidden = 256;
    int embed_dim = 32;

    void validate() const;
};

/// [z_t, sinusoidal(t)] -> hidden -> hidden -> dim, ReLU between layers.
class MlpDenoiser final : public Denoiser {
public:
    MlpDenoiser(int dim, const MlpDenoiserConfig& cfg, std::uint64_t seed);
    MlpDenoiser(const MlpDenoiser&) = delete;
    MlpDenoiser& operator=(const MlpDenoiser&) = delete;
    MlpDenoiser(MlpDenoiser&&) = default;
    MlpDenoiser& operator=(MlpDenoiser&&) = default;

    int dim() const override { return dim_; }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& z, int t) const override;
    /// Differentiable forward over a batch with one timestep per row.
    nn::Tensor forward(const nn::Tensor& z, const std::vector<int>& t) const;

    nn::ParamSet& params() noexcept { return params_; }
    const nn::ParamSet& params() const noexcept { return params_; }
    const MlpDenoiserConfig& config() const noexcept { return cfg_; }

    nn::Checkpoint to_checkpoint(const nn::Adam* opt = nullptr) const;
    static MlpDenoiser from_checkpoint(const nn::Checkpoint& ckpt);

private:
    int dim_;
    MlpDenoiserConfig cfg_;
    nn::ParamSet params_;
    nn::Linear l1_;
    nn::Linear l2_;
    nn::Linear l3_;
};

/// sin/cos features of t at geometrically spaced frequencies.
std::vector<double> timestep_embedding(int t, int dim);

Eigen::VectorXd forward_diffuse(const Eigen::VectorXd& z0, int t, const NoiseSchedule& sched, Rng& rng);
Eigen::MatrixXd forward_diffuse(const Eigen::MatrixXd& z0, int t, const NoiseSchedule& sched, Rng& rng);

struct DiffTrainConfig {
    int steps = 2000;
    double lr = 1e-3;
    int batch = 64;

    void validate() const;
};

/// One entry per optimizer step.
struct DiffTrainLog {
    std::vector<double> step_loss;
};

/// Noise-matching objective: t ~ U{1..T}, eps ~ N(0, I), minimize mse(eps, net(sqrt(ab) z0 + sqrt(1 - ab) eps, t)).
/// `latents` holds one z0 per row.
DiffTrainLog denoiser_train(MlpDenoiser& den, const Eigen::MatrixXd& latents, const NoiseSchedule& sched,
                            const DiffTrainConfig& cfg, Rng& rng, nn::Adam* opt = nullptr);

/// Ancestral sampling from t_start down to 0; no noise is added on the last step.
Eigen::MatrixXd reverse_sample(const Denoiser& den, const NoiseSchedule& sched, const Eigen::MatrixXd& z_t,
                               Rng& rng, int t_start);
Eigen::VectorXd reverse_sample(const Denoiser& den, const NoiseSchedule& sched, const Eigen::VectorXd& z_t,
                               Rng& rng, int t_start);

inline constexpr double kDefaultStrength = 0.6;

/// Partial noising to t = ceil(strength * T) and reverse sampling in latent space.
/// The part of the image outside the latent subspace is carried over unchanged.
/// meta["l_realis"] holds ||z0 - z0'||^2.
Sample resample_image(const LinearAE& ae, const Denoiser& den, const NoiseSchedule& sched, const Sample& sample,
                      double strength, Rng& rng);

}  // namespace dmlab
