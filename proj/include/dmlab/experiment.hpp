#pragma once

#include "dmlab/augment.hpp"
#include "dmlab/baselines.hpp"
#include "dmlab/dataset.hpp"
#include "dmlab/detector.hpp"
#include "dmlab/diff_prior.hpp"
#include "dmlab/errors.hpp"
#include "dmlab/metrics.hpp"
#include "dmlab/pixel_prior.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dmlab {

/// Malformed or out-of-schema experiment configuration.
class ConfigError : public InvalidParameter {
public:
    using InvalidParameter::InvalidParameter;
};

inline constexpr int kConfigSchemaVersion = 1;

enum class AugmentKind { None, Mosaic, CutMix, Mixup, PixelPrior, DiffMosaic };

std::string to_string(AugmentKind kind);
/// Accepts "none" and "baseline" for AugmentKind::None.
AugmentKind parse_augment_kind(const std::string& name);

struct DiffPriorSettings {
    int latent_dim = 32;
    int steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    MlpDenoiserConfig denoiser{};
    DiffTrainConfig train{1500, 1e-3, 64};
    double strength = kDefaultStrength;
};

struct ExperimentConfig {
    std::uint64_t seed = 2024;
    int scenes = 64;
    DatasetConfig dataset{};

    std::vector<AugmentKind> arms{AugmentKind::None, AugmentKind::Mosaic, AugmentKind::PixelPrior,
                                  AugmentKind::DiffMosaic};
    /// Augmented samples added to the real training split for every non-baseline arm.
    int count = 32;
    AugmentKind sweep_arm = AugmentKind::DiffMosaic;
    std::vector<int> sweep_counts{125, 250, 400};
    /// Mixup blend weight is drawn uniformly from this range.
    Range mixup_lambda{0.3, 0.7};

    DegradeConfig degrade{};
    PasteConfig paste{};

    PixelPriorConfig pixel_prior{16, 2};
    PixelPriorTrainConfig pixel_prior_train{8, 1e-3, 4, 2};

    DiffPriorSettings diff_prior{};

    DetectorConfig detector{8};
    DetectorTrainConfig detector_train{20, 2e-3, 4, {}};
    double threshold = 0.5;

    double match_distance = kDefaultMatchDistance;
    /// Test images qualify when every target's realized SCR is at least this.
    double min_test_scr = 5.0;
    bool macro = false;

    void validate() const;

    /// Strict parse: unknown keys, wrong types and a schema_version mismatch raise ConfigError.
    /// Missing keys keep their defaults.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Seed for a named stage of a run.
std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& stage);

/// Samples whose minimum realized SCR reaches `min_scr`; target-free scenes are kept.
std::vector<Sample> easy_split(const std::vector<Sample>& samples, double min_scr);

/// Shared generative models used by the pixel_prior and diff_mosaic arms.
struct Priors {
    std::optional<PixelPriorNet> pixel_prior;
    TrainLog pixel_prior_log;
    std::optional<LinearAE> ae;
    std::optional<MlpDenoiser> denoiser;
    std::optional<NoiseSchedule> schedule;
    DiffTrainLog denoiser_log;
};

/// Trains only the priors the given arms need, on the real training split.
Priors train_priors(const ExperimentConfig& cfg, const std::vector<Sample>& train,
                    const std::vector<AugmentKind>& arms);

/// `count` augmented samples drawn from the real training split with the arm's stage seed.
/// The stream is sequential, so a smaller count yields a prefix of a larger one.
std::vector<Sample> augment_pool(const ExperimentConfig& cfg, AugmentKind arm, int count,
                                 const std::vector<Sample>& train, const Priors& priors);

struct ArmResult {
    std::string arm;
    int augmented = 0;
    int train_size = 0;
    MetricSet metrics;
    double final_loss = 0.0;
    /// Quadrant discrepancy over the augmented pool; absent for an empty pool.
    std::optional<double> pool_qd_mean;
    std::optional<double> pool_qd_std;
    std::optional<double> l_realis_mean;
    std::string checkpoint;
};

struct RunReport {
    nlohmann::json json;
    std::string table;
};

/// One detector per arm, trained on real + arm-specific augmented data and
/// evaluated on the easy test split. With a run directory, writes
/// config.resolved, data/, checkpoints/ and reports/; report.json is rewritten
/// after every arm so a failed run keeps its finished rows.
RunReport run_ablation(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& run_dir = {});

/// Like run_ablation for `cfg.sweep_arm`, one row per entry of `cfg.sweep_counts` in ascending order.
RunReport run_scale_sweep(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& run_dir = {});

/// Evaluates a detector on samples exactly as the ablation rows do.
MetricSet evaluate_detector(const DetectorNet& net, const std::vector<Sample>& samples, double threshold,
                            double match_distance, bool macro);

nlohmann::json metrics_to_json(const MetricSet& m);

/// Text table with one row per method: IoU (%), Pd (%), Fa (x1e-6).
std::string format_metric_table(const std::vector<std::pair<std::string, MetricSet>>& rows);

}  // namespace dmlab
