#include "dmlab/experiment.hpp"

#include "dmlab/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace dmlab {

using nlohmann::json;

std::string to_string(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::None: return "baseline";
        case AugmentKind::Mosaic: return "mosaic";
        case AugmentKind::CutMix: return "cutmix";
        case AugmentKind::Mixup: return "mixup";
        case AugmentKind::PixelPrior: return "pixel_prior";
        case AugmentKind::DiffMosaic: return "diff_mosaic";
    }
    return "unknown";
}

AugmentKind parse_augment_kind(const std::string& name) {
    if (name == "none" || name == "baseline") return AugmentKind::None;
    if (name == "mosaic") return AugmentKind::Mosaic;
    if (name == "cutmix") return AugmentKind::CutMix;
    if (name == "mixup") return AugmentKind::Mixup;
    if (name == "pixel_prior") return AugmentKind::PixelPrior;
    if (name == "diff_mosaic") return AugmentKind::DiffMosaic;
    throw ConfigError("unknown augmentation arm: " + name);
}

namespace {

// Reads one JSON object section, rejecting unknown keys and mistyped values.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    const json* raw(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void get(const char* key, int& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_number_integer()) fail(key, "expected an integer");
            const auto x = v->get<long long>();
            if (x < INT32_MIN || x > INT32_MAX) fail(key, "integer out of range");
            out = static_cast<int>(x);
        }
    }
    void get(const char* key, std::uint64_t& out) {
        if (const auto* v = raw(key)) {
            if (v->is_number_unsigned()) {
                out = v->get<std::uint64_t>();
            } else if (v->is_number_integer() && v->get<long long>() >= 0) {
                out = static_cast<std::uint64_t>(v->get<long long>());
            } else {
                fail(key, "expected a non-negative integer");
            }
        }
    }
    void get(const char* key, double& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_number()) fail(key, "expected a number");
            out = v->get<double>();
        }
    }
    void get(const char* key, bool& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_string()) fail(key, "expected a string");
            out = v->get<std::string>();
        }
    }
    void get(const char* key, Range& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
                fail(key, "expected [lo, hi]");
            }
            out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
        }
    }
    void get(const char* key, std::vector<int>& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_array()) fail(key, "expected an array of integers");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_number_integer()) fail(key, "expected an array of integers");
                out.push_back(x.get<int>());
            }
        }
    }
    void get(const char* key, std::vector<std::string>& out) {
        if (const auto* v = raw(key)) {
            if (!v->is_array()) fail(key, "expected an array of strings");
            out.clear();
            for (const auto& x : *v) {
                if (!x.is_string()) fail(key, "expected an array of strings");
                out.push_back(x.get<std::string>());
            }
        }
    }

    std::optional<Section> child(const char* key) {
        if (const auto* v = raw(key)) return Section(*v, path_ + "." + key);
        return std::nullopt;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
        }
    }

    [[noreturn]] void fail(const char* key, const std::string& what) const {
        throw ConfigError(path_ + "." + key + ": " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

template <class F>
void with_section(Section& parent, const char* key, F&& f) {
    if (auto s = parent.child(key)) {
        f(*s);
        s->finish();
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    const auto check = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    try {
        check(scenes >= 1, "dataset.scenes must be >= 1");
        dataset.validate();
        check(dataset.scene.size % 4 == 0, "dataset.size must be a multiple of 4 for the detector");
        check(!arms.empty(), "augmentation.arms must not be empty");
        for (std::size_t i = 0; i < arms.size(); ++i)
            for (std::size_t j = i + 1; j < arms.size(); ++j)
                check(arms[i] != arms[j], "augmentation.arms lists '" + to_string(arms[i]) + "' twice");
        check(count >= 0, "augmentation.count must be >= 0");
        check(!sweep_counts.empty(), "augmentation.sweep_counts must not be empty");
        for (int c : sweep_counts) check(c >= 0, "augmentation.sweep_counts entries must be >= 0");
        check(mixup_lambda.lo >= 0.0 && mixup_lambda.lo <= mixup_lambda.hi && mixup_lambda.hi <= 1.0,
              "augmentation.mixup_lambda must satisfy 0 <= lo <= hi <= 1");
        degrade.validate();
        paste.validate();
        pixel_prior.validate();
        pixel_prior_train.validate();
        check(diff_prior.latent_dim >= 1, "diff_prior.latent_dim must be >= 1");
        check(diff_prior.steps >= 1, "diff_prior.steps must be >= 1");
        (void)NoiseSchedule::linear(diff_prior.steps, diff_prior.beta_start, diff_prior.beta_end);
        diff_prior.denoiser.validate();
        diff_prior.train.validate();
        check(diff_prior.strength > 0.0 && diff_prior.strength <= 1.0, "diff_prior.strength must lie in (0, 1]");
        detector.validate();
        detector_train.validate();
        check(threshold > 0.0 && threshold < 1.0, "detector.threshold must lie in (0, 1)");
        check(match_distance >= 0.0 && std::isfinite(match_distance), "eval.match_distance must be >= 0");
        check(std::isfinite(min_test_scr), "eval.min_test_scr must be finite");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    Section root(j, "config");
    int version = -1;
    root.get("schema_version", version);
    if (version != kConfigSchemaVersion) {
        throw ConfigError("config.schema_version must be " + std::to_string(kConfigSchemaVersion));
    }
    root.get("seed", c.seed);

    with_section(root, "dataset", [&](Section& s) {
        auto& sc = c.dataset.scene;
        s.get("scenes", c.scenes);
        s.get("size", sc.size);
        std::string name = to_string(sc.background);
        s.get("background", name);
        try {
            sc.background = parse_background_kind(name);
            name = to_string(sc.target_kind);
            s.get("target_kind", name);
            sc.target_kind = parse_target_kind(name);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config.dataset: ") + e.what());
        }
        s.get("vary_background", c.dataset.vary_background);
        s.get("min_targets", c.dataset.min_targets);
        s.get("max_targets", c.dataset.max_targets);
        Range scr{sc.scr_min, sc.scr_max};
        s.get("scr_range", scr);
        sc.scr_min = scr.lo;
        sc.scr_max = scr.hi;
        s.get("sensor_noise", sc.sensor_noise);
        s.get("octaves", sc.octaves);
        s.get("train_fraction", c.dataset.train_fraction);
    });

    with_section(root, "augmentation", [&](Section& s) {
        std::vector<std::string> names;
        s.get("arms", names);
        if (s.raw("arms")) {
            c.arms.clear();
            for (const auto& n : names) c.arms.push_back(parse_augment_kind(n));
        }
        s.get("count", c.count);
        std::string sweep = to_string(c.sweep_arm);
        s.get("sweep_arm", sweep);
        c.sweep_arm = parse_augment_kind(sweep);
        s.get("sweep_counts", c.sweep_counts);
        s.get("mixup_lambda", c.mixup_lambda);
    });

    with_section(root, "degrade", [&](Section& s) {
        s.get("orders", c.degrade.orders);
        s.get("blur_sigma", c.degrade.blur_sigma);
        s.get("resize_scale", c.degrade.resize_scale);
        s.get("noise_sigma", c.degrade.noise_sigma);
    });

    with_section(root, "paste", [&](Section& s) {
        s.get("region_frac", c.paste.region_frac);
        s.get("invert_convention", c.paste.invert_convention);
    });

    with_section(root, "pixel_prior", [&](Section& s) {
        s.get("channels", c.pixel_prior.channels);
        s.get("blocks", c.pixel_prior.blocks);
        s.get("epochs", c.pixel_prior_train.epochs);
        s.get("lr", c.pixel_prior_train.lr);
        s.get("batch", c.pixel_prior_train.batch);
        s.get("variants", c.pixel_prior_train.variants);
    });

    with_section(root, "diff_prior", [&](Section& s) {
        auto& d = c.diff_prior;
        s.get("latent_dim", d.latent_dim);
        s.get("steps", d.steps);
        s.get("beta_start", d.beta_start);
        s.get("beta_end", d.beta_end);
        s.get("hidden", d.denoiser.hidden);
        s.get("embed_dim", d.denoiser.embed_dim);
        s.get("train_steps", d.train.steps);
        s.get("lr", d.train.lr);
        s.get("batch", d.train.batch);
        s.get("strength", d.strength);
    });

    with_section(root, "detector", [&](Section& s) {
        s.get("channels", c.detector.channels);
        s.get("epochs", c.detector_train.epochs);
        s.get("lr", c.detector_train.lr);
        s.get("batch", c.detector_train.batch);
        s.get("alpha", c.detector_train.loss.alpha);
        s.get("per_image", c.detector_train.loss.per_image);
        s.get("threshold", c.threshold);
    });

    with_section(root, "eval", [&](Section& s) {
        s.get("match_distance", c.match_distance);
        s.get("min_test_scr", c.min_test_scr);
        s.get("macro", c.macro);
    });

    root.finish();
    c.validate();
    return c;
}

json ExperimentConfig::to_json() const {
    const auto& sc = dataset.scene;
    json arm_names = json::array();
    for (auto a : arms) arm_names.push_back(to_string(a));
    return {
        {"schema_version", kConfigSchemaVersion},
        {"seed", seed},
        {"dataset",
         {{"scenes", scenes},
          {"size", sc.size},
          {"background", to_string(sc.background)},
          {"vary_background", dataset.vary_background},
          {"target_kind", to_string(sc.target_kind)},
          {"min_targets", dataset.min_targets},
          {"max_targets", dataset.max_targets},
          {"scr_range", json::array({sc.scr_min, sc.scr_max})},
          {"sensor_noise", sc.sensor_noise},
          {"octaves", sc.octaves},
          {"train_fraction", dataset.train_fraction}}},
        {"augmentation",
         {{"arms", arm_names},
          {"count", count},
          {"sweep_arm", to_string(sweep_arm)},
          {"sweep_counts", sweep_counts},
          {"mixup_lambda", range_json(mixup_lambda)}}},
        {"degrade",
         {{"orders", degrade.orders},
          {"blur_sigma", range_json(degrade.blur_sigma)},
          {"resize_scale", range_json(degrade.resize_scale)},
          {"noise_sigma", range_json(degrade.noise_sigma)}}},
        {"paste", {{"region_frac", range_json(paste.region_frac)}, {"invert_convention", paste.invert_convention}}},
        {"pixel_prior",
         {{"channels", pixel_prior.channels},
          {"blocks", pixel_prior.blocks},
          {"epochs", pixel_prior_train.epochs},
          {"lr", pixel_prior_train.lr},
          {"batch", pixel_prior_train.batch},
          {"variants", pixel_prior_train.variants}}},
        {"diff_prior",
         {{"latent_dim", diff_prior.latent_dim},
          {"steps", diff_prior.steps},
          {"beta_start", diff_prior.beta_start},
          {"beta_end", diff_prior.beta_end},
          {"hidden", diff_prior.denoiser.hidden},
          {"embed_dim", diff_prior.denoiser.embed_dim},
          {"train_steps", diff_prior.train.steps},
          {"lr", diff_prior.train.lr},
          {"batch", diff_prior.train.batch},
          {"strength", diff_prior.strength}}},
        {"detector",
         {{"channels", detector.channels},
          {"epochs", detector_train.epochs},
          {"lr", detector_train.lr},
          {"batch", detector_train.batch},
          {"alpha", detector_train.loss.alpha},
          {"per_image", detector_train.loss.per_image},
          {"threshold", threshold}}},
        {"eval", {{"match_distance", match_distance}, {"min_test_scr", min_test_scr}, {"macro", macro}}},
    };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, const std::string& stage) {
    return derive_seed(cfg.seed, stage);
}

std::vector<Sample> easy_split(const std::vector<Sample>& samples, double min_scr) {
    std::vector<Sample> out;
    for (const auto& s : samples) {
        const auto scr = min_realized_scr(s);
        if (!scr || *scr >= min_scr) out.push_back(s);
    }
    return out;
}

namespace {

bool needs_pixel_prior(AugmentKind a) { return a == AugmentKind::PixelPrior || a == AugmentKind::DiffMosaic; }

}  // namespace

Priors train_priors(const ExperimentConfig& cfg, const std::vector<Sample>& train,
                    const std::vector<AugmentKind>& arms) {
    Priors p;
    const bool want_pp = std::any_of(arms.begin(), arms.end(), needs_pixel_prior);
    const bool want_diff = std::find(arms.begin(), arms.end(), AugmentKind::DiffMosaic) != arms.end();
    if (want_pp) {
        p.pixel_prior.emplace(cfg.pixel_prior, stage_seed(cfg, "pixel_prior/init"));
        Rng rng(stage_seed(cfg, "pixel_prior/train"));
        p.pixel_prior_log = pp_train(*p.pixel_prior, train, cfg.degrade, cfg.paste, cfg.pixel_prior_train, rng);
    }
    if (want_diff) {
        const auto& d = cfg.diff_prior;
        std::vector<GrayImage> images;
        for (const auto& s : train) images.push_back(s.image);
        p.ae.emplace(LinearAE::fit(images, d.latent_dim));
        Eigen::MatrixXd latents(static_cast<Eigen::Index>(images.size()), d.latent_dim);
        for (std::size_t i = 0; i < images.size(); ++i) {
            latents.row(static_cast<Eigen::Index>(i)) = p.ae->encode(images[i]).transpose();
        }
        p.schedule.emplace(NoiseSchedule::linear(d.steps, d.beta_start, d.beta_end));
        p.denoiser.emplace(d.latent_dim, d.denoiser, stage_seed(cfg, "diff_prior/init"));
        Rng rng(stage_seed(cfg, "diff_prior/train"));
        p.denoiser_log = denoiser_train(*p.denoiser, latents, *p.schedule, d.train, rng);
    }
    return p;
}

std::vector<Sample> augment_pool(const ExperimentConfig& cfg, AugmentKind arm, int count,
                                 const std::vector<Sample>& train, const Priors& priors) {
    if (arm == AugmentKind::None || count == 0) return {};
    if (train.empty()) throw InvalidParameter("augmentation needs a non-empty training split");
    if (needs_pixel_prior(arm) && !priors.pixel_prior) throw InvalidParameter("pixel prior was not trained");
    if (arm == AugmentKind::DiffMosaic && !(priors.ae && priors.denoiser && priors.schedule)) {
        throw InvalidParameter("diffusion prior was not trained");
    }
    Rng rng(stage_seed(cfg, "augment/" + to_string(arm)));
    const int size = cfg.dataset.scene.size;
    const auto pick = [&](int n) {
        std::vector<Sample> v;
        for (int i = 0; i < n; ++i) v.push_back(train[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(train.size()) - 1))]);
        return v;
    };
    std::vector<Sample> pool;
    pool.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        switch (arm) {
            case AugmentKind::Mosaic: pool.push_back(mosaic(pick(4), size, rng)); break;
            case AugmentKind::CutMix: {
                const auto ab = pick(2);
                pool.push_back(cutmix(ab[0], ab[1], rng));
                break;
            }
            case AugmentKind::Mixup: {
                const auto ab = pick(2);
                pool.push_back(mixup(ab[0], ab[1], cfg.mixup_lambda.draw(rng)));
                break;
            }
            case AugmentKind::PixelPrior: {
                const auto m = mosaic(pick(4), size, rng);
                pool.push_back(harmonize(*priors.pixel_prior, m, cfg.degrade, cfg.paste, rng));
                break;
            }
            case AugmentKind::DiffMosaic: {
                const auto m = mosaic(pick(4), size, rng);
                const auto h = harmonize(*priors.pixel_prior, m, cfg.degrade, cfg.paste, rng);
                pool.push_back(resample_image(*priors.ae, *priors.denoiser, *priors.schedule, h,
                                              cfg.diff_prior.strength, rng));
                break;
            }
            case AugmentKind::None: break;
        }
    }
    return pool;
}

MetricSet evaluate_detector(const DetectorNet& net, const std::vector<Sample>& samples, double threshold,
                            double match_distance, bool macro) {
    std::vector<BinaryMask> preds;
    std::vector<BinaryMask> gts;
    for (const auto& s : samples) {
        preds.push_back(det_predict(net, s.image, threshold));
        gts.push_back(s.mask);
    }
    return evaluate_set(preds, gts, match_distance, macro);
}

json metrics_to_json(const MetricSet& m) {
    return {{"iou", m.iou},
            {"pd", m.pd},
            {"fa", m.fa},
            {"inter", m.inter},
            {"union", m.uni},
            {"correct", m.correct},
            {"targets", m.targets},
            {"false_pixels", m.false_pixels},
            {"pixels", m.pixels},
            {"images", m.images}};
}

std::string format_metric_table(const std::vector<std::pair<std::string, MetricSet>>& rows) {
    std::size_t width = 6;
    for (const auto& r : rows) width = std::max(width, r.first.size());
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s  %8s  %8s  %10s\n", static_cast<int>(width), "Method", "IoU(%)", "Pd(%)",
                  "Fa(1e-6)");
    out += buf;
    out += std::string(width + 34, '-') + "\n";
    for (const auto& [name, m] : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %8.2f  %8.2f  %10.2f\n", static_cast<int>(width), name.c_str(),
                      100.0 * m.iou, 100.0 * m.pd, 1e6 * m.fa);
        out += buf;
    }
    return out;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json row_json(const ArmResult& r) {
    return {{"arm", r.arm},
            {"augmented", r.augmented},
            {"train_size", r.train_size},
            {"metrics", metrics_to_json(r.metrics)},
            {"final_loss", std::isfinite(r.final_loss) ? json(r.final_loss) : json(nullptr)},
            {"pool_qd_mean", opt_json(r.pool_qd_mean)},
            {"pool_qd_std", opt_json(r.pool_qd_std)},
            {"l_realis_mean", opt_json(r.l_realis_mean)},
            {"checkpoint", r.checkpoint}};
}

struct PoolStats {
    std::optional<double> qd_mean, qd_std, l_realis_mean;
};

PoolStats pool_stats(const std::vector<Sample>& pool) {
    PoolStats st;
    if (pool.empty()) return st;
    double sum = 0.0;
    double sq = 0.0;
    double lr_sum = 0.0;
    std::size_t lr_n = 0;
    for (const auto& s : pool) {
        const double q = quadrant_stats(s.image).quadrant_discrepancy;
        sum += q;
        sq += q * q;
        if (auto it = s.meta.find("l_realis"); it != s.meta.end()) {
            lr_sum += std::stod(it->second);
            ++lr_n;
        }
    }
    const double n = static_cast<double>(pool.size());
    st.qd_mean = sum / n;
    st.qd_std = std::sqrt(std::max(0.0, sq / n - (sum / n) * (sum / n)));
    if (lr_n) st.l_realis_mean = lr_sum / static_cast<double>(lr_n);
    return st;
}

// Shared state of one ablation-style run.
class Run {
public:
    Run(const ExperimentConfig& cfg, std::optional<std::filesystem::path> dir, std::string kind)
        : cfg_(cfg), dir_(std::move(dir)), kind_(std::move(kind)) {
        cfg_.validate();
        if (dir_) {
            std::filesystem::create_directories(*dir_ / "data");
            std::filesystem::create_directories(*dir_ / "checkpoints");
            std::filesystem::create_directories(*dir_ / "reports");
            write_text(*dir_ / "config.resolved", cfg_.to_json().dump(2) + "\n");
        }
        data_ = make_dataset(cfg_.scenes, cfg_.dataset, stage_seed(cfg_, "dataset"));
        train_ = data_.train();
        test_ = easy_split(data_.test(), cfg_.min_test_scr);
        if (dir_) write_dataset(*dir_ / "data" / "real", data_.samples, data_.is_train, data_.manifest);
        if (train_.empty()) throw InvalidParameter("dataset has an empty training split");
        if (test_.empty()) throw InvalidParameter("no test image reaches the minimum SCR");
    }

    void prepare_priors(const std::vector<AugmentKind>& arms) {
        priors_ = train_priors(cfg_, train_, arms);
        if (!dir_) return;
        if (priors_.pixel_prior) {
            nn::write_checkpoint(*dir_ / "checkpoints" / "pixel_prior.ckpt", pp_checkpoint(*priors_.pixel_prior));
        }
        if (priors_.ae) nn::write_checkpoint(*dir_ / "checkpoints" / "linear_ae.ckpt", priors_.ae->to_checkpoint());
        if (priors_.denoiser) {
            nn::write_checkpoint(*dir_ / "checkpoints" / "denoiser.ckpt", priors_.denoiser->to_checkpoint());
        }
    }

    std::vector<Sample> pool(AugmentKind arm, int count) {
        auto p = augment_pool(cfg_, arm, count, train_, priors_);
        if (dir_ && !p.empty()) {
            const std::vector<bool> all_train(p.size(), true);
            write_dataset(*dir_ / "data" / to_string(arm), p, all_train,
                          {{"format", "dmlab-dataset/1"}, {"augmentation", to_string(arm)}, {"n", p.size()}});
        }
        return p;
    }

    ArmResult train_arm(AugmentKind arm, const std::vector<Sample>& pool, int count, const std::string& ckpt_name) {
        const std::string name = to_string(arm);
        std::vector<Sample> train = train_;
        train.insert(train.end(), pool.begin(), pool.begin() + count);
        DetectorNet net(cfg_.detector, stage_seed(cfg_, "detector/" + name + "/init"));
        Rng rng(stage_seed(cfg_, "detector/" + name + "/train"));
        const auto log = det_train(net, train, cfg_.detector_train, rng);

        ArmResult r;
        r.arm = name;
        r.augmented = count;
        r.train_size = static_cast<int>(train.size());
        r.metrics = evaluate_detector(net, test_, cfg_.threshold, cfg_.match_distance, cfg_.macro);
        r.final_loss = log.epoch_loss.empty() ? std::nan("") : log.epoch_loss.back();
        const auto st = pool_stats(std::vector<Sample>(pool.begin(), pool.begin() + count));
        r.pool_qd_mean = st.qd_mean;
        r.pool_qd_std = st.qd_std;
        r.l_realis_mean = st.l_realis_mean;
        r.checkpoint = "checkpoints/" + ckpt_name;
        if (dir_) nn::write_checkpoint(*dir_ / r.checkpoint, det_checkpoint(net));
        rows_.push_back(r);
        if (dir_) write_report("partial");
        return r;
    }

    json report_json(const std::string& status, const std::string& error = {}) const {
        json rows = json::array();
        for (const auto& r : rows_) rows.push_back(row_json(r));
        std::vector<const ArmResult*> order;
        for (const auto& r : rows_) order.push_back(&r);
        std::stable_sort(order.begin(), order.end(),
                         [](const ArmResult* a, const ArmResult* b) { return a->metrics.iou > b->metrics.iou; });
        json ordering = json::array();
        for (const auto* r : order) ordering.push_back(r->arm + (kind_ == "scale_sweep"
                                                                    ? "@" + std::to_string(r->augmented)
                                                                    : ""));
        json priors = json::object();
        if (!priors_.pixel_prior_log.epoch_loss.empty()) {
            priors["pixel_prior_final_loss"] = priors_.pixel_prior_log.epoch_loss.back();
        }
        if (!priors_.denoiser_log.step_loss.empty()) {
            priors["denoiser_final_loss"] = priors_.denoiser_log.step_loss.back();
        }
        json j = {{"format", "dmlab-report/1"},
                  {"kind", kind_},
                  {"status", status},
                  {"seed", cfg_.seed},
                  {"config_sha256", sha256_hex(cfg_.to_json().dump())},
                  {"dataset",
                   {{"scenes", data_.samples.size()},
                    {"train", train_.size()},
                    {"test", data_.samples.size() - train_.size()},
                    {"test_easy", test_.size()},
                    {"min_test_scr", cfg_.min_test_scr}}},
                  {"priors", priors},
                  {"rows", rows},
                  {"ordering_by_iou", ordering}};
        if (!error.empty()) j["error"] = error;
        return j;
    }

    std::string table() const {
        std::vector<std::pair<std::string, MetricSet>> rows;
        for (const auto& r : rows_) rows.emplace_back(r.arm + " (+" + std::to_string(r.augmented) + ")", r.metrics);
        return format_metric_table(rows);
    }

    void write_report(const std::string& status, const std::string& error = {}) const {
        write_text(*dir_ / "reports" / "report.json", report_json(status, error).dump(2) + "\n");
        write_text(*dir_ / "reports" / "table.txt", table());
    }

    RunReport finish() const {
        if (dir_) write_report("complete");
        return {report_json("complete"), table()};
    }

    // Records the failure next to any finished rows, then lets the caller rethrow.
    void fail(const std::exception& e) const noexcept {
        if (!dir_) return;
        try {
            write_report("failed", e.what());
        } catch (...) {
        }
    }

private:
    static void write_text(const std::filesystem::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << text;
    }

    ExperimentConfig cfg_;
    std::optional<std::filesystem::path> dir_;
    std::string kind_;
    Dataset data_;
    std::vector<Sample> train_;
    std::vector<Sample> test_;
    Priors priors_;
    std::vector<ArmResult> rows_;
};

}  // namespace

RunReport run_ablation(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& run_dir) {
    Run run(cfg, run_dir, "ablation");
    try {
        run.prepare_priors(cfg.arms);
        for (auto arm : cfg.arms) {
            const int count = arm == AugmentKind::None ? 0 : cfg.count;
            const auto pool = run.pool(arm, count);
            run.train_arm(arm, pool, count, "detector_" + to_string(arm) + ".ckpt");
        }
    } catch (const std::exception& e) {
        run.fail(e);
        throw;
    }
    return run.finish();
}

RunReport run_scale_sweep(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& run_dir) {
    Run run(cfg, run_dir, "scale_sweep");
    try {
        auto counts = cfg.sweep_counts;
        std::sort(counts.begin(), counts.end());
        counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
        if (cfg.sweep_arm == AugmentKind::None) counts = {0};
        run.prepare_priors({cfg.sweep_arm});
        // Smaller counts use a prefix of the largest pool.
        const auto pool = run.pool(cfg.sweep_arm, counts.back());
        for (int c : counts) {
            run.train_arm(cfg.sweep_arm, pool, c,
                          "detector_" + to_string(cfg.sweep_arm) + "_n" + std::to_string(c) + ".ckpt");
        }
    } catch (const std::exception& e) {
        run.fail(e);
        throw;
    }
    return run.finish();
}

}  // namespace dmlab
