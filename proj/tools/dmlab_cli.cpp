// dmlab: command line front end for datasets, augmentation, training,
// detection, evaluation and ablation reports.
//
// Exit codes: 0 success, 2 missing input / invalid config or arguments,
// 3 numeric failure (the message names the stage), 1 anything else.

#include "dmlab/augment.hpp"
#include "dmlab/baselines.hpp"
#include "dmlab/dataset.hpp"
#include "dmlab/detector.hpp"
#include "dmlab/diff_prior.hpp"
#include "dmlab/errors.hpp"
#include "dmlab/experiment.hpp"
#include "dmlab/hash.hpp"
#include "dmlab/image_io.hpp"
#include "dmlab/metrics.hpp"
#include "dmlab/pixel_prior.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dmlab;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNumeric = 3;

struct Common {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

// Resolved per invocation: config (file or defaults) with --seed applied.
struct Context {
    ExperimentConfig cfg;
    std::string command;
    json inputs = json::array();
    json params = json::object();
};

void require_exists(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw IoError(std::string("missing ") + what + ": " + p.string());
}

void require_fresh(const fs::path& p) {
    if (fs::exists(p) && !(fs::is_directory(p) && fs::is_empty(p))) {
        throw IoError("refusing to overwrite existing output: " + p.string());
    }
}

// Digest of a file, or of every file under a directory keyed by relative path.
std::string content_hash(const fs::path& p) {
    if (fs::is_regular_file(p)) return sha256_file(p);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& f : files) listing += fs::relative(f, p).generic_string() + " " + sha256_file(f) + "\n";
    return sha256_hex(listing);
}

void add_input(Context& ctx, const std::string& role, const fs::path& p) {
    ctx.inputs.push_back({{"role", role}, {"path", p.string()}, {"sha256", content_hash(p)}});
}

// Sidecar next to the output: <dir>/sidecar.json for directories, <file>.json otherwise.
void write_sidecar(const Context& ctx, const fs::path& out) {
    const bool is_dir = fs::is_directory(out);
    const fs::path path = is_dir ? out / "sidecar.json" : fs::path(out.string() + ".json");
    json outputs = json::array();
    if (is_dir) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(out))
            if (e.is_regular_file() && e.path() != path) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            outputs.push_back({{"path", fs::relative(f, out).generic_string()}, {"sha256", sha256_file(f)}});
        }
    } else {
        outputs.push_back({{"path", out.filename().string()}, {"sha256", sha256_file(out)}});
    }
    const json sidecar = {{"command", ctx.command},  {"seed", ctx.cfg.seed},     {"inputs", ctx.inputs},
                          {"params", ctx.params},    {"config", ctx.cfg.to_json()}, {"outputs", outputs}};
    std::ofstream f(path);
    if (!f) throw IoError("cannot write sidecar " + path.string());
    f << sidecar.dump(2) << '\n';
}

Context make_context(const std::string& command, const Common& common) {
    Context ctx;
    ctx.command = command;
    if (!common.config.empty()) {
        require_exists(common.config, "config");
        ctx.cfg = load_config(common.config);
        add_input(ctx, "config", common.config);
    }
    if (common.seed) ctx.cfg.seed = *common.seed;
    ctx.cfg.validate();
    require_fresh(common.out);
    return ctx;
}

Dataset load_dataset(Context& ctx, const std::string& dir, const std::string& role) {
    require_exists(fs::path(dir) / "manifest.json", "dataset manifest");
    add_input(ctx, role, dir);
    return read_dataset(dir);
}

std::vector<Sample> train_split(const Dataset& ds) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (ds.is_train[i]) out.push_back(ds.samples[i]);
    if (out.empty()) throw InvalidParameter("dataset has no training samples");
    return out;
}

nn::Checkpoint load_ckpt(Context& ctx, const std::string& path, const std::string& role) {
    require_exists(path, "checkpoint");
    add_input(ctx, role, path);
    return nn::read_checkpoint(path);
}

std::string index_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return buf;
}

// Writes scores/NNNN.pgm and masks/NNNN.pbm plus a manifest naming each source image.
void write_predictions(const fs::path& out, const Dataset& ds, const std::vector<ScoreMap>& scores,
                       const std::vector<BinaryMask>& masks, const json& header) {
    fs::create_directories(out / "scores");
    fs::create_directories(out / "masks");
    json entries = json::array();
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto name = index_name(i);
        write_score_pgm(out / "scores" / (name + ".pgm"), scores[i]);
        write_pbm(out / "masks" / (name + ".pbm"), masks[i]);
        entries.push_back({{"index", i},
                           {"score", "scores/" + name + ".pgm"},
                           {"mask", "masks/" + name + ".pbm"},
                           {"split", ds.is_train[i] ? "train" : "test"}});
    }
    json manifest = header;
    manifest["entries"] = entries;
    std::ofstream f(out / "manifest.json");
    f << manifest.dump(2) << '\n';
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
}

int cmd_synth(const Common& c, int n, std::optional<int> size) {
    auto ctx = make_context("synth", c);
    auto dcfg = ctx.cfg.dataset;
    if (size) dcfg.scene.size = *size;
    if (n < 1) throw InvalidParameter("--n must be >= 1");
    const auto seed = stage_seed(ctx.cfg, "dataset");
    ctx.params = {{"n", n}, {"size", dcfg.scene.size}, {"dataset_seed", seed}};
    const auto ds = make_dataset(n, dcfg, seed);
    write_dataset(c.out, ds.samples, ds.is_train, ds.manifest);
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_augment(const Common& c, const std::string& data, const std::string& method, int n,
                const std::string& pp_path, const std::string& ae_path, const std::string& den_path) {
    auto ctx = make_context("augment", c);
    const auto ds = load_dataset(ctx, data, "data");
    const auto train = train_split(ds);
    if (n < 0) throw InvalidParameter("--n must be >= 0");
    const auto& cfg = ctx.cfg;
    ctx.params = {{"method", method}, {"n", n}};
    std::vector<Sample> out;
    if (method == "stage1") {
        Rng rng(stage_seed(cfg, "augment/stage1"));
        for (int i = 0; i < n; ++i) {
            std::vector<Sample> four;
            for (int k = 0; k < 4; ++k)
                four.push_back(train[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(train.size()) - 1))]);
            out.push_back(diffmosaic_stage1(four, cfg.dataset.scene.size, cfg.degrade, cfg.paste, rng));
        }
    } else {
        const auto kind = parse_augment_kind(method);
        if (kind == AugmentKind::None) throw ConfigError("augment: method 'none' produces no samples");
        Priors priors;
        if (kind == AugmentKind::PixelPrior || kind == AugmentKind::DiffMosaic) {
            if (pp_path.empty()) throw ConfigError("augment: --pixel-prior is required for " + method);
            priors.pixel_prior.emplace(pp_from_checkpoint(load_ckpt(ctx, pp_path, "pixel_prior")));
        }
        if (kind == AugmentKind::DiffMosaic) {
            if (ae_path.empty() || den_path.empty()) {
                throw ConfigError("augment: --ae and --denoiser are required for diff_mosaic");
            }
            priors.ae.emplace(LinearAE::from_checkpoint(load_ckpt(ctx, ae_path, "ae")));
            priors.denoiser.emplace(MlpDenoiser::from_checkpoint(load_ckpt(ctx, den_path, "denoiser")));
            priors.schedule.emplace(
                NoiseSchedule::linear(cfg.diff_prior.steps, cfg.diff_prior.beta_start, cfg.diff_prior.beta_end));
        }
        out = augment_pool(cfg, kind, n, train, priors);
    }
    write_dataset(c.out, out, std::vector<bool>(out.size(), true),
                  {{"format", "dmlab-dataset/1"}, {"augmentation", method}, {"n", out.size()}});
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_train_pixel_prior(const Common& c, const std::string& data, std::optional<int> epochs) {
    auto ctx = make_context("train-pixel-prior", c);
    const auto ds = load_dataset(ctx, data, "data");
    auto tcfg = ctx.cfg.pixel_prior_train;
    if (epochs) tcfg.epochs = *epochs;
    PixelPriorNet net(ctx.cfg.pixel_prior, stage_seed(ctx.cfg, "pixel_prior/init"));
    Rng rng(stage_seed(ctx.cfg, "pixel_prior/train"));
    nn::Adam adam({tcfg.lr});
    const auto log = pp_train(net, train_split(ds), ctx.cfg.degrade, ctx.cfg.paste, tcfg, rng, &adam);
    ctx.params = {{"epochs", tcfg.epochs}, {"lr", tcfg.lr}, {"batch", tcfg.batch}, {"variants", tcfg.variants},
                  {"epoch_loss", log.epoch_loss}};
    if (const auto parent = fs::path(c.out).parent_path(); !parent.empty()) fs::create_directories(parent);
    nn::write_checkpoint(c.out, pp_checkpoint(net, &adam));
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_train_diff_prior(const Common& c, const std::string& data, std::optional<int> steps) {
    auto ctx = make_context("train-diff-prior", c);
    const auto ds = load_dataset(ctx, data, "data");
    auto d = ctx.cfg.diff_prior;
    if (steps) d.train.steps = *steps;
    std::vector<GrayImage> images;
    for (const auto& s : train_split(ds)) images.push_back(s.image);
    const auto ae = LinearAE::fit(images, d.latent_dim);
    Eigen::MatrixXd latents(static_cast<Eigen::Index>(images.size()), d.latent_dim);
    for (std::size_t i = 0; i < images.size(); ++i) latents.row(static_cast<Eigen::Index>(i)) = ae.encode(images[i]);
    const auto sched = NoiseSchedule::linear(d.steps, d.beta_start, d.beta_end);
    MlpDenoiser den(d.latent_dim, d.denoiser, stage_seed(ctx.cfg, "diff_prior/init"));
    Rng rng(stage_seed(ctx.cfg, "diff_prior/train"));
    nn::Adam adam({d.train.lr});
    const auto log = denoiser_train(den, latents, sched, d.train, rng, &adam);
    ctx.params = {{"latent_dim", d.latent_dim},
                  {"steps", d.steps},
                  {"train_steps", d.train.steps},
                  {"final_loss", log.step_loss.empty() ? json(nullptr) : json(log.step_loss.back())}};
    fs::create_directories(c.out);
    nn::write_checkpoint(fs::path(c.out) / "linear_ae.ckpt", ae.to_checkpoint());
    nn::write_checkpoint(fs::path(c.out) / "denoiser.ckpt", den.to_checkpoint(&adam));
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_resample(const Common& c, const std::string& data, const std::string& ae_path, const std::string& den_path,
                 std::optional<double> strength) {
    auto ctx = make_context("resample", c);
    const auto ds = load_dataset(ctx, data, "data");
    const auto ae = LinearAE::from_checkpoint(load_ckpt(ctx, ae_path, "ae"));
    const auto den = MlpDenoiser::from_checkpoint(load_ckpt(ctx, den_path, "denoiser"));
    const auto& d = ctx.cfg.diff_prior;
    const auto sched = NoiseSchedule::linear(d.steps, d.beta_start, d.beta_end);
    const double s = strength.value_or(d.strength);
    Rng rng(stage_seed(ctx.cfg, "resample"));
    std::vector<Sample> out;
    for (const auto& smp : ds.samples) out.push_back(resample_image(ae, den, sched, smp, s, rng));
    ctx.params = {{"strength", s}, {"steps", d.steps}};
    write_dataset(c.out, out, ds.is_train, {{"format", "dmlab-dataset/1"}, {"augmentation", "resample"}});
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_train_detector(const Common& c, const std::string& data, const std::vector<std::string>& extra,
                       std::optional<int> epochs) {
    auto ctx = make_context("train-detector", c);
    const auto ds = load_dataset(ctx, data, "data");
    auto train = train_split(ds);
    for (const auto& e : extra) {
        const auto aug = load_dataset(ctx, e, "augmented");
        train.insert(train.end(), aug.samples.begin(), aug.samples.end());
    }
    auto tcfg = ctx.cfg.detector_train;
    if (epochs) tcfg.epochs = *epochs;
    DetectorNet net(ctx.cfg.detector, stage_seed(ctx.cfg, "detector/init"));
    Rng rng(stage_seed(ctx.cfg, "detector/train"));
    nn::Adam adam({tcfg.lr});
    const auto log = det_train(net, train, tcfg, rng, &adam);
    ctx.params = {{"channels", ctx.cfg.detector.channels},
                  {"epochs", tcfg.epochs},
                  {"lr", tcfg.lr},
                  {"train_size", train.size()},
                  {"epoch_loss", log.epoch_loss}};
    if (const auto parent = fs::path(c.out).parent_path(); !parent.empty()) fs::create_directories(parent);
    nn::write_checkpoint(c.out, det_checkpoint(net, &adam));
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_predict(const Common& c, const std::string& model, const std::string& data) {
    auto ctx = make_context("predict", c);
    const auto net = det_from_checkpoint(load_ckpt(ctx, model, "model"));
    const auto ds = load_dataset(ctx, data, "data");
    std::vector<ScoreMap> scores;
    std::vector<BinaryMask> masks;
    for (const auto& s : ds.samples) {
        scores.push_back(det_forward(net, s.image));
        BinaryMask m(s.image.width(), s.image.height());
        for (std::size_t i = 0; i < m.size(); ++i) m.set(i, scores.back().values[i] > ctx.cfg.threshold);
        masks.push_back(std::move(m));
    }
    ctx.params = {{"threshold", ctx.cfg.threshold}};
    write_predictions(c.out, ds, scores, masks, {{"format", "dmlab-predictions/1"}, {"method", "detector"}});
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_detect(const Common& c, const std::string& method, const std::string& image, const std::string& data,
               const std::string& mode, double tau, double k, int radius) {
    auto ctx = make_context("detect", c);
    ThresholdSpec spec;
    if (mode == "fixed") {
        spec.method = ThresholdMethod::Fixed;
    } else if (mode != "adaptive") {
        throw ConfigError("detect: --threshold must be fixed or adaptive");
    }
    spec.tau = tau;
    spec.k = k;
    const auto run = [&](const GrayImage& img) {
        if (method == "tophat") return tophat(img, radius);
        if (method == "lcm") return lcm(img);
        if (method == "ipi") return ipi_detect(img);
        throw ConfigError("detect: unknown method " + method);
    };
    ctx.params = {{"method", method}, {"threshold", to_string(spec.method)}, {"tau", tau}, {"k", k},
                  {"tophat_radius", radius}};
    if (!image.empty() == !data.empty()) throw ConfigError("detect: give exactly one of --image or --data");
    if (!image.empty()) {
        require_exists(image, "image");
        add_input(ctx, "image", image);
        const auto scores = run(read_pgm(image));
        fs::create_directories(c.out);
        write_score_pgm(fs::path(c.out) / "score.pgm", scores);
        write_pbm(fs::path(c.out) / "mask.pbm", threshold_to_mask(scores, spec));
    } else {
        const auto ds = load_dataset(ctx, data, "data");
        std::vector<ScoreMap> scores;
        std::vector<BinaryMask> masks;
        for (const auto& s : ds.samples) {
            scores.push_back(run(s.image));
            masks.push_back(threshold_to_mask(scores.back(), spec));
        }
        write_predictions(c.out, ds, scores, masks, {{"format", "dmlab-predictions/1"}, {"method", method}});
    }
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_eval(const Common& c, const std::string& pred, const std::string& gt, const std::string& split,
             const std::string& label, std::optional<double> min_scr) {
    auto ctx = make_context("eval", c);
    const auto truth = load_dataset(ctx, gt, "gt");
    require_exists(fs::path(pred) / "manifest.json", "prediction manifest");
    add_input(ctx, "pred", pred);
    if (split != "all" && split != "train" && split != "test") throw ConfigError("eval: --split must be all|train|test");
    std::vector<BinaryMask> preds;
    std::vector<BinaryMask> gts;
    for (std::size_t i = 0; i < truth.samples.size(); ++i) {
        if (split == "train" && !truth.is_train[i]) continue;
        if (split == "test" && truth.is_train[i]) continue;
        if (min_scr) {
            const auto s = min_realized_scr(truth.samples[i]);
            if (s && *s < *min_scr) continue;
        }
        const auto path = fs::path(pred) / "masks" / (index_name(i) + ".pbm");
        require_exists(path, "prediction mask");
        preds.push_back(read_pbm(path));
        gts.push_back(truth.samples[i].mask);
    }
    if (gts.empty()) throw InvalidParameter("eval: no images selected");
    const auto& cfg = ctx.cfg;
    const auto m = evaluate_set(preds, gts, cfg.match_distance, cfg.macro);
    ctx.params = {{"split", split},
                  {"match_distance", cfg.match_distance},
                  {"macro", cfg.macro},
                  {"min_scr", min_scr ? json(*min_scr) : json(nullptr)}};
    fs::create_directories(c.out);
    write_json(fs::path(c.out) / "metrics.json", {{"method", label}, {"metrics", metrics_to_json(m)}});
    write_text(fs::path(c.out) / "table.txt", format_metric_table({{label, m}}));
    write_sidecar(ctx, c.out);
    return 0;
}

int cmd_report(const Common& c, bool sweep) {
    auto ctx = make_context("report", c);
    ctx.params = {{"kind", sweep ? "scale_sweep" : "ablation"}};
    const auto report = sweep ? run_scale_sweep(ctx.cfg, fs::path(c.out)) : run_ablation(ctx.cfg, fs::path(c.out));
    std::cout << report.table;
    write_sidecar(ctx, c.out);
    return 0;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Global seed (overrides the config)");
    sub->add_option("--config", c.config, "Experiment config (JSON)");
    sub->add_option("--out", c.out, "Output path")->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dmlab: synthetic infrared small-target lab with mosaic, pixel-prior and diffusion-prior augmentation"};
    app.require_subcommand(1);

    Common common;
    int n = 0;
    std::optional<int> size, epochs, steps;
    std::optional<double> strength, min_scr;
    std::string data, method, model, image, pred, gt, pp_path, ae_path, den_path;
    std::string split = "all", label = "method", mode = "adaptive";
    std::vector<std::string> extra;
    double tau = 0.5, k = 5.0;
    int radius = 5;
    bool sweep = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    add_common(synth, common);
    synth->add_option("--n", n, "Number of scenes")->required();
    synth->add_option("--size", size, "Image side in pixels");

    auto* augment = app.add_subcommand("augment", "Augment a dataset's training split");
    add_common(augment, common);
    augment->add_option("--data", data)->required();
    augment->add_option("--method", method, "mosaic|cutmix|mixup|stage1|pixel_prior|diff_mosaic")->required();
    augment->add_option("--n", n, "Samples to generate")->required();
    augment->add_option("--pixel-prior", pp_path);
    augment->add_option("--ae", ae_path);
    augment->add_option("--denoiser", den_path);

    auto* tpp = app.add_subcommand("train-pixel-prior", "Train the harmonization network");
    add_common(tpp, common);
    tpp->add_option("--data", data)->required();
    tpp->add_option("--epochs", epochs);

    auto* tdp = app.add_subcommand("train-diff-prior", "Fit the latent autoencoder and train the denoiser");
    add_common(tdp, common);
    tdp->add_option("--data", data)->required();
    tdp->add_option("--steps", steps, "Optimizer steps");

    auto* res = app.add_subcommand("resample", "Resample every image through the latent diffusion prior");
    add_common(res, common);
    res->add_option("--data", data)->required();
    res->add_option("--ae", ae_path)->required();
    res->add_option("--denoiser", den_path)->required();
    res->add_option("--strength", strength);

    auto* tdet = app.add_subcommand("train-detector", "Train the segmentation detector");
    add_common(tdet, common);
    tdet->add_option("--data", data)->required();
    tdet->add_option("--extra", extra, "Augmented datasets added to the training split");
    tdet->add_option("--epochs", epochs);

    auto* pr = app.add_subcommand("predict", "Run a trained detector over a dataset");
    add_common(pr, common);
    pr->add_option("--model", model)->required();
    pr->add_option("--data", data)->required();

    auto* det = app.add_subcommand("detect", "Classical detection: score map and thresholded mask");
    add_common(det, common);
    det->add_option("--method", method, "tophat|lcm|ipi")->required();
    det->add_option("--image", image, "Single PGM image");
    det->add_option("--data", data, "Dataset directory");
    det->add_option("--threshold", mode, "adaptive|fixed");
    det->add_option("--tau", tau, "Fixed threshold");
    det->add_option("--k", k, "Adaptive threshold: mean + k * std");
    det->add_option("--radius", radius, "Top-hat disk radius");

    auto* ev = app.add_subcommand("eval", "IoU / Pd / Fa of predicted masks against a dataset");
    add_common(ev, common);
    ev->add_option("--pred", pred, "Directory with masks/NNNN.pbm")->required();
    ev->add_option("--gt", gt, "Ground-truth dataset")->required();
    ev->add_option("--split", split, "all|train|test");
    ev->add_option("--label", label, "Method name for the table");
    ev->add_option("--min-scr", min_scr, "Keep only images whose targets all reach this SCR");

    auto* rep = app.add_subcommand("report", "Run the ablation (or count sweep) into a run directory");
    add_common(rep, common);
    rep->add_flag("--sweep", sweep, "Sweep augmentation counts instead of arms");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitBadInput;
    }

    try {
        if (synth->parsed()) return cmd_synth(common, n, size);
        if (augment->parsed()) return cmd_augment(common, data, method, n, pp_path, ae_path, den_path);
        if (tpp->parsed()) return cmd_train_pixel_prior(common, data, epochs);
        if (tdp->parsed()) return cmd_train_diff_prior(common, data, steps);
        if (res->parsed()) return cmd_resample(common, data, ae_path, den_path, strength);
        if (tdet->parsed()) return cmd_train_detector(common, data, extra, epochs);
        if (pr->parsed()) return cmd_predict(common, model, data);
        if (det->parsed()) return cmd_detect(common, method, image, data, mode, tau, k, radius);
        if (ev->parsed()) return cmd_eval(common, pred, gt, split, label, min_scr);
        if (rep->parsed()) return cmd_report(common, sweep);
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure in stage " << e.stage() << ": " << e.what() << '\n';
        return kExitNumeric;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
