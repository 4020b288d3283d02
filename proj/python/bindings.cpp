#include "dmlab/augment.hpp"
#include "dmlab/baselines.hpp"
#include "dmlab/detector.hpp"
#include "dmlab/diff_prior.hpp"
#include "dmlab/errors.hpp"
#include "dmlab/experiment.hpp"
#include "dmlab/metrics.hpp"
#include "dmlab/nn/convert.hpp"
#include "dmlab/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dmlab;

namespace {

using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GrayImage to_image(const ImageArray& a) {
    if (a.ndim() != 2) throw ShapeMismatch("expected a 2-D image array");
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    return GrayImage(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

BinaryMask to_mask(const MaskArray& a) {
    if (a.ndim() != 2) throw ShapeMismatch("expected a 2-D mask array");
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    std::vector<std::uint8_t> bits(a.data(), a.data() + a.size());
    for (auto& b : bits) b = b ? 1 : 0;
    return BinaryMask(w, h, std::move(bits));
}

py::array_t<double> from_values(int w, int h, std::span<const double> v) {
    py::array_t<double> out({h, w});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> from_image(const GrayImage& img) { return from_values(img.width(), img.height(), img.pixels()); }
py::array_t<double> from_scores(const ScoreMap& s) { return from_values(s.width, s.height, s.values); }

py::array_t<bool> from_mask(const BinaryMask& m) {
    py::array_t<bool> out({m.height(), m.width()});
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < m.size(); ++i) p[i] = m[i];
    return out;
}

py::tuple sample_tuple(const Sample& s) { return py::make_tuple(from_image(s.image), from_mask(s.mask), s.meta); }

Sample to_sample(const ImageArray& img, const MaskArray& mask) { return Sample(to_image(img), to_mask(mask)); }

py::dict metrics_dict(const MetricSet& m) {
    py::dict d;
    d["iou"] = m.iou;
    d["pd"] = m.pd;
    d["fa"] = m.fa;
    d["inter"] = m.inter;
    d["union"] = m.uni;
    d["correct"] = m.correct;
    d["targets"] = m.targets;
    d["false_pixels"] = m.false_pixels;
    d["pixels"] = m.pixels;
    d["images"] = m.images;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Synthetic infrared small-target lab: scenes, augmentation, priors, detectors and metrics.";

    py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def(
        "generate_scene",
        [](int size, const std::string& background, int n_targets, const std::string& target_kind, double scr_min,
           double scr_max, std::uint64_t seed, double sensor_noise) {
            SceneSpec spec;
            spec.size = size;
            spec.background = parse_background_kind(background);
            spec.n_targets = n_targets;
            spec.target_kind = parse_target_kind(target_kind);
            spec.scr_min = scr_min;
            spec.scr_max = scr_max;
            spec.seed = seed;
            spec.sensor_noise = sensor_noise;
            return sample_tuple(generate_scene(spec));
        },
        py::arg("size") = 64, py::arg("background") = "cloud", py::arg("n_targets") = 1,
        py::arg("target_kind") = "gaussian-blob", py::arg("scr_min") = 3.0, py::arg("scr_max") = 8.0,
        py::arg("seed") = 0, py::arg("sensor_noise") = 0.01,
        "Returns (image, mask, meta) for one synthetic scene.");

    m.def(
        "mosaic",
        [](const std::vector<ImageArray>& images, const std::vector<MaskArray>& masks, int out_size,
           std::uint64_t seed) {
            if (images.size() != masks.size()) throw ShapeMismatch("mosaic: images and masks differ in count");
            std::vector<Sample> s;
            for (std::size_t i = 0; i < images.size(); ++i) s.push_back(to_sample(images[i], masks[i]));
            Rng rng(seed);
            return sample_tuple(mosaic(s, out_size, rng));
        },
        py::arg("images"), py::arg("masks"), py::arg("out_size"), py::arg("seed") = 0);

    m.def(
        "cutmix",
        [](const ImageArray& ai, const MaskArray& am, const ImageArray& bi, const MaskArray& bm, std::uint64_t seed) {
            Rng rng(seed);
            return sample_tuple(cutmix(to_sample(ai, am), to_sample(bi, bm), rng));
        },
        py::arg("image_a"), py::arg("mask_a"), py::arg("image_b"), py::arg("mask_b"), py::arg("seed") = 0);

    m.def(
        "mixup",
        [](const ImageArray& ai, const MaskArray& am, const ImageArray& bi, const MaskArray& bm, double lam) {
            return sample_tuple(mixup(to_sample(ai, am), to_sample(bi, bm), lam));
        },
        py::arg("image_a"), py::arg("mask_a"), py::arg("image_b"), py::arg("mask_b"), py::arg("lam"));

    m.def(
        "degrade",
        [](const ImageArray& img, std::uint64_t seed, int orders) {
            DegradeConfig cfg;
            cfg.orders = orders;
            Rng rng(seed);
            return from_image(degrade(to_image(img), cfg, rng));
        },
        py::arg("image"), py::arg("seed") = 0, py::arg("orders") = 2);

    m.def(
        "cut_and_paste",
        [](const ImageArray& orig, const ImageArray& degraded, const MaskArray& mask, bool invert) {
            return from_image(cut_and_paste(to_image(orig), to_image(degraded), to_mask(mask), invert));
        },
        py::arg("orig"), py::arg("degraded"), py::arg("mask"), py::arg("invert_convention") = false);

    m.def(
        "quadrant_discrepancy", [](const ImageArray& img) { return quadrant_stats(to_image(img)).quadrant_discrepancy; },
        py::arg("image"));

    m.def(
        "tophat", [](const ImageArray& img, int radius) { return from_scores(tophat(to_image(img), radius)); },
        py::arg("image"), py::arg("radius") = 5);
    m.def(
        "lcm",
        [](const ImageArray& img, const std::vector<int>& scales) { return from_scores(lcm(to_image(img), scales)); },
        py::arg("image"), py::arg("scales") = std::vector<int>{3, 5, 7});
    m.def(
        "ipi",
        [](const ImageArray& img, int patch, int stride) {
            PatchImageConfig cfg;
            cfg.patch = patch;
            cfg.stride = stride;
            return from_scores(ipi_detect(to_image(img), cfg));
        },
        py::arg("image"), py::arg("patch") = 16, py::arg("stride") = 8);
    m.def(
        "threshold",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& scores, const std::string& method,
           double tau, double k) {
            if (scores.ndim() != 2) throw ShapeMismatch("expected a 2-D score array");
            ScoreMap s{static_cast<int>(scores.shape(1)), static_cast<int>(scores.shape(0)),
                       std::vector<double>(scores.data(), scores.data() + scores.size())};
            ThresholdSpec spec;
            if (method == "fixed") {
                spec.method = ThresholdMethod::Fixed;
            } else if (method != "adaptive") {
                throw InvalidParameter("threshold method must be fixed or adaptive");
            }
            spec.tau = tau;
            spec.k = k;
            return from_mask(threshold_to_mask(s, spec));
        },
        py::arg("scores"), py::arg("method") = "adaptive", py::arg("tau") = 0.5, py::arg("k") = 5.0);

    m.def(
        "rpca",
        [](const Eigen::MatrixXd& d, double lambda, double tol, int max_iter) {
            const auto r = rpca_ialm(d, lambda, tol, max_iter);
            return py::make_tuple(r.low_rank, r.sparse, r.iterations, r.converged);
        },
        py::arg("d"), py::arg("lam"), py::arg("tol") = 1e-6, py::arg("max_iter") = 500,
        "Returns (low_rank, sparse, iterations, converged).");

    m.def(
        "pixel_iou",
        [](const MaskArray& pred, const MaskArray& gt) {
            const auto r = pixel_iou(to_mask(pred), to_mask(gt));
            return py::make_tuple(r.iou, r.inter, r.uni);
        },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "pd_fa",
        [](const MaskArray& pred, const MaskArray& gt, double match_dist) {
            const auto r = pd_fa(to_mask(pred), to_mask(gt), match_dist);
            py::dict d;
            d["correct"] = r.correct;
            d["targets"] = r.targets;
            d["false_pixels"] = r.false_pixels;
            d["pixels"] = r.pixels;
            return d;
        },
        py::arg("pred"), py::arg("gt"), py::arg("match_dist") = kDefaultMatchDistance);
    m.def(
        "evaluate",
        [](const std::vector<MaskArray>& preds, const std::vector<MaskArray>& gts, double match_dist, bool macro) {
            std::vector<BinaryMask> p, g;
            for (const auto& a : preds) p.push_back(to_mask(a));
            for (const auto& a : gts) g.push_back(to_mask(a));
            return metrics_dict(evaluate_set(p, g, match_dist, macro));
        },
        py::arg("preds"), py::arg("gts"), py::arg("match_dist") = kDefaultMatchDistance, py::arg("macro") = false);

    m.def(
        "soft_iou_loss",
        [](const ImageArray& pred, const MaskArray& gt, double alpha) {
            const auto p = to_image(pred);
            nn::Tensor t = nn::images_to_tensor(std::span<const GrayImage>(&p, 1));
            t.set_requires_grad(true);
            const auto g = to_mask(gt);
            const auto loss = soft_iou_loss(t, nn::masks_to_tensor(std::span<const BinaryMask>(&g, 1)), {alpha});
            loss.backward();
            return py::make_tuple(loss.item(), from_values(p.width(), p.height(), t.grad()));
        },
        py::arg("pred"), py::arg("gt"), py::arg("alpha") = 1.0,
        "Returns (loss, d loss / d pred) for a single probability map in [0, 1].");

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_static("linear", &NoiseSchedule::linear, py::arg("steps") = 100, py::arg("beta_start") = 1e-4,
                    py::arg("beta_end") = 0.02)
        .def_property_readonly("steps", &NoiseSchedule::steps)
        .def("beta", &NoiseSchedule::beta)
        .def("alpha_bar", &NoiseSchedule::alpha_bar)
        .def("posterior_variance", &NoiseSchedule::posterior_variance);

    m.def(
        "forward_diffuse",
        [](const Eigen::MatrixXd& z0, int t, const NoiseSchedule& sched, std::uint64_t seed) {
            Rng rng(seed);
            return Eigen::MatrixXd(forward_diffuse(z0, t, sched, rng));
        },
        py::arg("z0"), py::arg("t"), py::arg("schedule"), py::arg("seed") = 0);

    m.def(
        "sample_gaussian_prior",
        [](const Eigen::VectorXd& mu, const Eigen::VectorXd& var, int n, const NoiseSchedule& sched,
           std::uint64_t seed) {
            AnalyticDenoiser den(mu, var, sched);
            Rng rng(seed);
            Eigen::MatrixXd z(n, mu.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i / mu.size(), i % mu.size()) = rng.normal();
            return Eigen::MatrixXd(reverse_sample(den, sched, z, rng, sched.steps()));
        },
        py::arg("mu"), py::arg("var"), py::arg("n"), py::arg("schedule"), py::arg("seed") = 0,
        "Reverse chains from pure noise under the exact denoiser for N(mu, diag(var)).");

    m.def(
        "run_ablation",
        [](const std::string& config_json, std::optional<std::filesystem::path> run_dir) {
            const auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
            return run_ablation(cfg, run_dir).json.dump(2);
        },
        py::arg("config_json"), py::arg("run_dir") = std::nullopt,
        "Runs the ablation described by a JSON config; returns the report as JSON text.");

    m.def("default_config", []() { return ExperimentConfig{}.to_json().dump(2); });
}
