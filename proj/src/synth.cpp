#include "dmlab/synth.hpp"

#include "dmlab/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dmlab {

namespace {

constexpr int kMargin = 4;
constexpr int kWindowPad = 4;
constexpr int kPlacementAttempts = 400;

struct KindProfile {
    double base_lo, base_hi;
    int default_octaves;
    double amplitude;
    double x_stretch;  // >1 elongates structures horizontally
    double blur;
};

KindProfile profile(BackgroundKind kind) {
    switch (kind) {
        case BackgroundKind::SkyGradient: return {0.15, 0.50, 2, 0.05, 1.0, 1.0};
        case BackgroundKind::Cloud: return {0.20, 0.50, 4, 0.30, 1.0, 1.5};
        case BackgroundKind::SeaClutter: return {0.10, 0.40, 3, 0.15, 4.0, 1.0};
        case BackgroundKind::Field: return {0.25, 0.55, 3, 0.18, 1.0, 1.0};
        case BackgroundKind::CityBlocks: return {0.20, 0.50, 2, 0.06, 1.0, 1.2};
    }
    return {0.2, 0.5, 3, 0.1, 1.0, 1.0};
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise in [-1, 1] with cell size `cell` (x cells stretched by x_stretch).
void add_value_noise(std::vector<double>& field, int size, double cell, double x_stretch,
                     double amplitude, Rng& rng) {
    const double cx = cell * x_stretch;
    const int nx = static_cast<int>(std::ceil(size / cx)) + 2;
    const int ny = static_cast<int>(std::ceil(size / cell)) + 2;
    std::vector<double> lattice(static_cast<std::size_t>(nx * ny));
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < size; ++y) {
        const double gy = y / cell;
        const int iy = static_cast<int>(gy);
        const double ty = smoothstep(gy - iy);
        for (int x = 0; x < size; ++x) {
            const double gx = x / cx;
            const int ix = static_cast<int>(gx);
            const double tx = smoothstep(gx - ix);
            auto l = [&](int i, int j) { return lattice[static_cast<std::size_t>(j * nx + i)]; };
            const double top = (1 - tx) * l(ix, iy) + tx * l(ix + 1, iy);
            const double bot = (1 - tx) * l(ix, iy + 1) + tx * l(ix + 1, iy + 1);
            field[static_cast<std::size_t>(y * size + x)] += amplitude * ((1 - ty) * top + ty * bot);
        }
    }
}

double support_radius(TargetKind kind, double sigma_or_axis) {
    if (kind == TargetKind::Extended) return sigma_or_axis;
    // Gaussian falls to 10% of its peak at sigma * sqrt(2 ln 10).
    return sigma_or_axis * std::sqrt(2.0 * std::log(10.0));
}

double max_support_radius(TargetKind kind) {
    switch (kind) {
        case TargetKind::Point: return support_radius(kind, 0.9);
        case TargetKind::GaussianBlob: return support_radius(kind, 2.0);
        case TargetKind::Extended: return 12.0;
    }
    return 12.0;
}

}  // namespace

int target_capacity(TargetKind kind, int size) {
    const double rmax = max_support_radius(kind);
    const int reach = static_cast<int>(std::ceil(rmax)) + kMargin;
    if (size < 2 * reach + 1) return 0;
    // Centres span this much per axis; disjoint windows need 2*half+2 between centres.
    const double span = size - 1 - 2.0 * (kMargin + rmax);
    const int half = static_cast<int>(std::ceil(rmax)) + kWindowPad;
    const int per_axis = static_cast<int>(std::floor(span / (2 * half + 2))) + 1;
    return per_axis * per_axis;
}

namespace {

struct Shape {
    double sigma = 1.0;  // gaussian kinds
    double a = 1.0, b = 1.0, theta = 0.0;  // extended
    double radius = 1.0;
};

Shape draw_shape(TargetKind kind, Rng& rng) {
    Shape s;
    switch (kind) {
        case TargetKind::Point: s.sigma = rng.uniform(0.5, 0.9); break;
        case TargetKind::GaussianBlob: s.sigma = rng.uniform(1.0, 2.0); break;
        case TargetKind::Extended:
            s.a = rng.uniform(3.0, 12.0);
            s.b = rng.uniform(3.0, s.a);
            s.theta = rng.uniform(0.0, std::numbers::pi);
            break;
    }
    s.radius = kind == TargetKind::Extended ? s.a : support_radius(kind, s.sigma);
    return s;
}

double profile_at(TargetKind kind, const Shape& s, double dx, double dy) {
    if (kind == TargetKind::Extended) {
        const double u = (dx * std::cos(s.theta) + dy * std::sin(s.theta)) / s.a;
        const double v = (-dx * std::sin(s.theta) + dy * std::cos(s.theta)) / s.b;
        return u * u + v * v <= 1.0 ? 1.0 : 0.0;
    }
    return std::exp(-0.5 * (dx * dx + dy * dy) / (s.sigma * s.sigma));
}

struct Box {
    int x0, y0, x1, y1;  // inclusive
    bool overlaps(const Box& o) const {
        return !(x1 < o.x0 || o.x1 < x0 || y1 < o.y0 || o.y1 < y0);
    }
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

nlohmann::json record_to_json(const TargetRecord& r) {
    return {{"cx", r.cx}, {"cy", r.cy}, {"radius", r.radius}, {"window", r.window},
            {"amplitude", r.amplitude}, {"scr", r.scr}};
}

}  // namespace

std::string to_string(BackgroundKind kind) {
    switch (kind) {
        case BackgroundKind::SkyGradient: return "sky-gradient";
        case BackgroundKind::Cloud: return "cloud";
        case BackgroundKind::SeaClutter: return "sea-clutter";
        case BackgroundKind::Field: return "field";
        case BackgroundKind::CityBlocks: return "city-blocks";
    }
    return "cloud";
}

std::string to_string(TargetKind kind) {
    switch (kind) {
        case TargetKind::Point: return "point";
        case TargetKind::GaussianBlob: return "gaussian-blob";
        case TargetKind::Extended: return "extended";
    }
    return "gaussian-blob";
}

BackgroundKind parse_background_kind(const std::string& name) {
    for (auto k : {BackgroundKind::SkyGradient, BackgroundKind::Cloud, BackgroundKind::SeaClutter,
                   BackgroundKind::Field, BackgroundKind::CityBlocks}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidParameter("unknown background kind: " + name);
}

TargetKind parse_target_kind(const std::string& name) {
    for (auto k : {TargetKind::Point, TargetKind::GaussianBlob, TargetKind::Extended}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidParameter("unknown target kind: " + name);
}

void SceneSpec::validate() const {
    if (size < 8) throw InvalidParameter("scene size must be at least 8");
    if (n_targets < 0 || n_targets > 8) throw InvalidParameter("n_targets must lie in [0, 8]");
    if (!(scr_min > 0.0) || !(scr_min <= scr_max) || !std::isfinite(scr_max)) {
        throw InvalidParameter("scr range must satisfy 0 < min <= max");
    }
    if (octaves < -1 || octaves > 6) throw InvalidParameter("octaves must lie in [-1, 6]");
    if (!(sensor_noise >= 0.0)) throw InvalidParameter("sensor_noise must be non-negative");
}

Sample::Sample(GrayImage img, BinaryMask m, std::map<std::string, std::string> meta_)
    : image(std::move(img)), mask(std::move(m)), meta(std::move(meta_)) {
    if (!mask.same_dims(image)) throw ShapeMismatch("Sample: image and mask dimensions differ");
}

double measure_scr(const GrayImage& img, const std::vector<Pixel>& target_pixels,
                   const std::vector<Pixel>& annulus) {
    if (target_pixels.empty() || annulus.size() < 2) {
        throw InvalidParameter("measure_scr: empty target or annulus");
    }
    double st = 0.0;
    for (const auto& p : target_pixels) st += img.at(p.x, p.y);
    const double mt = st / static_cast<double>(target_pixels.size());
    double sa = 0.0;
    for (const auto& p : annulus) sa += img.at(p.x, p.y);
    const double ma = sa / static_cast<double>(annulus.size());
    double ss = 0.0;
    for (const auto& p : annulus) ss += (img.at(p.x, p.y) - ma) * (img.at(p.x, p.y) - ma);
    const double sd = std::sqrt(ss / static_cast<double>(annulus.size()));
    if (!(sd > 0.0)) throw InvalidParameter("measure_scr: annulus has zero variance");
    return (mt - ma) / sd;
}

GrayImage synth_background(const SceneSpec& spec, Rng& rng) {
    spec.validate();
    const int n = spec.size;
    const auto prof = profile(spec.background);
    const int octaves = spec.octaves < 0 ? prof.default_octaves : spec.octaves;
    const double base = rng.uniform(prof.base_lo, prof.base_hi);
    std::vector<double> field(static_cast<std::size_t>(n * n), base);

    if (spec.background == BackgroundKind::SkyGradient) {
        const double slope = rng.uniform(0.10, 0.30);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                field[static_cast<std::size_t>(y * n + x)] += slope * y / (n - 1);
    } else if (spec.background == BackgroundKind::CityBlocks) {
        const int blocks = rng.uniform_int(6, 12);
        for (int b = 0; b < blocks; ++b) {
            const int bw = rng.uniform_int(n / 8, n / 3);
            const int bh = rng.uniform_int(n / 8, n / 2);
            const int x0 = rng.uniform_int(0, n - bw);
            const int y0 = rng.uniform_int(n / 4, n - bh);
            const double level = rng.uniform(-0.15, 0.20);
            for (int y = y0; y < y0 + bh; ++y)
                for (int x = x0; x < x0 + bw; ++x) field[static_cast<std::size_t>(y * n + x)] += level;
        }
    } else if (spec.background == BackgroundKind::SeaClutter) {
        const double slope = rng.uniform(-0.1, 0.1);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                field[static_cast<std::size_t>(y * n + x)] += slope * y / (n - 1);
    }

    double amp = prof.amplitude;
    double cell = n / 2.0;
    for (int o = 0; o < octaves; ++o) {
        add_value_noise(field, n, std::max(cell, 2.0), prof.x_stretch, amp, rng);
        amp *= 0.5;
        cell *= 0.5;
    }

    GrayImage img(n, n, std::move(field));
    if (octaves > 0 || spec.background == BackgroundKind::CityBlocks) {
        img = gaussian_blur(img, prof.blur);
    }
    if (spec.sensor_noise > 0.0) img = add_gaussian_noise(img, spec.sensor_noise, rng);
    return img;
}

Sample inject_targets(const GrayImage& background, const SceneSpec& spec, Rng& rng) {
    spec.validate();
    const int w = background.width();
    const int h = background.height();
    std::map<std::string, std::string> meta{
        {"background", to_string(spec.background)},
        {"target_kind", to_string(spec.target_kind)},
        {"n_targets", std::to_string(spec.n_targets)},
    };
    if (spec.n_targets == 0) {
        meta["targets"] = "[]";
        return Sample(background, BinaryMask(w, h), std::move(meta));
    }

    const double rmax = max_support_radius(spec.target_kind);
    const int reach = static_cast<int>(std::ceil(rmax)) + kMargin;
    if (w < 2 * reach + 1 || h < 2 * reach + 1) {
        throw InvalidParameter("image too small for target support plus 4-pixel margin");
    }

    struct Tap {
        std::size_t index;
        double p;
    };
    struct Planned {
        double cx, cy, scr_goal;
        Shape shape;
        Box window;
        int half;
        std::vector<Tap> taps;
        std::vector<Pixel> support;
    };

    for (int scene_attempt = 0; scene_attempt < 50; ++scene_attempt) {
        // Phase 1: geometry with pairwise-disjoint injection windows.
        std::vector<Planned> plan;
        for (int t = 0; t < spec.n_targets; ++t) {
            bool ok = false;
            for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
                Planned pl;
                pl.shape = draw_shape(spec.target_kind, rng);
                const double r = pl.shape.radius;
                pl.cx = rng.uniform(kMargin + r, w - 1 - kMargin - r);
                pl.cy = rng.uniform(kMargin + r, h - 1 - kMargin - r);
                pl.scr_goal = rng.uniform(spec.scr_min, spec.scr_max);
                pl.half = static_cast<int>(std::ceil(r)) + kWindowPad;
                pl.window = {static_cast<int>(std::floor(pl.cx)) - pl.half,
                             static_cast<int>(std::floor(pl.cy)) - pl.half,
                             static_cast<int>(std::ceil(pl.cx)) + pl.half,
                             static_cast<int>(std::ceil(pl.cy)) + pl.half};
                if (std::any_of(plan.begin(), plan.end(),
                                [&](const Planned& o) { return o.window.overlaps(pl.window); })) {
                    continue;
                }
                double peak = 0.0;
                for (int y = std::max(pl.window.y0, 0); y <= std::min(pl.window.y1, h - 1); ++y) {
                    for (int x = std::max(pl.window.x0, 0); x <= std::min(pl.window.x1, w - 1); ++x) {
                        const double p = profile_at(spec.target_kind, pl.shape, x - pl.cx, y - pl.cy);
                        if (p <= 0.0) continue;
                        pl.taps.push_back({static_cast<std::size_t>(y * w + x), p});
                        peak = std::max(peak, p);
                    }
                }
                if (pl.taps.empty()) continue;
                for (const auto& tap : pl.taps) {
                    if (tap.p > 0.1 * peak) {
                        pl.support.push_back({static_cast<int>(tap.index % static_cast<std::size_t>(w)),
                                              static_cast<int>(tap.index / static_cast<std::size_t>(w))});
                    }
                }
                plan.push_back(std::move(pl));
                ok = true;
            }
            if (!ok) break;
        }
        if (static_cast<int>(plan.size()) != spec.n_targets) continue;

        // Phase 2: each target's SCR depends only on its own window and on
        // annulus pixels outside every other window, so amplitudes solve independently.
        std::vector<double> pixels(background.pixels().begin(), background.pixels().end());
        std::vector<TargetRecord> records;
        bool scene_ok = true;
        for (std::size_t i = 0; i < plan.size() && scene_ok; ++i) {
            const auto& pl = plan[i];
            const double r_in = pl.shape.radius + 2.0;
            const double r_out = pl.shape.radius + 8.0;
            std::vector<Pixel> annulus;
            for (int y = std::max(0, static_cast<int>(pl.cy - r_out) - 1);
                 y <= std::min(h - 1, static_cast<int>(pl.cy + r_out) + 1); ++y) {
                for (int x = std::max(0, static_cast<int>(pl.cx - r_out) - 1);
                     x <= std::min(w - 1, static_cast<int>(pl.cx + r_out) + 1); ++x) {
                    const double d = std::hypot(x - pl.cx, y - pl.cy);
                    if (d <= r_in || d > r_out) continue;
                    bool foreign = false;
                    for (std::size_t j = 0; j < plan.size(); ++j) {
                        if (j != i && plan[j].window.contains(x, y)) foreign = true;
                    }
                    if (!foreign) annulus.push_back({x, y});
                }
            }
            if (annulus.size() < 8) {
                scene_ok = false;
                break;
            }
            auto realized = [&](double amplitude) {
                std::vector<double> trial = pixels;
                for (const auto& tap : pl.taps) trial[tap.index] += amplitude * tap.p;
                return measure_scr(GrayImage(w, h, std::move(trial)), pl.support, annulus);
            };
            double scr0 = 0.0;
            try {
                scr0 = realized(0.0);
            } catch (const InvalidParameter&) {
                scene_ok = false;  // flat annulus: SCR undefined
                break;
            }
            if (scr0 >= pl.scr_goal || realized(1.0) < pl.scr_goal) {
                scene_ok = false;
                break;
            }
            double lo_a = 0.0;
            double hi_a = 1.0;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo_a + hi_a);
                (realized(mid) < pl.scr_goal ? lo_a : hi_a) = mid;
            }
            const double amplitude = 0.5 * (lo_a + hi_a);
            const double scr = realized(amplitude);
            if (std::abs(scr - pl.scr_goal) > 1e-6 * std::max(1.0, pl.scr_goal)) {
                scene_ok = false;
                break;
            }
            for (const auto& tap : pl.taps) {
                pixels[tap.index] = std::clamp(pixels[tap.index] + amplitude * tap.p, 0.0, 1.0);
            }
            records.push_back({pl.cx, pl.cy, pl.shape.radius, pl.half, amplitude, scr});
        }
        if (!scene_ok) continue;

        BinaryMask mask(w, h);
        for (const auto& pl : plan)
            for (const auto& p : pl.support) mask.set(p.x, p.y, true);
        auto arr = nlohmann::json::array();
        for (const auto& r : records) arr.push_back(record_to_json(r));
        meta["targets"] = arr.dump();
        return Sample(GrayImage(w, h, std::move(pixels)), std::move(mask), std::move(meta));
    }
    throw InvalidParameter("could not place " + std::to_string(spec.n_targets) +
                           " targets at the requested SCR without overlap");
}

Sample generate_scene(const SceneSpec& spec) {
    Rng rng(spec.seed);
    // Some clutter draws cannot host a target at the requested SCR (too busy or
    // too bright); those backgrounds are redrawn from the same stream.
    constexpr int kBackgroundAttempts = 20;
    for (int attempt = 1;; ++attempt) {
        auto bg = synth_background(spec, rng);
        try {
            return inject_targets(bg, spec, rng);
        } catch (const InvalidParameter&) {
            if (attempt == kBackgroundAttempts) throw;
        }
    }
}

std::vector<TargetRecord> target_records(const Sample& sample) {
    std::vector<TargetRecord> out;
    const auto it = sample.meta.find("targets");
    if (it == sample.meta.end()) return out;
    for (const auto& j : nlohmann::json::parse(it->second)) {
        out.push_back({j.at("cx").get<double>(), j.at("cy").get<double>(),
                       j.at("radius").get<double>(), j.at("window").get<int>(),
                       j.at("amplitude").get<double>(), j.at("scr").get<double>()});
    }
    return out;
}

std::optional<double> min_realized_scr(const Sample& sample) {
    const auto recs = target_records(sample);
    if (recs.empty()) return std::nullopt;
    double m = recs.front().scr;
    for (const auto& r : recs) m = std::min(m, r.scr);
    return m;
}

}  // namespace dmlab
