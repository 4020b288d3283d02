#include "dmlab/dataset.hpp"

#include "dmlab/errors.hpp"
#include "dmlab/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace dmlab {

namespace {

std::string index_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i);
    return buf;
}

}  // namespace

void DatasetConfig::validate() const {
    scene.validate();
    if (min_targets < 0 || max_targets > 8 || min_targets > max_targets) {
        throw InvalidParameter("dataset target range must satisfy 0 <= min <= max <= 8");
    }
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw InvalidParameter("train_fraction must lie in [0, 1]");
    }
}

std::vector<Sample> Dataset::train() const {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (is_train[i]) out.push_back(samples[i]);
    return out;
}

std::vector<Sample> Dataset::test() const {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (!is_train[i]) out.push_back(samples[i]);
    return out;
}

nlohmann::json spec_to_json(const SceneSpec& s) {
    return {{"size", s.size},
            {"background", to_string(s.background)},
            {"n_targets", s.n_targets},
            {"target_kind", to_string(s.target_kind)},
            {"scr_range", {s.scr_min, s.scr_max}},
            {"seed", s.seed},
            {"octaves", s.octaves},
            {"sensor_noise", s.sensor_noise}};
}

SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.size = j.at("size").get<int>();
    s.background = parse_background_kind(j.at("background").get<std::string>());
    s.n_targets = j.at("n_targets").get<int>();
    s.target_kind = parse_target_kind(j.at("target_kind").get<std::string>());
    s.scr_min = j.at("scr_range").at(0).get<double>();
    s.scr_max = j.at("scr_range").at(1).get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.octaves = j.value("octaves", -1);
    s.sensor_noise = j.value("sensor_noise", 0.01);
    s.validate();
    return s;
}

std::vector<SceneSpec> dataset_specs(int n, const DatasetConfig& cfg, std::uint64_t seed) {
    if (n < 1) throw InvalidParameter("dataset size must be at least 1");
    cfg.validate();
    static constexpr BackgroundKind kinds[] = {BackgroundKind::SkyGradient, BackgroundKind::Cloud,
                                               BackgroundKind::SeaClutter, BackgroundKind::Field,
                                               BackgroundKind::CityBlocks};
    std::vector<SceneSpec> specs;
    specs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SceneSpec s = cfg.scene;
        s.seed = derive_seed(seed, "sample/" + std::to_string(i));
        Rng pick(derive_seed(s.seed, "spec"));
        if (cfg.vary_background) s.background = kinds[pick.uniform_int(0, 4)];
        s.n_targets = std::min(pick.uniform_int(cfg.min_targets, cfg.max_targets),
                               target_capacity(s.target_kind, s.size));
        specs.push_back(s);
    }
    return specs;
}

std::vector<bool> split_train(int n, double train_fraction, std::uint64_t seed) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const auto key = [seed](int i) { return mix64(seed ^ (0xA5A5A5A5ULL + static_cast<std::uint64_t>(i))); };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto ka = key(a);
        const auto kb = key(b);
        return ka != kb ? ka < kb : a < b;
    });
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * n));
    std::vector<bool> is_train(static_cast<std::size_t>(n), false);
    for (std::size_t r = 0; r < n_train; ++r) is_train[static_cast<std::size_t>(order[r])] = true;
    return is_train;
}

namespace {

Dataset assemble(std::vector<SceneSpec> specs, std::vector<bool> is_train, nlohmann::json manifest) {
    Dataset ds;
    ds.specs = std::move(specs);
    ds.is_train = std::move(is_train);
    auto entries = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.specs.size(); ++i) {
        ds.samples.push_back(generate_scene(ds.specs[i]));
        ds.samples.back().meta["lineage"] = "synth";
        ds.samples.back().meta["index"] = index_name(i);
        entries.push_back({{"index", i},
                           {"split", ds.is_train[i] ? "train" : "test"},
                           {"spec", spec_to_json(ds.specs[i])}});
    }
    manifest["entries"] = std::move(entries);
    ds.manifest = std::move(manifest);
    return ds;
}

}  // namespace

Dataset make_dataset(int n, const DatasetConfig& cfg, std::uint64_t seed) {
    auto specs = dataset_specs(n, cfg, seed);
    auto is_train = split_train(n, cfg.train_fraction, seed);
    nlohmann::json manifest = {{"format", "dmlab-dataset/1"},
                               {"seed", seed},
                               {"n", n},
                               {"train_fraction", cfg.train_fraction},
                               {"template", spec_to_json(cfg.scene)},
                               {"vary_background", cfg.vary_background},
                               {"targets_range", {cfg.min_targets, cfg.max_targets}}};
    return assemble(std::move(specs), std::move(is_train), std::move(manifest));
}

Dataset regenerate_from_manifest(const nlohmann::json& manifest) {
    std::vector<SceneSpec> specs;
    std::vector<bool> is_train;
    for (const auto& e : manifest.at("entries")) {
        specs.push_back(spec_from_json(e.at("spec")));
        is_train.push_back(e.at("split").get<std::string>() == "train");
    }
    nlohmann::json header = manifest;
    header.erase("entries");
    return assemble(std::move(specs), std::move(is_train), std::move(header));
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const std::vector<bool>& is_train, nlohmann::json manifest) {
    if (samples.size() != is_train.size()) throw ShapeMismatch("write_dataset: split length mismatch");
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    auto entries = manifest.contains("entries") ? manifest["entries"] : nlohmann::json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto name = index_name(i);
        write_pgm(dir / "images" / (name + ".pgm"), samples[i].image);
        write_pbm(dir / "masks" / (name + ".pbm"), samples[i].mask);
        if (entries.size() <= i) entries.push_back({{"index", i}});
        auto& e = entries[i];
        e["image"] = "images/" + name + ".pgm";
        e["mask"] = "masks/" + name + ".pbm";
        e["split"] = is_train[i] ? "train" : "test";
        e["meta"] = samples[i].meta;
        if (auto it = samples[i].meta.find("lineage"); it != samples[i].meta.end()) {
            e["lineage"] = it->second;
        }
    }
    manifest["entries"] = std::move(entries);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw IoError("missing dataset manifest: " + path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    Dataset ds;
    for (const auto& e : manifest.at("entries")) {
        auto img = read_pgm(dir / e.at("image").get<std::string>());
        auto mask = read_pbm(dir / e.at("mask").get<std::string>());
        std::map<std::string, std::string> meta;
        if (e.contains("meta")) meta = e.at("meta").get<std::map<std::string, std::string>>();
        ds.samples.emplace_back(std::move(img), std::move(mask), std::move(meta));
        ds.is_train.push_back(e.value("split", "train") == "train");
        if (e.contains("spec")) ds.specs.push_back(spec_from_json(e.at("spec")));
    }
    ds.manifest = std::move(manifest);
    return ds;
}

}  // namespace dmlab
