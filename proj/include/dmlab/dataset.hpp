#pragma once

#include "dmlab/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace dmlab {

/// How a dataset varies scenes around a template spec.
struct DatasetConfig {
    SceneSpec scene{};
    /// Draw the background kind per sample uniformly from all five kinds.
    bool vary_background = true;
    int min_targets = 1;
    int max_targets = 3;
    double train_fraction = 0.7;

    void validate() const;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<SceneSpec> specs;
    std::vector<bool> is_train;
    nlohmann::json manifest;

    std::vector<Sample> train() const;
    std::vector<Sample> test() const;
};

/// Per-sample spec derivation: seed_i = derive_seed(seed, "sample/<i>").
std::vector<SceneSpec> dataset_specs(int n, const DatasetConfig& cfg, std::uint64_t seed);

/// Train/test assignment: indices ranked by mix64(seed ^ index); the first
/// round(train_fraction * n) of that order are train.
std::vector<bool> split_train(int n, double train_fraction, std::uint64_t seed);

Dataset make_dataset(int n, const DatasetConfig& cfg, std::uint64_t seed);

/// Rebuild every sample from the specs recorded in a manifest.
Dataset regenerate_from_manifest(const nlohmann::json& manifest);

nlohmann::json spec_to_json(const SceneSpec& spec);
SceneSpec spec_from_json(const nlohmann::json& j);

/// Directory layout: images/NNNN.pgm, masks/NNNN.pbm, manifest.json.
/// Sample meta (including lineage) is stored per entry in the manifest.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const std::vector<bool>& is_train, nlohmann::json manifest);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace dmlab
