#pragma once

#include "dmlab/nn/layers.hpp"
#include "dmlab/nn/optim.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dmlab::nn {

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// On disk: 8-byte magic, u64 little-endian header length, JSON header, then
/// every array's values as little-endian f64 in header order.
struct Checkpoint {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<NamedArray> arrays;
    /// Present when optimizer state was saved; moments live in `arrays` as
    /// "adam.m/<param>" and "adam.v/<param>".
    std::optional<AdamConfig> adam;
    long long adam_steps = 0;

    const NamedArray* find(const std::string& name) const;
    const NamedArray& at(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameter values (and optionally optimizer moments) as a checkpoint.
Checkpoint snapshot(const ParamSet& params, const Adam* opt = nullptr,
                    nlohmann::json meta = nlohmann::json::object());

/// Copies values by name; every parameter must be present with a matching shape.
void load_params(ParamSet& params, const Checkpoint& ckpt);
/// Rebuilds optimizer state saved by snapshot().
Adam load_adam(const ParamSet& params, const Checkpoint& ckpt);

}  // namespace dmlab::nn
