#pragma once

#include "dmlab/image.hpp"
#include "dmlab/rng.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dmlab {

enum class BackgroundKind { SkyGradient, Cloud, SeaClutter, Field, CityBlocks };
enum class TargetKind { Point, GaussianBlob, Extended };

std::string to_string(BackgroundKind kind);
std::string to_string(TargetKind kind);
BackgroundKind parse_background_kind(const std::string& name);
TargetKind parse_target_kind(const std::string& name);

/// Recipe for one synthetic infrared scene.
struct SceneSpec {
    int size = 64;
    BackgroundKind background = BackgroundKind::Cloud;
    int n_targets = 1;
    TargetKind target_kind = TargetKind::GaussianBlob;
    double scr_min = 3.0;
    double scr_max = 8.0;
    std::uint64_t seed = 0;
    /// Value-noise octaves; -1 selects the background kind's default (2-4).
    int octaves = -1;
    /// Standard deviation of white sensor noise added to the background.
    double sensor_noise = 0.01;

    void validate() const;
    bool operator==(const SceneSpec&) const = default;
};

/// Image plus label and provenance strings. Image and mask always share dimensions.
struct Sample {
    GrayImage image;
    BinaryMask mask;
    std::map<std::string, std::string> meta;

    Sample(GrayImage img, BinaryMask m, std::map<std::string, std::string> meta_ = {});
};

/// Placement record for one injected target (also serialized into Sample::meta["targets"]).
struct TargetRecord {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;  // support radius of the mask
    int window = 0;       // half-width of the square injection window
    double amplitude = 0.0;
    double scr = 0.0;     // realized signal-to-clutter ratio
};

/// (mean(target) - mean(annulus)) / std(annulus).
///
/// The generator's annulus is the ring radius+2 < dist <= radius+8 around the
/// target centre, minus mask pixels and minus other targets' injection windows.
double measure_scr(const GrayImage& img, const std::vector<Pixel>& target_pixels,
                   const std::vector<Pixel>& annulus);

/// Targets guaranteed to fit a size x size scene with disjoint injection windows
/// (worst-case shape radius on a square grid). 0 when even one does not fit.
int target_capacity(TargetKind kind, int size);

GrayImage synth_background(const SceneSpec& spec, Rng& rng);
Sample inject_targets(const GrayImage& background, const SceneSpec& spec, Rng& rng);

/// synth_background + inject_targets driven by Rng(spec.seed).
Sample generate_scene(const SceneSpec& spec);

std::vector<TargetRecord> target_records(const Sample& sample);
/// Smallest realized SCR across targets, or nullopt for target-free scenes.
std::optional<double> min_realized_scr(const Sample& sample);

}  // namespace dmlab
