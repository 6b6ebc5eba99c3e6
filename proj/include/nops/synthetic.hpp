#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nops/class_map.hpp"
#include "nops/cloud.hpp"

namespace nops {

/// Spatial model of one synthetic class.
///
/// Blob classes draw `blobs_per_scene` centers from N(center_mean,
/// center_spread^2) per axis and scatter points around them with per-axis
/// standard deviation `blob_spread`. Planar classes spread points uniformly
/// over center_mean.xy +- center_spread.xy at height N(center_mean.z,
/// blob_spread.z^2).
struct ClassArchetype {
    std::string name;
    double share = 1.0;
    bool planar = false;
    Point3 center_mean{0.0, 0.0, 0.0};
    Point3 center_spread{1.0, 1.0, 1.0};
    Point3 blob_spread{0.2, 0.2, 0.2};
    int blobs_per_scene = 1;
    /// Probability that the class occurs in a given scene.
    double presence = 1.0;
};

struct SyntheticConfig {
    std::size_t n_scenes = 10;
    std::size_t points_per_scene = 512;
    std::vector<ClassArchetype> classes;
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument on zero scenes, points or classes, shares
/// that do not sum to one, or non-positive spreads.
void validate(const SyntheticConfig& cfg);

/// Reproducible from cfg.seed. Every class occurs somewhere in the dataset;
/// single scenes may miss classes when presence < 1. Points of a scene are
/// split among its classes by renormalized share (largest remainder).
std::vector<LabelledCloud> generate_synthetic(const SyntheticConfig& cfg);

/// Five height-separated classes: a ground plane and two low blob classes
/// (base), plus two high blob classes (novel in the default toy split).
/// Scenes are compact (a few meters across) so that height, not distance
/// from the origin, is what separates the two novel classes.
SyntheticConfig toy_config(std::size_t n_scenes, std::size_t points_per_scene, std::uint64_t seed);

/// Identity class map over the archetype names.
ClassMap synthetic_class_map(const SyntheticConfig& cfg);

}  // namespace nops
