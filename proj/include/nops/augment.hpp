#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nops/cloud.hpp"

namespace nops {

/// Per-view augmentation: rotation about the vertical axis, isotropic
/// scaling and Gaussian jitter. Point order is never changed.
struct AugmentConfig {
    bool rotate = true;
    double scale_lo = 0.95;
    double scale_hi = 1.05;
    double jitter_sigma = 0.01;  // meters
};

/// Two views of one cloud; point i of view_a is point i of view_b.
struct ViewPair {
    LabelledCloud view_a;
    LabelledCloud view_b;
};

void validate(const AugmentConfig& cfg);

std::vector<Point3> rotate_z(const std::vector<Point3>& coords, double angle);

/// One random view, drawing rotation, scale and jitter from rng in that order.
std::vector<Point3> augment_coords(const std::vector<Point3>& coords, const AugmentConfig& cfg,
                                   std::mt19937_64& rng);

/// Throws std::invalid_argument for an empty cloud.
ViewPair make_views(const LabelledCloud& cloud, const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace nops
