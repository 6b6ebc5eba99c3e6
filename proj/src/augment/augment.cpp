#include "nops/augment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nops {

void validate(const AugmentConfig& cfg) {
    if (!(cfg.scale_lo > 0.0) || cfg.scale_hi < cfg.scale_lo) {
        throw std::invalid_argument("augmentation scale range must satisfy 0 < lo <= hi");
    }
    if (cfg.jitter_sigma < 0.0) throw std::invalid_argument("augmentation jitter must be non-negative");
}

std::vector<Point3> rotate_z(const std::vector<Point3>& coords, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    std::vector<Point3> out(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto& p = coords[i];
        out[i] = {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
    }
    return out;
}

std::vector<Point3> augment_coords(const std::vector<Point3>& coords, const AugmentConfig& cfg,
                                   std::mt19937_64& rng) {
    validate(cfg);
    std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> scale_dist(cfg.scale_lo, cfg.scale_hi);
    const double angle = cfg.rotate ? angle_dist(rng) : 0.0;
    const double scale = cfg.scale_lo == cfg.scale_hi ? cfg.scale_lo : scale_dist(rng);

    std::vector<Point3> out = cfg.rotate ? rotate_z(coords, angle) : coords;
    for (auto& p : out) {
        for (double& v : p) v *= scale;
    }
    if (cfg.jitter_sigma > 0.0) {
        std::normal_distribution<double> jitter(0.0, cfg.jitter_sigma);
        for (auto& p : out) {
            for (double& v : p) v += jitter(rng);
        }
    }
    return out;
}

ViewPair make_views(const LabelledCloud& cloud, const AugmentConfig& cfg, std::uint64_t seed) {
    if (cloud.size() == 0) throw std::invalid_argument("make_views: empty cloud");
    std::mt19937_64 rng(seed);
    ViewPair pair{cloud, cloud};
    pair.view_a.coords = augment_coords(cloud.coords, cfg, rng);
    pair.view_b.coords = augment_coords(cloud.coords, cfg, rng);
    return pair;
}

}  // namespace nops
