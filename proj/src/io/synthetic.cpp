#include "nops/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace nops {

void validate(const SyntheticConfig& cfg) {
    if (cfg.n_scenes == 0) throw std::invalid_argument("synthetic config: zero scenes");
    if (cfg.points_per_scene == 0) throw std::invalid_argument("synthetic config: zero points per scene");
    if (cfg.classes.empty()) throw std::invalid_argument("synthetic config: zero classes");
    double total = 0.0;
    for (const auto& c : cfg.classes) {
        if (!(c.share > 0.0)) throw std::invalid_argument("class " + c.name + ": share must be positive");
        for (int a = 0; a < 3; ++a) {
            if (!(c.blob_spread[a] > 0.0) || !(c.center_spread[a] > 0.0)) {
                throw std::invalid_argument("class " + c.name + ": spreads must be positive");
            }
        }
        if (c.blobs_per_scene < 1) throw std::invalid_argument("class " + c.name + ": needs at least one blob");
        if (c.presence <= 0.0 || c.presence > 1.0) throw std::invalid_argument("class " + c.name + ": presence in (0,1]");
        total += c.share;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("synthetic config: shares must sum to 1");
}

namespace {

// Largest-remainder apportionment of n points over the given weights.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(n) * weights[i] / total;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
    return counts;
}

}  // namespace

std::vector<LabelledCloud> generate_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t n_classes = cfg.classes.size();

    // Presence table first, so that classes absent everywhere can be forced in.
    std::vector<std::vector<bool>> present(cfg.n_scenes, std::vector<bool>(n_classes));
    for (auto& scene : present) {
        for (std::size_t c = 0; c < n_classes; ++c) scene[c] = unit(rng) < cfg.classes[c].presence;
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        bool anywhere = false;
        for (const auto& scene : present) anywhere = anywhere || scene[c];
        if (!anywhere) present[c % cfg.n_scenes][c] = true;
    }

    std::vector<LabelledCloud> clouds;
    clouds.reserve(cfg.n_scenes);
    for (std::size_t s = 0; s < cfg.n_scenes; ++s) {
        auto& mask = present[s];
        if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < n_classes; ++c) {
                if (cfg.classes[c].share > cfg.classes[best].share) best = c;
            }
            mask[best] = true;
        }
        std::vector<double> weights(n_classes, 0.0);
        for (std::size_t c = 0; c < n_classes; ++c) weights[c] = mask[c] ? cfg.classes[c].share : 0.0;
        const auto counts = apportion(cfg.points_per_scene, weights);

        LabelledCloud cloud;
        cloud.scene_id = "synthetic/" + std::to_string(s);
        cloud.coords.reserve(cfg.points_per_scene);
        cloud.labels.reserve(cfg.points_per_scene);
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (counts[c] == 0) continue;
            const ClassArchetype& arch = cfg.classes[c];
            if (arch.planar) {
                for (std::size_t i = 0; i < counts[c]; ++i) {
                    Point3 p;
                    for (int a = 0; a < 2; ++a) {
                        p[a] = arch.center_mean[a] + arch.center_spread[a] * (2.0 * unit(rng) - 1.0);
                    }
                    p[2] = arch.center_mean[2] + arch.blob_spread[2] * gauss(rng);
                    cloud.coords.push_back(p);
                    cloud.labels.push_back(static_cast<int>(c));
                }
                continue;
            }
            std::vector<Point3> centers(static_cast<std::size_t>(arch.blobs_per_scene));
            for (auto& ctr : centers) {
                for (int a = 0; a < 3; ++a) ctr[a] = arch.center_mean[a] + arch.center_spread[a] * gauss(rng);
            }
            std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
            for (std::size_t i = 0; i < counts[c]; ++i) {
                const Point3& ctr = centers[pick(rng)];
                Point3 p;
                for (int a = 0; a < 3; ++a) p[a] = ctr[a] + arch.blob_spread[a] * gauss(rng);
                cloud.coords.push_back(p);
                cloud.labels.push_back(static_cast<int>(c));
            }
        }
        // Interleave classes so that point order carries no label information.
        for (std::size_t i = cloud.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            const std::size_t j = pick(rng);
            std::swap(cloud.coords[i - 1], cloud.coords[j]);
            std::swap(cloud.labels[i - 1], cloud.labels[j]);
        }
        clouds.push_back(std::move(cloud));
    }
    return clouds;
}

SyntheticConfig toy_config(std::size_t n_scenes, std::size_t points_per_scene, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.n_scenes = n_scenes;
    cfg.points_per_scene = points_per_scene;
    cfg.seed = seed;

    ClassArchetype ground;
    ground.name = "ground";
    ground.share = 0.30;
    ground.planar = true;
    ground.center_spread = {4.0, 4.0, 1.0};
    ground.blob_spread = {1.0, 1.0, 0.05};

    ClassArchetype low;
    low.name = "low-vehicle";
    low.share = 0.20;
    low.center_mean = {0.0, 0.0, 0.8};
    low.center_spread = {2.0, 2.0, 0.05};
    low.blob_spread = {1.2, 0.6, 0.3};
    low.blobs_per_scene = 4;
    low.presence = 0.9;

    ClassArchetype wall;
    wall.name = "wall";
    wall.share = 0.20;
    wall.center_mean = {0.0, 0.0, 2.2};
    wall.center_spread = {2.4, 2.4, 0.05};
    wall.blob_spread = {2.0, 0.3, 0.4};
    wall.blobs_per_scene = 3;
    wall.presence = 0.9;

    ClassArchetype lamp;
    lamp.name = "lamp";
    lamp.share = 0.15;
    lamp.center_mean = {0.0, 0.0, 4.6};
    lamp.center_spread = {2.0, 2.0, 0.05};
    lamp.blob_spread = {0.4, 0.4, 0.35};
    lamp.blobs_per_scene = 4;
    lamp.presence = 0.8;

    ClassArchetype canopy;
    canopy.name = "canopy";
    canopy.share = 0.15;
    canopy.center_mean = {0.0, 0.0, 10.0};
    canopy.center_spread = {2.0, 2.0, 0.05};
    canopy.blob_spread = {1.0, 1.0, 0.35};
    canopy.blobs_per_scene = 3;
    canopy.presence = 0.8;

    cfg.classes = {ground, low, wall, lamp, canopy};
    return cfg;
}

ClassMap synthetic_class_map(const SyntheticConfig& cfg) {
    ClassMap m;
    m.dataset = "synthetic";
    for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
        m.class_names.push_back(cfg.classes[c].name);
        m.raw_to_class[static_cast<std::uint32_t>(c)] = static_cast<int>(c);
    }
    return m;
}

}  // namespace nops
