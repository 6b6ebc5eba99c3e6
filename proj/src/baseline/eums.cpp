#include "nops/eums.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "nops/binary.hpp"
#include "nops/kmeans.hpp"

namespace nops {

void validate(const SubsampleSpec& spec) {
    if (!(spec.ratio > 0.0 && spec.ratio <= 1.0)) throw std::invalid_argument("subsample ratio must lie in (0, 1]");
    if (spec.cap < 1) throw std::invalid_argument("subsample cap must be at least 1");
}

std::vector<std::size_t> subsample_psi(std::size_t n, const SubsampleSpec& spec, std::mt19937_64& rng) {
    validate(spec);
    const auto wanted = static_cast<std::size_t>(std::ceil(spec.ratio * static_cast<double>(n) - 1e-9));
    const std::size_t take = std::min({wanted, spec.cap, n});
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<int> propagate_nn(std::span<const Point3> coords, std::span<const int> labels) {
    if (coords.size() != labels.size()) throw std::invalid_argument("propagate_nn: coords and labels differ in length");
    std::vector<int> out(labels.begin(), labels.end());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (labels[i] < 0) continue;
        std::size_t best = coords.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < coords.size(); ++j) {
            if (labels[j] >= 0) continue;
            double d = 0.0;
            for (int a = 0; a < 3; ++a) d += (coords[i][a] - coords[j][a]) * (coords[i][a] - coords[j][a]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best < coords.size() && out[best] < 0) out[best] = labels[i];
    }
    return out;
}

std::vector<std::size_t> merge_by_entropy(const ad::Tensor& points, const std::vector<std::size_t>& assignment,
                                          const ad::Tensor& centroids, std::size_t target, double temperature) {
    const std::size_t k = centroids.rows();
    if (target == 0 || target > k) throw std::invalid_argument("merge_by_entropy: target must lie in [1, clusters]");
    if (!(temperature > 0.0)) throw std::invalid_argument("merge_by_entropy: temperature must be positive");
    std::vector<double> entropy(k, 0.0);
    std::vector<std::size_t> members(k, 0);
    std::vector<double> logits(k);
    for (std::size_t r = 0; r < points.rows(); ++r) {
        for (std::size_t c = 0; c < k; ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < points.cols(); ++j) {
                const double diff = points(r, j) - centroids(c, j);
                d += diff * diff;
            }
            logits[c] = -d / temperature;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double& v : logits) z += std::exp(v - mx);
        double h = 0.0;
        for (double v : logits) {
            const double p = std::exp(v - mx) / z;
            if (p > 0.0) h -= p * std::log(p);
        }
        entropy[assignment[r]] += h;
        ++members[assignment[r]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        entropy[c] = members[c] ? entropy[c] / static_cast<double>(members[c]) : std::numeric_limits<double>::infinity();
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entropy[a] < entropy[b]; });
    std::vector<std::size_t> anchors(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target));
    std::sort(anchors.begin(), anchors.end());

    std::vector<std::size_t> group(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            double d = 0.0;
            for (std::size_t j = 0; j < centroids.cols(); ++j) {
                const double diff = centroids(c, j) - centroids(anchors[a], j);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = a;
            }
        }
        group[c] = best;
    }
    return group;
}

EumsResult run_eums(const std::vector<TrainingScene>& scenes, const SplitSpec& split, const EumsConfig& cfg) {
    validate(split);
    validate(cfg.subsample);
    if (scenes.empty()) throw std::invalid_argument("eums: empty dataset");
    if (cfg.overcluster && cfg.overcluster_factor < 1) throw std::invalid_argument("eums: overcluster factor must be >= 1");
    const std::size_t nb = split.base_classes.size();
    const std::size_t nn = split.novel_classes.size();

    EumsResult result{SegmentationModel(cfg.model, nb, nn, cfg.seed), {}, {}, {}};
    SegmentationModel& model = result.model;
    TrainConfig pre = cfg.pretrain;
    pre.seed = cfg.seed;
    result.pretrain_loss = pretrain_base(model, scenes, pre, cfg.augment);

    // Subsampled novel features of every scene.
    std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
    std::vector<std::vector<std::size_t>> novel_points(scenes.size()), selected(scenes.size());
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        for (std::size_t i = 0; i < scenes[s].size(); ++i) {
            if (scenes[s].roles[i] == PointRole::Novel) novel_points[s].push_back(i);
        }
        if (novel_points[s].empty()) continue;
        selected[s] = subsample_psi(novel_points[s].size(), cfg.subsample, rng);
        const ad::Tensor z = infer_features(model, scenes[s].coords);
        for (auto k : selected[s]) {
            auto r = z.row(novel_points[s][k]);
            rows.emplace_back(r.begin(), r.end());
        }
    }
    const std::size_t clusters = cfg.overcluster ? cfg.overcluster_factor * nn : nn;
    if (rows.size() < clusters) throw std::runtime_error("eums: fewer sampled novel points than clusters");
    ad::Tensor features = ad::Tensor::matrix(rows.size(), cfg.model.feature_dim);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), features.row(r).begin());
    const KMeansResult km = kmeans(features, clusters, cfg.seed);
    std::vector<std::size_t> group(clusters);
    std::iota(group.begin(), group.end(), std::size_t{0});
    if (cfg.overcluster) group = merge_by_entropy(features, km.assignment, km.model.centroids, nn, cfg.entropy_temperature);

    // Propagation in coordinate space, per scene.
    std::vector<std::vector<int>> novel_labels(scenes.size());
    result.pseudo_labels.resize(scenes.size());
    std::size_t next = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        novel_labels[s].assign(scenes[s].size(), -1);
        if (novel_points[s].empty()) continue;
        std::vector<Point3> coords;
        for (auto i : novel_points[s]) coords.push_back(scenes[s].coords[i]);
        std::vector<int> local(novel_points[s].size(), -1);
        for (auto k : selected[s]) local[k] = static_cast<int>(group[km.assignment[next++]]);
        local = propagate_nn(coords, local);
        for (std::size_t k = 0; k < local.size(); ++k) {
            if (local[k] < 0) continue;
            novel_labels[s][novel_points[s][k]] = local[k];
            result.pseudo_labels[s].emplace_back(static_cast<std::uint32_t>(novel_points[s][k]),
                                                 static_cast<std::uint32_t>(local[k]));
        }
    }

    TrainConfig fine = cfg.finetune;
    fine.seed = cfg.seed;
    result.finetune_loss = train_supervised(model, scenes, novel_labels, fine, cfg.augment, 0);
    model.set_inference_head(0);
    return result;
}

std::vector<std::uint8_t> encode_pseudo_labels(const ScenePseudoLabels& labels) {
    std::vector<std::uint8_t> out;
    out.reserve(labels.size() * 8);
    for (const auto& [point, cls] : labels) {
        binary::put_le<std::uint32_t>(out, point);
        binary::put_le<std::uint32_t>(out, cls);
    }
    return out;
}

ScenePseudoLabels decode_pseudo_labels(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 8 != 0) throw std::runtime_error("pseudo-label file size is not a multiple of 8 bytes");
    ScenePseudoLabels out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {binary::get_le<std::uint32_t>(bytes.data() + 8 * i), binary::get_le<std::uint32_t>(bytes.data() + 8 * i + 4)};
    }
    return out;
}

void write_pseudo_labels(const std::filesystem::path& dir, const std::vector<ScenePseudoLabels>& labels) {
    for (std::size_t s = 0; s < labels.size(); ++s) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.bin", s);
        binary::write_file(dir / name, encode_pseudo_labels(labels[s]));
    }
}

}  // namespace nops
