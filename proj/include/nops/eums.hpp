#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nops/augment.hpp"
#include "nops/cloud.hpp"
#include "nops/model.hpp"
#include "nops/trainer.hpp"

namespace nops {

/// Per-scene subsampling of novel features: min(ceil(ratio * n), cap) points.
struct SubsampleSpec {
    double ratio = 0.3;
    std::size_t cap = 1000;
};

void validate(const SubsampleSpec& spec);

/// Indices in [0, n) drawn without replacement, returned in ascending order.
std::vector<std::size_t> subsample_psi(std::size_t n, const SubsampleSpec& spec, std::mt19937_64& rng);

/// Copies the label of every labelled point (label >= 0) to its nearest
/// point that was unlabelled on entry. Distance ties go to the lower index;
/// when two labelled points pick the same neighbour the earlier one wins.
std::vector<int> propagate_nn(std::span<const Point3> coords, std::span<const int> labels);

struct EumsConfig {
    TrainConfig pretrain{.epochs = 20};
    TrainConfig finetune{.epochs = 10};
    ModelConfig model{.heads = 1, .overcluster_heads = false};
    AugmentConfig augment;
    SubsampleSpec subsample;
    /// Cluster to overcluster_factor * C_n first, then merge by entropy.
    bool overcluster = false;
    std::size_t overcluster_factor = 3;
    double entropy_temperature = 0.1;
    std::uint64_t seed = 0;
};

/// Over-clustered partition reduced to `target` groups: soft assignments
/// softmax(-d^2 / temperature) to every centroid give each cluster a mean
/// entropy; the `target` lowest-entropy clusters become anchors and every
/// other cluster joins the anchor with the nearest centroid. Returns the
/// group (0..target-1, anchors in ascending cluster order) of every cluster.
std::vector<std::size_t> merge_by_entropy(const ad::Tensor& points, const std::vector<std::size_t>& assignment,
                                          const ad::Tensor& centroids, std::size_t target, double temperature);

/// (point index, pseudo class) pairs of one scene.
using ScenePseudoLabels = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

struct EumsResult {
    SegmentationModel model;
    std::vector<ScenePseudoLabels> pseudo_labels;
    std::vector<double> pretrain_loss;
    std::vector<double> finetune_loss;
};

/// Pretrain on base points, cluster subsampled novel features of the whole
/// dataset, propagate to coordinate neighbours, then fine-tune on base
/// ground truth plus the pseudo-labels. Reads masked scenes only.
EumsResult run_eums(const std::vector<TrainingScene>& scenes, const SplitSpec& split, const EumsConfig& cfg);

/// Little-endian u32 pairs, no header.
std::vector<std::uint8_t> encode_pseudo_labels(const ScenePseudoLabels& labels);
ScenePseudoLabels decode_pseudo_labels(std::span<const std::uint8_t> bytes);
/// One `<scene index, 6 digits>.bin` file per scene under `dir`.
void write_pseudo_labels(const std::filesystem::path& dir, const std::vector<ScenePseudoLabels>& labels);

}  // namespace nops
