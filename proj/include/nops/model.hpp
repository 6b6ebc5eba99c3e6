#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nops/cloud.hpp"
#include "nops/graph.hpp"
#include "nops/parameters.hpp"

namespace nops {

struct ModelConfig {
    std::size_t feature_dim = 32;       // D
    std::size_t hidden = 64;            // per-point encoder width
    std::size_t k = 16;                 // neighbours averaged per point
    std::size_t heads = 5;              // novel heads (and over-clustering heads)
    std::size_t overcluster_factor = 3;
    bool overcluster_heads = true;
    double input_scale = 0.1;           // coordinates are multiplied by this
    double logit_scale = 10.0;          // inverse temperature of novel and over heads
};

void validate(const ModelConfig& cfg);

/// k nearest neighbours of every point (the point itself excluded), ordered
/// by distance with ties broken by lower index. k is capped at m - 1.
std::vector<std::vector<std::uint32_t>> knn_indices(std::span<const Point3> coords, std::size_t k);

/// Row-stochastic m x m matrix averaging each point's neighbours. A single
/// point averages itself.
ad::Tensor neighbour_mean_matrix(std::span<const Point3> coords, std::size_t k);

/// Shared feature extractor plus base, novel and over-clustering heads.
///
/// Features are stored one row per point (m x D), each row unit norm. The
/// weight matrix of novel head h has shape D x C_n and is used directly as
/// that head's prototype matrix: novel logits = logit_scale * Z * P with no
/// bias. Pseudo-labelling scores use the unscaled Z * P.
class SegmentationModel {
public:
    SegmentationModel(const ModelConfig& cfg, std::size_t base_classes, std::size_t novel_classes,
                      std::uint64_t seed);
    /// Wraps parameters restored from a checkpoint. Architecture sizes come
    /// from the tensor shapes and the stored metadata entries.
    explicit SegmentationModel(ad::ParameterStore params);

    const ModelConfig& config() const { return cfg_; }
    ad::ParameterStore& parameters() { return params_; }
    const ad::ParameterStore& parameters() const { return params_; }

    std::size_t base_count() const { return base_count_; }
    std::size_t novel_count() const { return novel_count_; }
    std::size_t head_count() const { return cfg_.heads; }
    std::size_t over_count() const { return novel_count_ * cfg_.overcluster_factor; }
    bool has_over_heads() const { return cfg_.overcluster_heads; }

    /// Index of the novel head used for inference.
    std::size_t inference_head() const;
    void set_inference_head(std::size_t head);

    /// Builds the feature extractor on g for one scene. Throws for m < 1.
    ad::Var extract_features(ad::Graph& g, std::span<const Point3> coords) const;

    ad::Var base_logits(ad::Graph& g, ad::Var features) const;
    ad::Var novel_logits(ad::Graph& g, ad::Var features, std::size_t head) const;
    ad::Var over_logits(ad::Graph& g, ad::Var features, std::size_t head) const;

    struct HeadLogits {
        ad::Var base;   // m x |C_b|
        ad::Var novel;  // m x C_n
    };
    /// Throws std::out_of_range when head >= heads().
    HeadLogits head_logits(ad::Graph& g, ad::Var features, std::size_t head) const;

    /// D x C_n prototype matrix of a novel head.
    const ad::Tensor& prototypes(std::size_t head) const;
    const ad::Tensor& over_prototypes(std::size_t head) const;

    /// Re-draws every novel and over-clustering head (used when fine-tuning
    /// a base-only model).
    void reset_novel_heads(std::uint64_t seed);

    /// Projects every novel and over-clustering prototype back to unit norm.
    void normalize_prototypes();

    /// Parameter names the optimizer updates (everything except metadata).
    std::vector<std::string> trainable_names() const;

    static std::string novel_weight_name(std::size_t head);
    static std::string over_weight_name(std::size_t head);

private:
    void init_head(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed,
                   bool replace);

    ModelConfig cfg_;
    std::size_t base_count_ = 0;
    std::size_t novel_count_ = 0;
    ad::ParameterStore params_;
};

/// Forward pass without gradients: m x D features of one scene.
ad::Tensor infer_features(const SegmentationModel& model, std::span<const Point3> coords);

/// Combined logits [base | novel head] of one scene, m x (|C_b| + C_n).
ad::Tensor infer_logits(const SegmentationModel& model, std::span<const Point3> coords, std::size_t head);

}  // namespace nops
