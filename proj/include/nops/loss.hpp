#pragma once

#include <span>
#include <vector>

#include "nops/cloud.hpp"
#include "nops/graph.hpp"

namespace nops {

/// Per-class cross-entropy weights over the label space [base | novel].
struct LossWeights {
    std::vector<double> base;  // one per base class, mean 1
    double novel = 1.0;        // shared by every novel slot

    /// Weight vector for a label space with `novel_slots` novel outputs.
    std::vector<double> combined(std::size_t novel_slots) const;
};

/// Inverse relative frequency of each base class over the training scenes,
/// normalized to mean 1. Absent classes are counted once.
LossWeights base_class_weights(const std::vector<TrainingScene>& scenes, std::size_t base_count);

/// Mean over targeted rows of -sum_c w_c t_c log q_c, with log clamped at
/// 1e-12. Rows whose target is all zero carry no supervision and are left
/// out of the mean; the loss is 0 when no row is targeted. Throws
/// ad::ShapeError on mismatched shapes.
double weighted_ce(const ad::Tensor& predicted, const ad::Tensor& targets, std::span<const double> weights);

/// Differentiable version; `predicted` holds probabilities.
ad::Var weighted_ce(ad::Var predicted, const ad::Tensor& targets, std::span<const double> weights);

/// l(pred_a, target_b) + l(pred_b, target_a) for two views sharing point
/// identity.
double swapped_loss(const ad::Tensor& pred_a, const ad::Tensor& pred_b, const ad::Tensor& target_a,
                    const ad::Tensor& target_b, std::span<const double> weights);
ad::Var swapped_loss(ad::Var pred_a, ad::Var pred_b, const ad::Tensor& target_a, const ad::Tensor& target_b,
                     std::span<const double> weights);

}  // namespace nops
