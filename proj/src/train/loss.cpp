#include "nops/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nops {

std::vector<double> LossWeights::combined(std::size_t novel_slots) const {
    std::vector<double> w = base;
    w.insert(w.end(), novel_slots, novel);
    return w;
}

LossWeights base_class_weights(const std::vector<TrainingScene>& scenes, std::size_t base_count) {
    LossWeights w;
    if (base_count == 0) return w;
    std::vector<double> counts(base_count, 0.0);
    for (const auto& s : scenes) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s.roles[i] == PointRole::Base) counts[static_cast<std::size_t>(s.base_target[i])] += 1.0;
        }
    }
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    w.base.resize(base_count);
    for (std::size_t c = 0; c < base_count; ++c) {
        const double freq = std::max(counts[c], 1.0) / std::max(total, 1.0);
        w.base[c] = 1.0 / freq;
    }
    const double mean = std::accumulate(w.base.begin(), w.base.end(), 0.0) / static_cast<double>(base_count);
    for (double& v : w.base) v /= mean;
    return w;
}

namespace {

void check_shapes(const ad::Tensor& predicted, const ad::Tensor& targets, std::span<const double> weights) {
    if (predicted.shape() != targets.shape() || predicted.rank() != 2 || weights.size() != predicted.cols()) {
        throw ad::ShapeError("weighted_ce: prediction " + ad::to_string(predicted.shape()) + ", target " +
                             ad::to_string(targets.shape()) + ", " + std::to_string(weights.size()) + " weights");
    }
}

// -w_c t_c / n for targeted rows, zero elsewhere.
ad::Tensor ce_coefficients(const ad::Tensor& targets, std::span<const double> weights) {
    std::size_t targeted = 0;
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        auto row = targets.row(r);
        if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) ++targeted;
    }
    ad::Tensor coeff(targets.shape(), 0.0);
    if (targeted == 0) return coeff;
    const double inv = 1.0 / static_cast<double>(targeted);
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        for (std::size_t c = 0; c < targets.cols(); ++c) coeff(r, c) = -weights[c] * targets(r, c) * inv;
    }
    return coeff;
}

}  // namespace

double weighted_ce(const ad::Tensor& predicted, const ad::Tensor& targets, std::span<const double> weights) {
    check_shapes(predicted, targets, weights);
    const ad::Tensor coeff = ce_coefficients(targets, weights);
    double loss = 0.0;
    for (std::size_t i = 0; i < coeff.size(); ++i) {
        if (coeff[i] != 0.0) loss += coeff[i] * std::log(std::max(predicted[i], ad::kLogFloor));
    }
    return loss;
}

ad::Var weighted_ce(ad::Var predicted, const ad::Tensor& targets, std::span<const double> weights) {
    check_shapes(predicted.value(), targets, weights);
    ad::Graph& g = *predicted.graph;
    return ad::sum(ad::mul(ad::log_clamped(predicted), g.input(ce_coefficients(targets, weights))));
}

double swapped_loss(const ad::Tensor& pred_a, const ad::Tensor& pred_b, const ad::Tensor& target_a,
                    const ad::Tensor& target_b, std::span<const double> weights) {
    if (pred_a.shape() != pred_b.shape()) throw ad::ShapeError("swapped_loss: views differ in size");
    return weighted_ce(pred_a, target_b, weights) + weighted_ce(pred_b, target_a, weights);
}

ad::Var swapped_loss(ad::Var pred_a, ad::Var pred_b, const ad::Tensor& target_a, const ad::Tensor& target_b,
                     std::span<const double> weights) {
    if (pred_a.shape() != pred_b.shape()) throw ad::ShapeError("swapped_loss: views differ in size");
    return ad::add(weighted_ce(pred_a, target_b, weights), weighted_ce(pred_b, target_a, weights));
}

}  // namespace nops
