#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "nops/tensor.hpp"

namespace nops {

struct SelectionResult {
    std::vector<std::size_t> kept;                 // ascending point indices
    std::vector<std::optional<double>> thresholds;  // per class; empty when no point predicts it
};

/// Nearest-rank percentile: the ceil(p * n)-th smallest value (the smallest
/// for p = 0). `values` must be non-empty.
double nearest_rank_percentile(std::vector<double> values, double p);

/// Per-class adaptive thresholding of predicted class probabilities.
///
/// `probs` holds one distribution per row (m x C). Each point is assigned to
/// its argmax class (ties to the lower class); the class threshold is the
/// p-th percentile of its points' maximum probabilities; points at or above
/// their class threshold are kept. Throws std::invalid_argument if p is
/// outside [0, 1) or a row is not a distribution.
SelectionResult select_phi(const ad::Tensor& probs, double p);

/// Argmax per row, ties to the lower index.
std::vector<int> row_argmax(const ad::Tensor& probs);

}  // namespace nops
