#pragma once

#include <vector>

#include "nops/tensor.hpp"

namespace nops {

/// Maximum-weight perfect matching on a square matrix. Returns col_of_row
/// where row r is matched to column col_of_row[r]. Among optimal matchings
/// the lexicographically smallest col_of_row is returned. Throws
/// std::invalid_argument for a non-square or non-finite matrix.
std::vector<int> max_weight_assignment(const ad::Tensor& weights);

/// Total weight of an assignment.
double assignment_value(const ad::Tensor& weights, const std::vector<int>& col_of_row);

}  // namespace nops
