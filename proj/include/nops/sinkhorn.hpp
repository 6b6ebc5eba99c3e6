#pragma once

#include <cstddef>

#include "nops/tensor.hpp"

namespace nops {

/// Linear decay of the entropic regularizer over training epochs.
struct EpsilonSchedule {
    double eps_start = 0.3;
    double eps_end = 0.05;
    std::size_t total_epochs = 10;
};

void validate(const EpsilonSchedule& schedule);

/// eps_start at epoch 0, eps_end at epoch total_epochs - 1, linear in
/// between and clamped outside.
double epsilon_at(const EpsilonSchedule& schedule, std::size_t epoch);

/// Entropic transport of m points onto rho prototypes.
///
/// `scores` is rho x m (prototype-point similarities; queue columns may be
/// appended after the batch columns). Returns Q = diag(a) exp(scores/eps)
/// diag(b) after `n_iters` rounds of column then row renormalization toward
/// column sums 1/m and row sums 1/rho. Rows are always normalized last, so
/// the row marginal is exact and the column marginal is approximate for
/// small n_iters. Each column has its maximum subtracted before the
/// exponential.
///
/// Throws std::invalid_argument for eps <= 0 or non-finite scores.
ad::Tensor sinkhorn_assign(const ad::Tensor& scores, double eps, std::size_t n_iters);

/// First `m_batch` columns of Q as per-point distributions (m_batch x rho,
/// each row summing to one). Queue columns past m_batch are dropped.
ad::Tensor pseudo_labels_from(const ad::Tensor& q, std::size_t m_batch);

}  // namespace nops
