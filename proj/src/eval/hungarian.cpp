#include "nops/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nops {

namespace {

// Minimum-cost assignment on an n x n cost matrix (row-major), potentials
// method. Returns col_of_row.
std::vector<int> min_cost_assignment(const std::vector<double>& cost, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_of_row(n, -1);
    for (std::size_t j = 1; j <= n; ++j) col_of_row[p[j] - 1] = static_cast<int>(j - 1);
    return col_of_row;
}

double best_value(const ad::Tensor& w, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    const std::size_t n = rows.size();
    if (n == 0) return 0.0;
    std::vector<double> cost(n * n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) cost[a * n + b] = -w(rows[a], cols[b]);
    }
    const auto sol = min_cost_assignment(cost, n);
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) total += w(rows[a], cols[static_cast<std::size_t>(sol[a])]);
    return total;
}

}  // namespace

double assignment_value(const ad::Tensor& weights, const std::vector<int>& col_of_row) {
    double total = 0.0;
    for (std::size_t r = 0; r < col_of_row.size(); ++r) total += weights(r, static_cast<std::size_t>(col_of_row[r]));
    return total;
}

std::vector<int> max_weight_assignment(const ad::Tensor& weights) {
    if (weights.size() == 0) return {};
    if (weights.rank() != 2 || weights.rows() != weights.cols()) {
        throw std::invalid_argument("assignment needs a square matrix, got " + ad::to_string(weights.shape()));
    }
    if (!weights.all_finite()) throw std::invalid_argument("assignment weights must be finite");
    const std::size_t n = weights.rows();
    double scale = 1.0;
    for (double v : weights.values()) scale = std::max(scale, std::abs(v));
    const double tol = 1e-9 * scale * static_cast<double>(n);

    std::vector<std::size_t> rows(n), cols(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = cols[i] = i;
    const double optimum = best_value(weights, rows, cols);

    // Fix rows in order to the smallest column that still admits an optimum.
    std::vector<int> result(n, -1);
    double fixed_value = 0.0;
    std::vector<std::size_t> free_cols = cols;
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<std::size_t> rest_rows(rows.begin() + static_cast<std::ptrdiff_t>(r + 1), rows.end());
        for (std::size_t k = 0; k < free_cols.size(); ++k) {
            const std::size_t c = free_cols[k];
            std::vector<std::size_t> rest_cols = free_cols;
            rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
            const double v = fixed_value + weights(r, c) + best_value(weights, rest_rows, rest_cols);
            if (v >= optimum - tol) {
                result[r] = static_cast<int>(c);
                fixed_value += weights(r, c);
                free_cols = std::move(rest_cols);
                break;
            }
        }
    }
    return result;
}

}  // namespace nops
