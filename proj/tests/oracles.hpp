#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "nops/tensor.hpp"

namespace oracle {

using nops::ad::Tensor;

inline Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t = Tensor::matrix(r, c);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

/// rho x m cosine similarities between random unit vectors in R^dim, the
/// score distribution the trainer hands to Sinkhorn.
inline Tensor random_cosine_scores(std::size_t rho, std::size_t m, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    auto unit_rows = [&](std::size_t r) {
        Tensor t = Tensor::matrix(r, dim);
        for (std::size_t i = 0; i < r; ++i) {
            double ss = 0.0;
            for (std::size_t d = 0; d < dim; ++d) ss += (t(i, d) = n(rng)) * t(i, d);
            for (std::size_t d = 0; d < dim; ++d) t(i, d) /= std::sqrt(ss);
        }
        return t;
    };
    const Tensor p = unit_rows(rho), z = unit_rows(m);
    Tensor s = Tensor::matrix(rho, m);
    for (std::size_t i = 0; i < rho; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t d = 0; d < dim; ++d) s(i, j) += p(i, d) * z(j, d);
    return s;
}

/// Sinkhorn in the log domain, iterated until both marginals are within tol.
inline Tensor sinkhorn_converged(const Tensor& scores, double eps, double tol = 1e-12, int max_iters = 200000) {
    const std::size_t rho = scores.rows(), m = scores.cols();
    std::vector<double> f(rho, 0.0), g(m, 0.0);
    const double log_r = -std::log(static_cast<double>(rho)), log_c = -std::log(static_cast<double>(m));
    auto logsumexp = [](const std::vector<double>& v) {
        const double mx = *std::max_element(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += std::exp(x - mx);
        return mx + std::log(s);
    };
    Tensor q = Tensor::matrix(rho, m);
    for (int it = 0; it < max_iters; ++it) {
        for (std::size_t j = 0; j < m; ++j) {
            std::vector<double> v(rho);
            for (std::size_t i = 0; i < rho; ++i) v[i] = scores(i, j) / eps + f[i];
            g[j] = log_c - logsumexp(v);
        }
        for (std::size_t i = 0; i < rho; ++i) {
            std::vector<double> v(m);
            for (std::size_t j = 0; j < m; ++j) v[j] = scores(i, j) / eps + g[j];
            f[i] = log_r - logsumexp(v);
        }
        double err = 0.0;
        for (std::size_t i = 0; i < rho; ++i)
            for (std::size_t j = 0; j < m; ++j) q(i, j) = std::exp(scores(i, j) / eps + f[i] + g[j]);
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < rho; ++i) s += q(i, j);
            err = std::max(err, std::abs(s - 1.0 / static_cast<double>(m)));
        }
        if (err < tol) break;
    }
    return q;
}

/// Best total weight over every permutation (n <= 8).
inline double brute_force_assignment(const Tensor& w, std::vector<int>* best_perm = nullptr) {
    const std::size_t n = w.rows();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = -std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += w(r, static_cast<std::size_t>(perm[r]));
        if (s > best) {
            best = s;
            if (best_perm) *best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Central finite difference of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-4) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

/// Best within-cluster SSE over Lloyd runs started from every k-subset of
/// the rows (small instances only).
inline double kmeans_exhaustive_sse(const Tensor& x, std::size_t k) {
    const std::size_t n = x.rows(), d = x.cols();
    auto dist2 = [&](std::size_t i, const std::vector<double>& c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (x(i, j) - c[j]) * (x(i, j) - c[j]);
        return s;
    };
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
        std::vector<std::vector<double>> c;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i]) c.emplace_back(x.row(i).begin(), x.row(i).end());
        double sse = 0.0;
        for (int it = 0; it < 100; ++it) {
            std::vector<std::vector<double>> acc(k, std::vector<double>(d, 0.0));
            std::vector<std::size_t> cnt(k, 0);
            sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t a = 0;
                for (std::size_t q = 1; q < k; ++q)
                    if (dist2(i, c[q]) < dist2(i, c[a])) a = q;
                sse += dist2(i, c[a]);
                ++cnt[a];
                for (std::size_t j = 0; j < d; ++j) acc[a][j] += x(i, j);
            }
            bool moved = false;
            for (std::size_t q = 0; q < k; ++q) {
                if (cnt[q] == 0) continue;
                for (std::size_t j = 0; j < d; ++j) {
                    const double v = acc[q][j] / static_cast<double>(cnt[q]);
                    moved = moved || v != c[q][j];
                    c[q][j] = v;
                }
            }
            if (!moved) break;
        }
        best = std::min(best, sse);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6); }

}  // namespace oracle
