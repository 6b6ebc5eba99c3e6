#include "nops/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

namespace nops {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::size_t distinct_rows(const ad::Tensor& points) {
    std::set<std::vector<double>> rows;
    for (std::size_t r = 0; r < points.rows(); ++r) rows.emplace(points.row(r).begin(), points.row(r).end());
    return rows.size();
}

}  // namespace

std::size_t nearest_centroid(const KMeansModel& model, std::span<const double> point) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.k(); ++c) {
        const double d = squared_distance(point, model.centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

double kmeans_sse(const ad::Tensor& points, const KMeansModel& model, std::span<const std::size_t> assignment) {
    double s = 0.0;
    for (std::size_t r = 0; r < points.rows(); ++r) s += squared_distance(points.row(r), model.centroids.row(assignment[r]));
    return s;
}

namespace {

KMeansResult kmeans_once(const ad::Tensor& points, std::size_t k, std::mt19937_64& rng, std::size_t max_iters) {
    const std::size_t n = points.rows();
    const std::size_t dim = points.cols();

    // k-means++ seeding.
    KMeansResult res;
    res.model.centroids = ad::Tensor::matrix(k, dim);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t pick = first(rng);
    std::copy(points.row(pick).begin(), points.row(pick).end(), res.model.centroids.row(0).begin());
    std::vector<double> d2(n);
    for (std::size_t r = 0; r < n; ++r) d2[r] = squared_distance(points.row(r), res.model.centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
        std::discrete_distribution<std::size_t> weighted(d2.begin(), d2.end());
        pick = weighted(rng);
        std::copy(points.row(pick).begin(), points.row(pick).end(), res.model.centroids.row(c).begin());
        for (std::size_t r = 0; r < n; ++r) {
            d2[r] = std::min(d2[r], squared_distance(points.row(r), res.model.centroids.row(c)));
        }
    }

    res.assignment.assign(n, 0);
    for (std::size_t it = 0; it < max_iters; ++it) {
        bool changed = false;
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t c = nearest_centroid(res.model, points.row(r));
            if (it == 0 || c != res.assignment[r]) changed = true;
            res.assignment[r] = c;
        }
        res.sse.push_back(kmeans_sse(points, res.model, res.assignment));
        res.iterations = it + 1;
        if (!changed) break;

        ad::Tensor sums = ad::Tensor::matrix(k, dim);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t r = 0; r < n; ++r) {
            auto dst = sums.row(res.assignment[r]);
            auto src = points.row(r);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
            ++counts[res.assignment[r]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            auto dst = res.model.centroids.row(c);
            auto src = sums.row(c);
            for (std::size_t d = 0; d < dim; ++d) dst[d] = src[d] / static_cast<double>(counts[c]);
        }
    }
    return res;
}

}  // namespace

KMeansResult kmeans(const ad::Tensor& points, std::size_t k, std::uint64_t seed, std::size_t max_iters,
                    std::size_t restarts) {
    if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
    if (restarts == 0) throw std::invalid_argument("kmeans: restarts must be positive");
    const std::size_t n = points.rows();
    if (n < k || distinct_rows(points) < k) {
        throw std::invalid_argument("kmeans: need at least " + std::to_string(k) + " distinct points, got " +
                                    std::to_string(n) + " rows");
    }
    std::mt19937_64 rng(seed);
    KMeansResult best = kmeans_once(points, k, rng, max_iters);
    for (std::size_t r = 1; r < restarts; ++r) {
        KMeansResult run = kmeans_once(points, k, rng, max_iters);
        if (run.sse.back() < best.sse.back()) best = std::move(run);
    }
    return best;
}

}  // namespace nops
