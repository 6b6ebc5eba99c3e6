#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nops/tensor.hpp"

namespace nops {

struct KMeansModel {
    ad::Tensor centroids;  // k x D
    std::size_t k() const { return centroids.rows(); }
};

struct KMeansResult {
    KMeansModel model;
    std::vector<std::size_t> assignment;  // cluster of every input row
    std::vector<double> sse;              // objective after every assignment step
    std::size_t iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or max_iters is reached, repeated `restarts` times from one
/// seeded stream; the run with the lowest final SSE is kept (the earliest
/// on ties) along with its SSE history. Distance ties go to the lower cluster;
/// a cluster that empties keeps its previous centroid. Throws
/// std::invalid_argument when `points` has fewer than k distinct rows.
KMeansResult kmeans(const ad::Tensor& points, std::size_t k, std::uint64_t seed, std::size_t max_iters = 300,
                    std::size_t restarts = 10);

std::size_t nearest_centroid(const KMeansModel& model, std::span<const double> point);

/// Within-cluster sum of squared distances.
double kmeans_sse(const ad::Tensor& points, const KMeansModel& model, std::span<const std::size_t> assignment);

}  // namespace nops
