#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "nops/tensor.hpp"

namespace nops {

struct QueueConfig {
    std::size_t capacity = 1024;       // per bucket
    double insert_fraction = 0.1;
    std::size_t sample_per_class = 64;
    /// One bucket per predicted class. When false a single FIFO of
    /// capacity * classes is used and sampled for sample_per_class * classes.
    bool balanced = true;
};

void validate(const QueueConfig& cfg);

/// Buffer of past novel-point features, bucketed by predicted class.
class FeatureQueue {
public:
    FeatureQueue(std::size_t classes, std::size_t dim, QueueConfig cfg);

    struct Sample {
        ad::Tensor features;              // n x dim, empty when n == 0
        std::vector<std::size_t> bucket;  // source bucket of every row
        std::size_t size() const { return bucket.size(); }
    };

    /// Inserts a random insert_fraction (rounded up) of the candidate rows of
    /// every bucket, sampled without replacement. Oldest entries are evicted
    /// once a bucket is full.
    void insert(const ad::Tensor& features, std::span<const int> predicted_class, std::mt19937_64& rng);

    /// Appends one row to a bucket with FIFO eviction.
    void push(std::size_t bucket, std::span<const double> feature);

    /// Up to `per_class` rows drawn uniformly without replacement from every
    /// bucket; fewer when a bucket holds fewer.
    Sample sample(std::size_t per_class, std::mt19937_64& rng) const;
    Sample sample(std::mt19937_64& rng) const { return sample(cfg_.sample_per_class, rng); }

    std::size_t bucket_count() const { return buckets_.size(); }
    std::size_t bucket_size(std::size_t b) const { return buckets_.at(b).size(); }
    std::size_t bucket_capacity() const { return capacity_; }
    std::size_t total_size() const;
    std::size_t dim() const { return dim_; }
    const QueueConfig& config() const { return cfg_; }

private:
    std::size_t classes_;
    std::size_t dim_;
    QueueConfig cfg_;
    std::size_t capacity_;
    std::vector<std::deque<std::vector<double>>> buckets_;
};

}  // namespace nops
