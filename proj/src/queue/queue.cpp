#include "nops/queue.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nops {

namespace {

// First n entries of a partial Fisher-Yates shuffle of 0..count-1.
std::vector<std::size_t> draw_without_replacement(std::size_t count, std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    n = std::min(n, count);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, count - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    return idx;
}

}  // namespace

void validate(const QueueConfig& cfg) {
    if (cfg.capacity == 0) throw std::invalid_argument("queue capacity must be positive");
    if (!(cfg.insert_fraction >= 0.0 && cfg.insert_fraction <= 1.0)) {
        throw std::invalid_argument("queue insert fraction must lie in [0, 1]");
    }
}

FeatureQueue::FeatureQueue(std::size_t classes, std::size_t dim, QueueConfig cfg)
    : classes_(classes), dim_(dim), cfg_(cfg) {
    validate(cfg_);
    if (classes == 0 || dim == 0) throw std::invalid_argument("queue needs classes and a feature size");
    capacity_ = cfg_.balanced ? cfg_.capacity : cfg_.capacity * classes;
    buckets_.resize(cfg_.balanced ? classes : 1);
}

std::size_t FeatureQueue::total_size() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
}

void FeatureQueue::push(std::size_t bucket, std::span<const double> feature) {
    if (feature.size() != dim_) throw std::invalid_argument("queue: feature size mismatch");
    auto& b = buckets_.at(bucket);
    b.emplace_back(feature.begin(), feature.end());
    while (b.size() > capacity_) b.pop_front();
}

void FeatureQueue::insert(const ad::Tensor& features, std::span<const int> predicted_class, std::mt19937_64& rng) {
    if (predicted_class.empty()) return;
    if (features.rows() != predicted_class.size() || features.cols() != dim_) {
        throw std::invalid_argument("queue: features and classes disagree in size");
    }
    std::vector<std::vector<std::size_t>> candidates(buckets_.size());
    for (std::size_t i = 0; i < predicted_class.size(); ++i) {
        const int c = predicted_class[i];
        if (c < 0 || static_cast<std::size_t>(c) >= classes_) throw std::out_of_range("queue: class out of range");
        candidates[cfg_.balanced ? static_cast<std::size_t>(c) : 0].push_back(i);
    }
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
        const auto& cand = candidates[b];
        if (cand.empty()) continue;
        const double exact = cfg_.insert_fraction * static_cast<double>(cand.size());
        const auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
        auto chosen = draw_without_replacement(cand.size(), n, rng);
        std::sort(chosen.begin(), chosen.end());
        for (auto k : chosen) push(b, features.row(cand[k]));
    }
}

FeatureQueue::Sample FeatureQueue::sample(std::size_t per_class, std::mt19937_64& rng) const {
    Sample s;
    const std::size_t per_bucket = cfg_.balanced ? per_class : per_class * classes_;
    std::vector<const std::vector<double>*> rows;
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
        for (auto k : draw_without_replacement(buckets_[b].size(), per_bucket, rng)) {
            rows.push_back(&buckets_[b][k]);
            s.bucket.push_back(b);
        }
    }
    if (rows.empty()) return s;
    s.features = ad::Tensor::matrix(rows.size(), dim_);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r]->begin(), rows[r]->end(), s.features.row(r).begin());
    return s;
}

}  // namespace nops
