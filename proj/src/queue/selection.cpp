#include "nops/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nops {

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-12));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

std::vector<int> row_argmax(const ad::Tensor& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        auto row = probs.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

SelectionResult select_phi(const ad::Tensor& probs, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("select_phi: percentile must lie in [0, 1)");
    SelectionResult result;
    if (probs.size() == 0) return result;
    const std::size_t m = probs.rows(), classes = probs.cols();
    for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (double v : probs.row(r)) {
            if (!(v >= 0.0) || v > 1.0 + 1e-9) throw std::invalid_argument("select_phi: probabilities outside [0,1]");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6) {
            throw std::invalid_argument("select_phi: row " + std::to_string(r) + " sums to " + std::to_string(s));
        }
    }
    const auto argmax = row_argmax(probs);
    std::vector<std::vector<double>> per_class(classes);
    for (std::size_t r = 0; r < m; ++r) per_class[argmax[r]].push_back(probs(r, argmax[r]));
    result.thresholds.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        if (!per_class[c].empty()) result.thresholds[c] = nearest_rank_percentile(per_class[c], p);
    }
    for (std::size_t r = 0; r < m; ++r) {
        const int c = argmax[r];
        if (probs(r, c) >= *result.thresholds[c]) result.kept.push_back(r);
    }
    return result;
}

}  // namespace nops
