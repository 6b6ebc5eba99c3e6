#include "nops/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nops {

void validate(const EpsilonSchedule& s) {
    if (!(s.eps_end > 0.0) || s.eps_start < s.eps_end) {
        throw std::invalid_argument("epsilon schedule needs eps_start >= eps_end > 0");
    }
    if (s.total_epochs == 0) throw std::invalid_argument("epsilon schedule needs at least one epoch");
}

double epsilon_at(const EpsilonSchedule& s, std::size_t epoch) {
    if (s.total_epochs <= 1) return s.eps_start;
    const double t = std::clamp(static_cast<double>(epoch) / static_cast<double>(s.total_epochs - 1), 0.0, 1.0);
    // Written as a convex combination so both endpoints are reproduced exactly.
    const double eps = (1.0 - t) * s.eps_start + t * s.eps_end;
    return std::clamp(eps, s.eps_end, s.eps_start);
}

ad::Tensor sinkhorn_assign(const ad::Tensor& scores, double eps, std::size_t n_iters) {
    if (!(eps > 0.0)) throw std::invalid_argument("sinkhorn: eps must be positive");
    if (scores.rank() != 2) throw std::invalid_argument("sinkhorn: scores must be a matrix");
    if (!scores.all_finite()) throw std::invalid_argument("sinkhorn: scores contain NaN or Inf");
    const std::size_t rho = scores.rows(), m = scores.cols();
    const double row_target = 1.0 / static_cast<double>(rho);
    const double col_target = 1.0 / static_cast<double>(m);

    ad::Tensor q = scores;
    for (std::size_t c = 0; c < m; ++c) {
        double mx = q(0, c);
        for (std::size_t r = 1; r < rho; ++r) mx = std::max(mx, q(r, c));
        for (std::size_t r = 0; r < rho; ++r) q(r, c) = std::exp((q(r, c) - mx) / eps);
    }
    double total = 0.0;
    for (double v : q.values()) total += v;
    for (double& v : q.values()) v /= total;

    std::vector<double> col_sum(m);
    for (std::size_t it = 0; it < n_iters; ++it) {
        std::fill(col_sum.begin(), col_sum.end(), 0.0);
        for (std::size_t r = 0; r < rho; ++r) {
            for (std::size_t c = 0; c < m; ++c) col_sum[c] += q(r, c);
        }
        for (std::size_t r = 0; r < rho; ++r) {
            for (std::size_t c = 0; c < m; ++c) {
                if (col_sum[c] > 0.0) q(r, c) *= col_target / col_sum[c];
            }
        }
        for (std::size_t r = 0; r < rho; ++r) {
            auto row = q.row(r);
            double s = 0.0;
            for (double v : row) s += v;
            // An underflowed row has no mass to rescale.
            if (s > 0.0) {
                for (double& v : row) v *= row_target / s;
            }
        }
    }
    return q;
}

ad::Tensor pseudo_labels_from(const ad::Tensor& q, std::size_t m_batch) {
    if (m_batch > q.cols()) throw std::invalid_argument("pseudo_labels_from: m_batch exceeds column count");
    const std::size_t rho = q.rows();
    ad::Tensor out = ad::Tensor::matrix(std::max<std::size_t>(m_batch, 1), rho);
    if (m_batch == 0) return ad::Tensor();
    for (std::size_t c = 0; c < m_batch; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < rho; ++r) s += q(r, c);
        for (std::size_t r = 0; r < rho; ++r) out(c, r) = s > 0.0 ? q(r, c) / s : 1.0 / static_cast<double>(rho);
    }
    return out;
}

}  // namespace nops
