#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nops::ad {

/// Raised when operand shapes are incompatible. The message names the node.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major tensor of doubles.
///
/// Most of the code base only uses rank-2 tensors (points x channels); a
/// scalar is represented with shape {1}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }

    // Rank-2 accessors. A rank-1 tensor is viewed as a single row.
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const;
    void fill(double v);
    Tensor transposed() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

std::size_t element_count(const Shape& shape);

}  // namespace nops::ad
