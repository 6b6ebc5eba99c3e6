#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nops/tensor.hpp"

namespace nops::ad {

class ParameterStore;
class Graph;

enum class OpKind {
    Input,
    Parameter,
    MatMul,
    Add,
    Relu,
    L2NormalizeRows,
    SoftmaxRows,
    Log,
    Mul,
    Sum,
    Mean,
    Concat,
};

const char* op_name(OpKind kind);

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Define-by-run tape for reverse-mode differentiation.
///
/// Every op appends a node whose inputs already exist, so node order is a
/// topological order. Values are computed eagerly when a node is appended;
/// once built, a graph is only read (by backward()). A graph is owned by one
/// thread; independent graphs may share a ParameterStore for reading.
class Graph {
public:
    Graph() = default;
    explicit Graph(ParameterStore* params) : params_(params), grads_(params) {}
    /// Inference-only graph; backward() throws.
    explicit Graph(const ParameterStore* params) : params_(params) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Constant leaf; never receives a gradient.
    Var input(Tensor value);
    /// Leaf bound to a named parameter. Repeated lookups of the same name
    /// return the same node.
    Var parameter(const std::string& name);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
    std::size_t size() const { return nodes_.size(); }

    /// Back-propagates from a scalar node (shape {1}). Parameter gradients
    /// are accumulated into the store's gradient slots; call
    /// ParameterStore::zero_grad() first for a fresh gradient.
    void backward(Var scalar);

    /// Gradient of the last backward() pass with respect to node v. Empty
    /// tensor if v does not depend on any parameter.
    const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }

private:
    struct Node {
        OpKind kind = OpKind::Input;
        std::vector<std::size_t> inputs;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::string param_name;
        std::size_t axis = 0;
    };

    Var push(Node node);
    std::string describe(std::size_t id, OpKind kind) const;
    Node& node(Var v);

    friend Var matmul(Var, Var);
    friend Var add(Var, Var);
    friend Var relu(Var);
    friend Var l2_normalize_rows(Var);
    friend Var softmax_rows(Var);
    friend Var log_clamped(Var);
    friend Var mul(Var, Var);
    friend Var sum(Var);
    friend Var mean(Var);
    friend Var concat(std::span<const Var>, std::size_t);

    const ParameterStore* params_ = nullptr;
    ParameterStore* grads_ = nullptr;
    std::vector<Node> nodes_;
};

// Supported ops. All operate on rank-2 tensors unless stated otherwise.

/// [m,k] x [k,n] -> [m,n]. Zero entries of the left operand are skipped,
/// which keeps sparse aggregation matrices cheap.
Var matmul(Var a, Var b);
/// Elementwise sum; b may also be a single row broadcast over a's rows.
Var add(Var a, Var b);
Var relu(Var a);
/// Divides every row by its L2 norm.
Var l2_normalize_rows(Var a);
Var softmax_rows(Var a);
/// Natural log with the argument clamped below at kLogFloor.
Var log_clamped(Var a);
/// Elementwise product of equally shaped tensors.
Var mul(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
/// Concatenation along axis 0 (rows) or 1 (columns).
Var concat(std::span<const Var> parts, std::size_t axis);

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kNormFloor = 1e-12;

}  // namespace nops::ad
