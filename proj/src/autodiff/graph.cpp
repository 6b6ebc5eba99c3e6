#include "nops/graph.hpp"

#include <algorithm>
#include <cmath>

#include "nops/parameters.hpp"

namespace nops::ad {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Parameter: return "parameter";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Relu: return "relu";
        case OpKind::L2NormalizeRows: return "l2_normalize_rows";
        case OpKind::SoftmaxRows: return "softmax_rows";
        case OpKind::Log: return "log";
        case OpKind::Mul: return "mul";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::Concat: return "concat";
    }
    return "?";
}

const Tensor& Var::value() const { return graph->value(*this); }

namespace {

Graph* same_graph(Var a, Var b, const char* op) {
    if (a.graph == nullptr || a.graph != b.graph) {
        throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
    }
    return a.graph;
}

void require_rank2(const Tensor& t, const std::string& where) {
    if (t.rank() != 2) throw ShapeError(where + ": expected a matrix, got " + to_string(t.shape()));
}

}  // namespace

Var Graph::push(Node n) {
    n.requires_grad = n.kind == OpKind::Parameter;
    for (auto in : n.inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Graph::Node& Graph::node(Var v) { return nodes_.at(v.id); }

std::string Graph::describe(std::size_t id, OpKind kind) const {
    return std::string(op_name(kind)) + " (node " + std::to_string(id) + ")";
}

Var Graph::input(Tensor value) {
    Node n;
    n.kind = OpKind::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Graph::parameter(const std::string& name) {
    if (params_ == nullptr) throw std::logic_error("graph has no parameter store");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].kind == OpKind::Parameter && nodes_[i].param_name == name) return Var{this, i};
    }
    Node n;
    n.kind = OpKind::Parameter;
    n.value = params_->value(name);
    n.param_name = name;
    return push(std::move(n));
}

Var matmul(Var a, Var b) {
    Graph* g = same_graph(a, b, "matmul");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::string where = g->describe(g->size(), OpKind::MatMul);
    require_rank2(A, where);
    require_rank2(B, where);
    if (A.cols() != B.rows()) {
        throw ShapeError(where + ": inner dimensions differ, " + to_string(A.shape()) + " x " +
                         to_string(B.shape()));
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* c = &C(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A(i, p);
            if (av == 0.0) continue;
            const double* brow = B.row(p).data();
            for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
        }
    }
    Graph::Node node;
    node.kind = OpKind::MatMul;
    node.inputs = {a.id, b.id};
    node.value = std::move(C);
    return g->push(std::move(node));
}

Var add(Var a, Var b) {
    Graph* g = same_graph(a, b, "add");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::string where = g->describe(g->size(), OpKind::Add);
    Tensor C = A;
    if (A.shape() == B.shape()) {
        for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
    } else if (A.rank() == 2 && B.rows() == 1 && B.cols() == A.cols() && B.size() == A.cols()) {
        for (std::size_t r = 0; r < C.rows(); ++r) {
            for (std::size_t c = 0; c < C.cols(); ++c) C(r, c) += B[c];
        }
    } else {
        throw ShapeError(where + ": cannot add " + to_string(A.shape()) + " and " + to_string(B.shape()));
    }
    Graph::Node node;
    node.kind = OpKind::Add;
    node.inputs = {a.id, b.id};
    node.value = std::move(C);
    return g->push(std::move(node));
}

Var relu(Var a) {
    Tensor y = a.value();
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    Graph::Node node;
    node.kind = OpKind::Relu;
    node.inputs = {a.id};
    node.value = std::move(y);
    return a.graph->push(std::move(node));
}

Var l2_normalize_rows(Var a) {
    Graph* g = a.graph;
    require_rank2(a.value(), g->describe(g->size(), OpKind::L2NormalizeRows));
    Tensor y = a.value();
    for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        double ss = 0.0;
        for (double v : row) ss += v * v;
        const double norm = std::max(std::sqrt(ss), kNormFloor);
        for (double& v : row) v /= norm;
    }
    Graph::Node node;
    node.kind = OpKind::L2NormalizeRows;
    node.inputs = {a.id};
    node.value = std::move(y);
    return g->push(std::move(node));
}

Var softmax_rows(Var a) {
    Graph* g = a.graph;
    require_rank2(a.value(), g->describe(g->size(), OpKind::SoftmaxRows));
    Tensor y = a.value();
    for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            total += v;
        }
        for (double& v : row) v /= total;
    }
    Graph::Node node;
    node.kind = OpKind::SoftmaxRows;
    node.inputs = {a.id};
    node.value = std::move(y);
    return g->push(std::move(node));
}

Var log_clamped(Var a) {
    Tensor y = a.value();
    for (auto& v : y.values()) v = std::log(std::max(v, kLogFloor));
    Graph::Node node;
    node.kind = OpKind::Log;
    node.inputs = {a.id};
    node.value = std::move(y);
    return a.graph->push(std::move(node));
}

Var mul(Var a, Var b) {
    Graph* g = same_graph(a, b, "mul");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.shape() != B.shape()) {
        throw ShapeError(g->describe(g->size(), OpKind::Mul) + ": shapes differ, " +
                         to_string(A.shape()) + " vs " + to_string(B.shape()));
    }
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
    Graph::Node node;
    node.kind = OpKind::Mul;
    node.inputs = {a.id, b.id};
    node.value = std::move(C);
    return g->push(std::move(node));
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().values()) total += v;
    Graph::Node node;
    node.kind = OpKind::Sum;
    node.inputs = {a.id};
    node.value = Tensor::scalar(total);
    return a.graph->push(std::move(node));
}

Var mean(Var a) {
    double total = 0.0;
    for (double v : a.value().values()) total += v;
    Graph::Node node;
    node.kind = OpKind::Mean;
    node.inputs = {a.id};
    node.value = Tensor::scalar(total / static_cast<double>(a.value().size()));
    return a.graph->push(std::move(node));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no operands");
    Graph* g = parts.front().graph;
    const std::string where = g->describe(g->size(), OpKind::Concat);
    if (axis > 1) throw ShapeError(where + ": axis must be 0 or 1");
    std::size_t rows = 0, cols = 0;
    for (const Var& p : parts) {
        if (p.graph != g) throw std::invalid_argument("concat: operands belong to different graphs");
        const Tensor& t = p.value();
        require_rank2(t, where);
        if (axis == 0) {
            if (rows == 0) cols = t.cols();
            if (t.cols() != cols) throw ShapeError(where + ": column counts differ");
            rows += t.rows();
        } else {
            if (cols == 0) rows = t.rows();
            if (t.rows() != rows) throw ShapeError(where + ": row counts differ");
            cols += t.cols();
        }
    }
    Tensor y = Tensor::matrix(rows, cols);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& t = p.value();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            for (std::size_t c = 0; c < t.cols(); ++c) {
                if (axis == 0) y(offset + r, c) = t(r, c);
                else y(r, offset + c) = t(r, c);
            }
        }
        offset += axis == 0 ? t.rows() : t.cols();
    }
    Graph::Node node;
    node.kind = OpKind::Concat;
    for (const Var& p : parts) node.inputs.push_back(p.id);
    node.axis = axis;
    node.value = std::move(y);
    return g->push(std::move(node));
}

void Graph::backward(Var scalar) {
    if (scalar.graph != this) throw std::invalid_argument("backward: node belongs to another graph");
    const Tensor& out = nodes_.at(scalar.id).value;
    if (out.size() != 1) {
        throw ShapeError("backward: " + describe(scalar.id, nodes_[scalar.id].kind) +
                         " is not a scalar, shape " + to_string(out.shape()));
    }
    const bool has_params = std::any_of(nodes_.begin(), nodes_.end(),
                                        [](const Node& n) { return n.kind == OpKind::Parameter; });
    if (has_params && grads_ == nullptr) throw std::logic_error("backward on a read-only graph");
    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[scalar.id].grad = Tensor(out.shape(), 1.0);

    auto accumulate = [this](std::size_t id) -> Tensor& {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = Tensor(n.value.shape(), 0.0);
        return n.grad;
    };

    for (std::size_t idx = scalar.id + 1; idx-- > 0;) {
        Node& n = nodes_[idx];
        if (!n.requires_grad || n.grad.size() == 0) continue;
        const Tensor& dy = n.grad;
        switch (n.kind) {
            case OpKind::Input:
                break;
            case OpKind::Parameter: {
                Tensor& slot = grads_->grad(n.param_name);
                for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += dy[i];
                break;
            }
            case OpKind::MatMul: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                const std::size_t m = A.rows(), k = A.cols(), cols = B.cols();
                if (nodes_[n.inputs[0]].requires_grad) {
                    Tensor& dA = accumulate(n.inputs[0]);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* g = dy.row(i).data();
                        for (std::size_t p = 0; p < k; ++p) {
                            const double* b = B.row(p).data();
                            double acc = 0.0;
                            for (std::size_t j = 0; j < cols; ++j) acc += g[j] * b[j];
                            dA(i, p) += acc;
                        }
                    }
                }
                if (nodes_[n.inputs[1]].requires_grad) {
                    Tensor& dB = accumulate(n.inputs[1]);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* g = dy.row(i).data();
                        for (std::size_t p = 0; p < k; ++p) {
                            const double av = A(i, p);
                            if (av == 0.0) continue;
                            double* db = &dB(p, 0);
                            for (std::size_t j = 0; j < cols; ++j) db[j] += av * g[j];
                        }
                    }
                }
                break;
            }
            case OpKind::Add: {
                if (nodes_[n.inputs[0]].requires_grad) {
                    Tensor& dA = accumulate(n.inputs[0]);
                    for (std::size_t i = 0; i < dy.size(); ++i) dA[i] += dy[i];
                }
                if (nodes_[n.inputs[1]].requires_grad) {
                    Tensor& dB = accumulate(n.inputs[1]);
                    if (dB.size() == dy.size()) {
                        for (std::size_t i = 0; i < dy.size(); ++i) dB[i] += dy[i];
                    } else {
                        for (std::size_t r = 0; r < dy.rows(); ++r) {
                            for (std::size_t c = 0; c < dy.cols(); ++c) dB[c] += dy(r, c);
                        }
                    }
                }
                break;
            }
            case OpKind::Relu: {
                if (!nodes_[n.inputs[0]].requires_grad) break;
                Tensor& dx = accumulate(n.inputs[0]);
                for (std::size_t i = 0; i < dy.size(); ++i) {
                    if (n.value[i] > 0.0) dx[i] += dy[i];
                }
                break;
            }
            case OpKind::L2NormalizeRows: {
                if (!nodes_[n.inputs[0]].requires_grad) break;
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor& dx = accumulate(n.inputs[0]);
                for (std::size_t r = 0; r < x.rows(); ++r) {
                    double ss = 0.0, dot = 0.0;
                    for (std::size_t c = 0; c < x.cols(); ++c) {
                        ss += x(r, c) * x(r, c);
                        dot += n.value(r, c) * dy(r, c);
                    }
                    const double norm = std::sqrt(ss);
                    if (norm < kNormFloor) {
                        for (std::size_t c = 0; c < x.cols(); ++c) dx(r, c) += dy(r, c) / kNormFloor;
                        continue;
                    }
                    for (std::size_t c = 0; c < x.cols(); ++c) {
                        dx(r, c) += (dy(r, c) - n.value(r, c) * dot) / norm;
                    }
                }
                break;
            }
            case OpKind::SoftmaxRows: {
                if (!nodes_[n.inputs[0]].requires_grad) break;
                Tensor& dx = accumulate(n.inputs[0]);
                const Tensor& y = n.value;
                for (std::size_t r = 0; r < y.rows(); ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < y.cols(); ++c) dot += dy(r, c) * y(r, c);
                    for (std::size_t c = 0; c < y.cols(); ++c) dx(r, c) += y(r, c) * (dy(r, c) - dot);
                }
                break;
            }
            case OpKind::Log: {
                if (!nodes_[n.inputs[0]].requires_grad) break;
                const Tensor& x = nodes_[n.inputs[0]].value;
                Tensor& dx = accumulate(n.inputs[0]);
                for (std::size_t i = 0; i < x.size(); ++i) {
                    if (x[i] > kLogFloor) dx[i] += dy[i] / x[i];
                }
                break;
            }
            case OpKind::Mul: {
                const Tensor& A = nodes_[n.inputs[0]].value;
                const Tensor& B = nodes_[n.inputs[1]].value;
                if (nodes_[n.inputs[0]].requires_grad) {
                    Tensor& dA = accumulate(n.inputs[0]);
                    for (std::size_t i = 0; i < dy.size(); ++i) dA[i] += dy[i] * B[i];
                }
                if (nodes_[n.inputs[1]].requires_grad) {
                    Tensor& dB = accumulate(n.inputs[1]);
                    for (std::size_t i = 0; i < dy.size(); ++i) dB[i] += dy[i] * A[i];
                }
                break;
            }
            case OpKind::Sum:
            case OpKind::Mean: {
                if (!nodes_[n.inputs[0]].requires_grad) break;
                Tensor& dx = accumulate(n.inputs[0]);
                double g = dy[0];
                if (n.kind == OpKind::Mean) g /= static_cast<double>(dx.size());
                for (auto& v : dx.values()) v += g;
                break;
            }
            case OpKind::Concat: {
                std::size_t offset = 0;
                for (std::size_t in : n.inputs) {
                    const Tensor& x = nodes_[in].value;
                    if (nodes_[in].requires_grad) {
                        Tensor& dx = accumulate(in);
                        for (std::size_t r = 0; r < x.rows(); ++r) {
                            for (std::size_t c = 0; c < x.cols(); ++c) {
                                dx(r, c) += n.axis == 0 ? dy(offset + r, c) : dy(r, offset + c);
                            }
                        }
                    }
                    offset += n.axis == 0 ? x.rows() : x.cols();
                }
                break;
            }
        }
    }
}

}  // namespace nops::ad
