#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcd/tensor.hpp"

namespace dcd {

using NodeId = std::uint32_t;

namespace detail {

// C[m,n] += A[m,k] * B[k,n].  ikj order keeps the inner loop contiguous on
// both B and C so the compiler can vectorize it.
inline void matmul_acc(const double* A, const double* B, double* C,
                       std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double a = a_row[l];
            const double* b_row = B + l * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

inline Tensor transposed(const Tensor& a) {
    Tensor t({a.cols(), a.rows()});
    const std::size_t m = a.rows(), n = a.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
    return t;
}

inline double softplus_value(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

/// Reverse-mode differentiation record. Values are computed eagerly as ops
/// are appended (define-by-run), so the node list is topologically ordered
/// by construction; backward() then visits each node exactly once in
/// reverse. A tape is built fresh for every forward pass and owned by a
/// single caller.
class Tape {
public:
    enum class Op : std::uint8_t {
        Leaf,
        MatMul,    // [m,k] x [k,n] -> [m,n]
        AddRow,    // [m,n] + [n] broadcast over rows
        Add,       // same shape
        Sub,       // same shape
        Relu,
        Softplus,
        Square,
        Scale,     // x * c
        AddConst,  // x + c
        Sum,       // -> [1]
        Mean,      // -> [1]
        RowNorm,   // [m,n] -> [m], Euclidean norm per row
    };

    NodeId leaf(Tensor value, bool requires_grad) {
        return push(Op::Leaf, kNone, kNone, 0.0, std::move(value), requires_grad);
    }

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
            throw shape_error("matmul", a, b);
        }
        Tensor out({A.rows(), B.cols()});
        detail::matmul_acc(A.data(), B.data(), out.data(), A.rows(), A.cols(), B.cols());
        return push(Op::MatMul, a, b, 0.0, std::move(out), inherits(a, b));
    }

    NodeId add_row(NodeId a, NodeId b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.rank() != 2 || B.rank() != 1 || B.shape()[0] != A.cols()) {
            throw shape_error("add_row", a, b);
        }
        Tensor out(A.shape());
        const std::size_t m = A.rows(), n = A.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] + B[j];
        return push(Op::AddRow, a, b, 0.0, std::move(out), inherits(a, b));
    }

    NodeId add(NodeId a, NodeId b) { return binary_same_shape(Op::Add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return binary_same_shape(Op::Sub, a, b); }

    NodeId relu(NodeId a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
        return push(Op::Relu, a, kNone, 0.0, std::move(out), inherits(a));
    }

    NodeId softplus(NodeId a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::softplus_value(out[i]);
        return push(Op::Softplus, a, kNone, 0.0, std::move(out), inherits(a));
    }

    NodeId square(NodeId a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
        return push(Op::Square, a, kNone, 0.0, std::move(out), inherits(a));
    }

    NodeId scale(NodeId a, double c) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
        return push(Op::Scale, a, kNone, c, std::move(out), inherits(a));
    }

    NodeId neg(NodeId a) { return scale(a, -1.0); }

    NodeId add_const(NodeId a, double c) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
        return push(Op::AddConst, a, kNone, c, std::move(out), inherits(a));
    }

    NodeId sum(NodeId a) {
        double s = 0.0;
        for (std::size_t i = 0; i < value(a).size(); ++i) s += value(a)[i];
        return push(Op::Sum, a, kNone, 0.0, Tensor::full({1}, s), inherits(a));
    }

    NodeId mean(NodeId a) {
        double s = 0.0;
        const std::size_t n = value(a).size();
        for (std::size_t i = 0; i < n; ++i) s += value(a)[i];
        return push(Op::Mean, a, kNone, 0.0, Tensor::full({1}, s / static_cast<double>(n)),
                    inherits(a));
    }

    NodeId row_norm(NodeId a) {
        const Tensor& A = value(a);
        if (A.rank() != 2) throw shape_error("row_norm", a, kNone);
        Tensor out({A.rows()});
        const std::size_t m = A.rows(), n = A.cols();
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * A[i * n + j];
            out[i] = std::sqrt(s);
        }
        return push(Op::RowNorm, a, kNone, 0.0, std::move(out), inherits(a));
    }

    std::size_t size() const { return nodes_.size(); }

    const Tensor& value(NodeId id) const { return node(id).value; }

    /// Reverse sweep seeding d(out)/d(out) = seed. Gradients of every
    /// requires_grad node reachable from `out` become available via grad().
    void backward(NodeId out, const Tensor& seed) {
        if (nodes_.empty()) throw std::logic_error("Tape::backward: no forward recorded");
        Node& head = node_mut(out);
        if (!seed.same_shape(head.value)) {
            throw std::invalid_argument("Tape::backward: seed shape " + shape_str(seed.shape()) +
                                        " does not match output " + shape_str(head.value.shape()));
        }
        for (Node& n : nodes_) n.grad_set = false;
        if (!head.requires_grad) {
            throw std::logic_error("Tape::backward: output does not require gradients");
        }
        accumulate(head, seed);
        for (std::size_t i = out + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.grad_set || n.op == Op::Leaf) continue;
            propagate(n);
        }
        ran_backward_ = true;
    }

    /// Scalar convenience: seed with 1.
    void backward(NodeId out) {
        if (nodes_.empty()) throw std::logic_error("Tape::backward: no forward recorded");
        if (value(out).size() != 1) {
            throw std::invalid_argument("Tape::backward: implicit seed requires scalar output");
        }
        backward(out, Tensor::full({1}, 1.0));
    }

    /// Gradient of the last backward() output w.r.t. node `id`. Zero if the
    /// node did not influence the output.
    const Tensor& grad(NodeId id) {
        if (!ran_backward_) throw std::logic_error("Tape::grad: backward has not been run");
        Node& n = node_mut(id);
        if (!n.requires_grad) {
            throw std::logic_error("Tape::grad: node " + std::to_string(id) + " does not require gradients");
        }
        if (!n.grad_set) {
            n.grad = Tensor(n.value.shape());
            n.grad_set = true;
        }
        return n.grad;
    }

private:
    static constexpr NodeId kNone = static_cast<NodeId>(-1);

    struct Node {
        Op op;
        bool requires_grad;
        bool grad_set = false;
        NodeId a = kNone;
        NodeId b = kNone;
        double c = 0.0;
        Tensor value;
        Tensor grad;
    };

    const Node& node(NodeId id) const {
        if (id >= nodes_.size()) throw std::out_of_range("Tape: node id " + std::to_string(id));
        return nodes_[id];
    }
    Node& node_mut(NodeId id) {
        if (id >= nodes_.size()) throw std::out_of_range("Tape: node id " + std::to_string(id));
        return nodes_[id];
    }

    bool inherits(NodeId a, NodeId b = kNone) const {
        return node(a).requires_grad || (b != kNone && node(b).requires_grad);
    }

    NodeId push(Op op, NodeId a, NodeId b, double c, Tensor value, bool requires_grad) {
        Node n;
        n.op = op;
        n.requires_grad = requires_grad;
        n.a = a;
        n.b = b;
        n.c = c;
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId binary_same_shape(Op op, NodeId a, NodeId b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (!A.same_shape(B)) throw shape_error(op == Op::Add ? "add" : "sub", a, b);
        Tensor out(A.shape());
        const double sgn = op == Op::Sub ? -1.0 : 1.0;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + sgn * B[i];
        return push(op, a, b, 0.0, std::move(out), inherits(a, b));
    }

    std::invalid_argument shape_error(const char* op, NodeId a, NodeId b) const {
        std::string msg = std::string("Tape::") + op + ": incompatible shapes at node " +
                          std::to_string(nodes_.size()) + " (" + shape_str(value(a).shape());
        if (b != kNone) msg += " vs " + shape_str(value(b).shape());
        msg += ")";
        return std::invalid_argument(msg);
    }

    void accumulate(Node& n, const Tensor& g) {
        if (!n.requires_grad) return;
        if (!n.grad_set) {
            n.grad = Tensor(n.value.shape());
            n.grad_set = true;
        }
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }

    void propagate(Node& n) {
        const Tensor& g = n.grad;
        Node& A = nodes_[n.a];
        switch (n.op) {
            case Op::MatMul: {
                Node& B = nodes_[n.b];
                if (A.requires_grad) {
                    // dA += g * B^T
                    ensure_grad(A);
                    Tensor bt = detail::transposed(B.value);
                    detail::matmul_acc(g.data(), bt.data(), A.grad.data(), g.rows(), g.cols(),
                                       bt.cols());
                }
                if (B.requires_grad) {
                    // dB += A^T * g
                    ensure_grad(B);
                    Tensor at = detail::transposed(A.value);
                    detail::matmul_acc(at.data(), g.data(), B.grad.data(), at.rows(), at.cols(),
                                       g.cols());
                }
                break;
            }
            case Op::AddRow: {
                Node& B = nodes_[n.b];
                if (A.requires_grad) accumulate(A, g);
                if (B.requires_grad) {
                    ensure_grad(B);
                    const std::size_t m = g.rows(), k = g.cols();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < k; ++j) B.grad[j] += g[i * k + j];
                }
                break;
            }
            case Op::Add: {
                Node& B = nodes_[n.b];
                if (A.requires_grad) accumulate(A, g);
                if (B.requires_grad) accumulate(B, g);
                break;
            }
            case Op::Sub: {
                Node& B = nodes_[n.b];
                if (A.requires_grad) accumulate(A, g);
                if (B.requires_grad) {
                    ensure_grad(B);
                    for (std::size_t i = 0; i < g.size(); ++i) B.grad[i] -= g[i];
                }
                break;
            }
            case Op::Relu: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                // Subgradient at 0 is 0.
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (A.value[i] > 0.0) A.grad[i] += g[i];
                break;
            }
            case Op::Softplus: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                for (std::size_t i = 0; i < g.size(); ++i)
                    A.grad[i] += g[i] * detail::sigmoid(A.value[i]);
                break;
            }
            case Op::Square: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                for (std::size_t i = 0; i < g.size(); ++i) A.grad[i] += 2.0 * A.value[i] * g[i];
                break;
            }
            case Op::Scale: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                for (std::size_t i = 0; i < g.size(); ++i) A.grad[i] += n.c * g[i];
                break;
            }
            case Op::AddConst: {
                if (A.requires_grad) accumulate(A, g);
                break;
            }
            case Op::Sum: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                for (std::size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += g[0];
                break;
            }
            case Op::Mean: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                const double gi = g[0] / static_cast<double>(A.grad.size());
                for (std::size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += gi;
                break;
            }
            case Op::RowNorm: {
                if (!A.requires_grad) break;
                ensure_grad(A);
                const std::size_t m = A.value.rows(), k = A.value.cols();
                for (std::size_t i = 0; i < m; ++i) {
                    const double r = n.value[i];
                    if (r <= 0.0) continue;  // subgradient 0 at the origin
                    const double gi = g[i] / r;
                    for (std::size_t j = 0; j < k; ++j) A.grad[i * k + j] += gi * A.value[i * k + j];
                }
                break;
            }
            case Op::Leaf:
                break;
        }
    }

    void ensure_grad(Node& n) {
        if (!n.grad_set) {
            n.grad = Tensor(n.value.shape());
            n.grad_set = true;
        }
    }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace dcd
