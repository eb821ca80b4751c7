#pragma once

#include "physarum/types.hpp"

#include <cmath>
#include <optional>
#include <numeric>
#include <utility>
#include <vector>

namespace physarum {

/// Constraint matrix A with storage chosen at load time: dense row-major or
/// compressed sparse column. Both layouts expose the same product surface.
class ConstraintMatrix {
public:
    enum class Storage { Dense, Sparse };

    ConstraintMatrix() = default;
    explicit ConstraintMatrix(DenseMatrix a) : storage_(Storage::Dense), dense_(std::move(a)) {}
    explicit ConstraintMatrix(SparseMatrix a) : storage_(Storage::Sparse), sparse_(std::move(a)) {
        sparse_.makeCompressed();
    }

    Storage storage() const { return storage_; }
    bool is_dense() const { return storage_ == Storage::Dense; }

    Index rows() const { return is_dense() ? dense_.rows() : sparse_.rows(); }
    Index cols() const { return is_dense() ? dense_.cols() : sparse_.cols(); }

    /// A x
    Vector apply(const Vector& x) const {
        if (x.size() != cols()) throw InputError("ConstraintMatrix::apply: dimension mismatch");
        return is_dense() ? Vector(dense_ * x) : Vector(sparse_ * x);
    }

    /// A^T y
    Vector apply_transpose(const Vector& y) const {
        if (y.size() != rows())
            throw InputError("ConstraintMatrix::apply_transpose: dimension mismatch");
        return is_dense() ? Vector(dense_.transpose() * y) : Vector(sparse_.transpose() * y);
    }

    const DenseMatrix& dense() const {
        if (!is_dense()) throw InputError("ConstraintMatrix: not dense storage");
        return dense_;
    }

    const SparseMatrix& sparse() const {
        if (is_dense()) throw InputError("ConstraintMatrix: not sparse storage");
        return sparse_;
    }

    DenseMatrix to_dense() const { return is_dense() ? dense_ : DenseMatrix(sparse_); }

    double coeff(Index i, Index j) const {
        return is_dense() ? dense_(i, j) : sparse_.coeff(i, j);
    }

    /// True when every column holds exactly one +1 and one -1: the signed
    /// incidence matrix of a graph, used as a divergence operator.
    bool is_incidence() const {
        const Index n = rows(), m = cols();
        if (n < 2) return false;
        for (Index j = 0; j < m; ++j) {
            int plus = 0, minus = 0, other = 0;
            if (is_dense()) {
                for (Index i = 0; i < n; ++i) {
                    const double v = dense_(i, j);
                    if (v == 1.0) ++plus;
                    else if (v == -1.0) ++minus;
                    else if (v != 0.0) ++other;
                }
            } else {
                for (SparseMatrix::InnerIterator it(sparse_, j); it; ++it) {
                    if (it.value() == 1.0) ++plus;
                    else if (it.value() == -1.0) ++minus;
                    else if (it.value() != 0.0) ++other;
                }
            }
            if (plus != 1 || minus != 1 || other != 0) return false;
        }
        return true;
    }

private:
    Storage storage_ = Storage::Dense;
    DenseMatrix dense_;
    SparseMatrix sparse_;
};

/// Immutable problem instance: minimize sum_e |v_e| w_e subject to A v = f.
///
/// Incidence matrices violate the full-row-rank assumption (rank n-1 per
/// connected component); construction detects them, requires the supplies to
/// balance on each component, and grounds the lowest-index node of every
/// component so the potential system becomes definite.
class BasisPursuitProblem {
public:
    BasisPursuitProblem(ConstraintMatrix a, Vector w, Vector f,
                        std::optional<Vector> x_true = std::nullopt)
        : a_(std::move(a)), w_(std::move(w)), f_(std::move(f)), x_true_(std::move(x_true)) {
        const Index n = a_.rows(), m = a_.cols();
        if (n < 1 || m < 1) throw InputError("BasisPursuitProblem: need m >= 1 and n >= 1");
        if (w_.size() != m) throw InputError("BasisPursuitProblem: weight length != m");
        if (f_.size() != n) throw InputError("BasisPursuitProblem: rhs length != n");
        if ((w_.array() <= 0.0).any())
            throw InputError("BasisPursuitProblem: weights must be strictly positive");
        if (x_true_ && x_true_->size() != m)
            throw InputError("BasisPursuitProblem: ground truth length != m");
        if (a_.is_incidence()) setup_grounding();
        // Full-row-rank problems are underdetermined by assumption; grounded
        // incidence systems only need the edges to span each component,
        // which the first solve verifies.
        if (grounded_nodes_.empty() && m < n)
            throw InputError("BasisPursuitProblem: need m >= n for full-rank constraints");
        f_grounded_ = f_;
        for (Index g : grounded_nodes_) f_grounded_[g] = 0.0;
    }

    Index n() const { return a_.rows(); }
    Index m() const { return a_.cols(); }
    const ConstraintMatrix& matrix() const { return a_; }
    const Vector& weights() const { return w_; }
    const Vector& rhs() const { return f_; }
    const std::optional<Vector>& ground_truth() const { return x_true_; }

    bool grounded() const { return !grounded_nodes_.empty(); }
    const std::vector<Index>& grounded_nodes() const { return grounded_nodes_; }

    /// f with grounded entries zeroed; the right-hand side actually solved.
    const Vector& grounded_rhs() const { return f_grounded_; }

private:
    void setup_grounding() {
        const Index n = a_.rows(), m = a_.cols();
        std::vector<Index> parent(static_cast<std::size_t>(n));
        std::iota(parent.begin(), parent.end(), Index{0});
        auto find = [&](Index x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (Index j = 0; j < m; ++j) {
            Index head = -1, tail = -1;
            if (a_.is_dense()) {
                for (Index i = 0; i < n; ++i) {
                    if (a_.coeff(i, j) == 1.0) tail = i;
                    else if (a_.coeff(i, j) == -1.0) head = i;
                }
            } else {
                for (SparseMatrix::InnerIterator it(a_.sparse(), j); it; ++it) {
                    if (it.value() == 1.0) tail = it.row();
                    else if (it.value() == -1.0) head = it.row();
                }
            }
            const Index ra = find(tail), rb = find(head);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
        // Lowest-index node of each component is its own root.
        std::vector<double> component_sum(static_cast<std::size_t>(n), 0.0);
        for (Index i = 0; i < n; ++i) {
            const Index r = find(i);
            component_sum[r] += f_[i];
            if (r == i) grounded_nodes_.push_back(i);
        }
        const double tol = 1e-10 * std::max(1.0, f_.lpNorm<Eigen::Infinity>());
        for (Index g : grounded_nodes_) {
            if (std::abs(component_sum[g]) > tol)
                throw InputError("BasisPursuitProblem: supplies do not balance on a component");
        }
    }

    ConstraintMatrix a_;
    Vector w_;
    Vector f_;
    std::optional<Vector> x_true_;
    Vector f_grounded_;
    std::vector<Index> grounded_nodes_;
};

/// Evolving solver state: conductivity mu > 0, potential u with
/// S(mu) u = f to the inner-solve tolerance, pseudo-time and step size.
struct TransportState {
    Vector mu;
    Vector u;
    double t = 0.0;
    double dt = 0.0;
};

/// Flux v = C(mu) W^-1 A^T u, the primal basis-pursuit variable.
struct Flux {
    Vector v;
};

}  // namespace physarum
