#pragma once

#include "physarum/problem.hpp"

namespace physarum {

/// n x n system matrix S in the same storage family as the problem matrix.
struct SystemMatrix {
    ConstraintMatrix::Storage storage = ConstraintMatrix::Storage::Dense;
    DenseMatrix dense;
    SparseMatrix sparse;

    bool is_dense() const { return storage == ConstraintMatrix::Storage::Dense; }
    Index rows() const { return is_dense() ? dense.rows() : sparse.rows(); }

    Vector apply(const Vector& x) const {
        return is_dense() ? Vector(dense.selfadjointView<Eigen::Lower>() * x)
                          : Vector(sparse.selfadjointView<Eigen::Lower>() * x);
    }

    DenseMatrix to_dense() const {
        if (is_dense()) return DenseMatrix(dense.selfadjointView<Eigen::Lower>());
        return DenseMatrix(SparseMatrix(sparse.selfadjointView<Eigen::Lower>()));
    }
};

/// G u = W^-1 A^T u, the weighted discrete gradient of the potential.
inline Vector apply_G(const BasisPursuitProblem& problem, const Vector& u) {
    if (u.size() != problem.n()) throw InputError("apply_G: potential length != n");
    return problem.matrix().apply_transpose(u).cwiseQuotient(problem.weights());
}

/// S(mu) x = A C(mu) W^-1 A^T x applied factor by factor, right to left.
/// No matrix is formed. Grounded rows act as the identity.
inline Vector apply_S(const BasisPursuitProblem& problem, const Vector& mu, const Vector& x) {
    Vector xi = x;
    for (Index g : problem.grounded_nodes()) xi[g] = 0.0;
    Vector edge = problem.matrix().apply_transpose(xi);
    edge.array() *= mu.array() / problem.weights().array();
    Vector y = problem.matrix().apply(edge);
    for (Index g : problem.grounded_nodes()) y[g] = x[g];
    return y;
}

/// Same product without the grounding projection.
inline Vector apply_S_raw(const BasisPursuitProblem& problem, const Vector& mu, const Vector& x) {
    Vector edge = problem.matrix().apply_transpose(x);
    edge.array() *= mu.array() / problem.weights().array();
    return problem.matrix().apply(edge);
}

/// Assembles S(mu) = A Diag(mu) W^-1 A^T. Built as (A sqrt(d)) (A sqrt(d))^T
/// through a symmetric rank update, so the result is symmetric by
/// construction and positive definite whenever A has full row rank and
/// mu > 0. Only the lower triangle is stored.
inline SystemMatrix assemble_S(const BasisPursuitProblem& problem, const Vector& mu) {
    if (mu.size() != problem.m()) throw InputError("assemble_S: conductivity length != m");
    if ((mu.array() <= 0.0).any()) throw InputError("assemble_S: conductivity must be positive");
    const Vector scale = (mu.array() / problem.weights().array()).sqrt().matrix();
    SystemMatrix s;
    s.storage = problem.matrix().storage();
    if (s.is_dense()) {
        DenseMatrix scaled = problem.matrix().dense() * scale.asDiagonal();
        s.dense.setZero(problem.n(), problem.n());
        s.dense.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
    } else {
        SparseMatrix scaled = problem.matrix().sparse() * scale.asDiagonal();
        SparseMatrix full = scaled * SparseMatrix(scaled.transpose());
        s.sparse = full.triangularView<Eigen::Lower>();
        s.sparse.makeCompressed();
    }
    return s;
}

/// Replaces grounded rows/columns by identity rows so the grounded system
/// stays SPD. No-op for full-rank problems.
inline void ground_system(const BasisPursuitProblem& problem, SystemMatrix& s) {
    if (!problem.grounded()) return;
    std::vector<bool> is_grounded(static_cast<std::size_t>(problem.n()), false);
    for (Index g : problem.grounded_nodes()) is_grounded[g] = true;
    if (s.is_dense()) {
        for (Index g : problem.grounded_nodes()) {
            s.dense.row(g).setZero();
            s.dense.col(g).setZero();
            s.dense(g, g) = 1.0;
        }
    } else {
        for (Index j = 0; j < s.sparse.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(s.sparse, j); it; ++it) {
                if (is_grounded[it.row()] || is_grounded[it.col()])
                    it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
            }
        }
        for (Index g : problem.grounded_nodes()) s.sparse.coeffRef(g, g) = 1.0;
        s.sparse.makeCompressed();
    }
}

/// v = C(mu) G u. Satisfies A v = f to the inner-solve tolerance whenever u
/// solves the potential system for mu.
inline Flux compute_flux(const BasisPursuitProblem& problem, const TransportState& state) {
    Flux flux;
    flux.v = state.mu.cwiseProduct(apply_G(problem, state.u));
    return flux;
}

}  // namespace physarum
