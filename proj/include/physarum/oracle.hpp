#pragma once

#include "physarum/problem.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace physarum {

/// Ground-truth solution of the weighted l1 problem from the LP oracle.
struct LpSolution {
    enum class Status { Optimal, Infeasible, Unbounded };
    Vector v_opt;
    double objective = 0.0;
    Vector dual_u;
    Status status = Status::Infeasible;
    bool unique_optimum = false;  // no zero reduced cost off the basis
};

inline const char* to_string(LpSolution::Status s) {
    switch (s) {
        case LpSolution::Status::Optimal: return "optimal";
        case LpSolution::Status::Infeasible: return "infeasible";
        case LpSolution::Status::Unbounded: return "unbounded";
    }
    return "unknown";
}

/// Solves min sum_e w_e |v_e| s.t. A v = f by the split reformulation
/// min w^T (p + q) s.t. A p - A q = f, p, q >= 0, with a dense two-phase
/// tableau simplex under Bland's anti-cycling rule. A test oracle:
/// correctness over speed, scale-guarded to m <= 2000.
inline LpSolution lp_solve_l1(const BasisPursuitProblem& problem) {
    const Index n = problem.n();
    const Index m = problem.m();
    if (m > 2000) throw InputError("lp_solve_l1: instance too large for the dense oracle");

    using Tableau = Eigen::MatrixXd;
    const Index cols = 2 * m + n;  // structural split variables then artificials
    Tableau t(n, cols + 1);

    // Flip rows so the right-hand side is nonnegative.
    Vector flip(n);
    for (Index i = 0; i < n; ++i) flip[i] = problem.rhs()[i] < 0.0 ? -1.0 : 1.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            const double a = problem.matrix().coeff(i, j);
            t(i, j) = flip[i] * a;
            t(i, m + j) = -flip[i] * a;
        }
        for (Index j = 0; j < n; ++j) t(i, 2 * m + j) = (i == j) ? 1.0 : 0.0;
        t(i, cols) = flip[i] * problem.rhs()[i];
    }

    std::vector<Index> basis(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) basis[i] = 2 * m + i;

    const double eps = 1e-9;
    Eigen::RowVectorXd cost(cols + 1);

    auto pivot = [&](Index row, Index col) {
        t.row(row) /= t(row, col);
        for (Index i = 0; i < n; ++i) {
            if (i != row && t(i, col) != 0.0) t.row(i) -= t(i, col) * t.row(row);
        }
        cost -= cost[col] * t.row(row);
        basis[row] = col;
    };

    // Bland: entering = lowest-index eligible column; leaving = among the
    // minimum-ratio rows, the one whose basic variable has the lowest index.
    auto simplex = [&](Index entering_limit, bool guard_artificials) -> bool {
        const long max_pivots = 50000L * static_cast<long>(n + m);
        for (long iter = 0; iter < max_pivots; ++iter) {
            Index q = -1;
            for (Index j = 0; j < entering_limit; ++j) {
                if (cost[j] < -eps) { q = j; break; }
            }
            if (q < 0) return true;  // optimal

            Index row = -1;
            if (guard_artificials) {
                // Basic artificials sit at zero; a degenerate pivot keeps
                // them from becoming positive again.
                for (Index i = 0; i < n; ++i) {
                    if (basis[i] >= 2 * m && std::abs(t(i, q)) > eps) { row = i; break; }
                }
            }
            if (row < 0) {
                double best = 0.0;
                for (Index i = 0; i < n; ++i) {
                    if (t(i, q) <= eps) continue;
                    const double ratio = t(i, cols) / t(i, q);
                    if (row < 0 || ratio < best - eps ||
                        (ratio < best + eps && basis[i] < basis[row])) {
                        row = i;
                        best = ratio;
                    }
                }
            }
            if (row < 0) return false;  // unbounded
            pivot(row, q);
        }
        throw Error("lp_solve_l1: pivot bound exceeded");
    };

    // Phase 1: minimize the artificial sum.
    cost.setZero();
    for (Index j = 2 * m; j < cols; ++j) cost[j] = 1.0;
    for (Index i = 0; i < n; ++i) cost -= t.row(i);  // eliminate the basic artificials
    simplex(cols, false);

    LpSolution out;
    const double feas_tol = 1e-9 * std::max(1.0, problem.rhs().norm());
    if (-cost[cols] > feas_tol) {
        out.status = LpSolution::Status::Infeasible;
        return out;
    }

    // Drive remaining artificials out of the basis; rows where no structural
    // entry is left are redundant constraints and keep their artificial at 0.
    for (Index i = 0; i < n; ++i) {
        if (basis[i] < 2 * m) continue;
        for (Index j = 0; j < 2 * m; ++j) {
            if (std::abs(t(i, j)) > eps) { pivot(i, j); break; }
        }
    }

    // Phase 2 with the real costs; artificial columns may not enter.
    cost.setZero();
    for (Index j = 0; j < m; ++j) {
        cost[j] = problem.weights()[j];
        cost[m + j] = problem.weights()[j];
    }
    for (Index i = 0; i < n; ++i) {
        if (basis[i] < 2 * m && cost[basis[i]] != 0.0) cost -= cost[basis[i]] * t.row(i);
    }
    if (!simplex(2 * m, true)) {
        out.status = LpSolution::Status::Unbounded;
        return out;
    }

    Vector split = Vector::Zero(cols);
    for (Index i = 0; i < n; ++i) split[basis[i]] = t(i, cols);
    out.v_opt = split.head(m) - split.segment(m, m);
    out.objective = problem.weights().dot(split.head(m) + split.segment(m, m));
    out.status = LpSolution::Status::Optimal;

    out.unique_optimum = true;
    std::vector<bool> in_basis(static_cast<std::size_t>(cols), false);
    for (Index i = 0; i < n; ++i) in_basis[basis[i]] = true;
    for (Index j = 0; j < 2 * m; ++j) {
        if (!in_basis[j] && cost[j] < eps) { out.unique_optimum = false; break; }
    }

    // Dual certificate: solve B^T y = c_B on the flipped system, unflip.
    Eigen::MatrixXd b_cols(n, n);
    Vector c_basis(n);
    for (Index i = 0; i < n; ++i) {
        const Index j = basis[i];
        if (j < m) {
            for (Index r = 0; r < n; ++r) b_cols(r, i) = flip[r] * problem.matrix().coeff(r, j);
            c_basis[i] = problem.weights()[j];
        } else if (j < 2 * m) {
            for (Index r = 0; r < n; ++r) b_cols(r, i) = -flip[r] * problem.matrix().coeff(r, j - m);
            c_basis[i] = problem.weights()[j - m];
        } else {
            b_cols.col(i).setZero();
            b_cols(j - 2 * m, i) = 1.0;
            c_basis[i] = 0.0;
        }
    }
    const Vector y = b_cols.transpose().fullPivLu().solve(c_basis);
    out.dual_u = flip.cwiseProduct(y);
    return out;
}

}  // namespace physarum
