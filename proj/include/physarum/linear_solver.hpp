#pragma once

#include "physarum/operators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

namespace physarum {

/// Cholesky factorization of a SystemMatrix. Sparse systems use simplicial
/// LL^T with approximate-minimum-degree ordering, dense systems plain LL^T.
class CholeskyFactor {
public:
    /// Factorizes; returns false on breakdown (matrix not positive definite).
    bool compute(const SystemMatrix& s) {
        dense_ok_ = sparse_ok_ = false;
        if (s.is_dense()) {
            dense_ = std::make_unique<Eigen::LLT<DenseMatrix, Eigen::Lower>>();
            dense_->compute(s.dense);
            dense_ok_ = dense_->info() == Eigen::Success;
            return dense_ok_;
        }
        sparse_ = std::make_unique<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower>>();
        sparse_->compute(s.sparse);
        sparse_ok_ = sparse_->info() == Eigen::Success;
        return sparse_ok_;
    }

    bool valid() const { return dense_ok_ || sparse_ok_; }

    Vector solve(const Vector& rhs) const {
        if (dense_ok_) return dense_->solve(rhs);
        if (sparse_ok_) return sparse_->solve(rhs);
        throw SingularSystemError("CholeskyFactor: no valid factorization");
    }

    /// Smallest diagonal entry of L; its square is the smallest pivot.
    double min_pivot_sqrt() const {
        if (dense_ok_) return dense_->matrixLLT().diagonal().minCoeff();
        if (sparse_ok_) {
            const SparseMatrix l = sparse_->matrixL();
            return Vector(l.diagonal()).minCoeff();
        }
        return 0.0;
    }

private:
    std::unique_ptr<Eigen::LLT<DenseMatrix, Eigen::Lower>> dense_;
    std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower>> sparse_;
    bool dense_ok_ = false;
    bool sparse_ok_ = false;
};

/// How the potential systems are solved.
struct LinearSolverHandle {
    enum class Mode { DirectCholesky, PcgWithCache };
    Mode mode = Mode::PcgWithCache;
    double tolerance = 1e-10;   // relative residual target, in (0, 1)
    int max_iterations = 500;
    int refresh_threshold = 30; // PCG-iteration count that triggers refactorization

    void validate() const {
        if (!(tolerance > 0.0 && tolerance < 1.0))
            throw InputError("LinearSolverHandle: tolerance must lie in (0, 1)");
        if (refresh_threshold < 1)
            throw InputError("LinearSolverHandle: refresh threshold must be >= 1");
        if (max_iterations < 1) throw InputError("LinearSolverHandle: max iterations must be >= 1");
    }
};

/// Cholesky factorization reused across solves until PCG performance
/// degrades.
struct PreconditionerCache {
    std::optional<CholeskyFactor> factor;
    int age = 0;                   // solves since factorization
    int last_pcg_iterations = 0;

    void reset() {
        factor.reset();
        age = 0;
        last_pcg_iterations = 0;
    }
};

struct PcgResult {
    Vector x;
    int iterations = 0;
    bool converged = false;
};

/// Preconditioned conjugate gradient on an SPD operator. The exit test is on
/// the preconditioned residual norm sqrt(r^T P^-1 r) relative to its initial
/// value. The optional observer sees every iterate (used by property tests).
inline PcgResult pcg(const std::function<Vector(const Vector&)>& apply_m, const Vector& rhs,
                     const std::function<Vector(const Vector&)>& apply_precond, double tol,
                     int max_iterations,
                     const std::function<void(const Vector&)>& observer = nullptr) {
    PcgResult out;
    out.x = Vector::Zero(rhs.size());
    Vector r = rhs;                         // r = rhs - M*0
    Vector z = apply_precond(r);
    Vector p = z;
    double rho = r.dot(z);                  // squared preconditioned residual
    const double target = tol * std::sqrt(std::max(rho, 0.0));
    if (std::sqrt(std::max(rho, 0.0)) == 0.0) {
        out.converged = true;
        return out;
    }
    for (int it = 1; it <= max_iterations; ++it) {
        const Vector q = apply_m(p);
        const double alpha = rho / p.dot(q);
        out.x += alpha * p;
        r -= alpha * q;
        if (observer) observer(out.x);
        z = apply_precond(r);
        const double rho_next = r.dot(z);
        out.iterations = it;
        if (std::sqrt(std::max(rho_next, 0.0)) <= target) {
            out.converged = true;
            return out;
        }
        p = z + (rho_next / rho) * p;
        rho = rho_next;
    }
    return out;  // best iterate, not converged
}

/// Inexact-Newton forcing term: eta = sqrt(||F_m|| / ||F_0||) clamped to
/// [1e-12, 0.1].
inline double forcing_term(double newton_residual_norm, double initial_residual_norm) {
    const double eta = std::sqrt(newton_residual_norm / initial_residual_norm);
    return std::clamp(eta, 1e-12, 0.1);
}

/// Refactorizes when the cache is cold or the previous solve exceeded the
/// iteration threshold; otherwise leaves the cache untouched and ages it.
/// This is the only place the system matrix is formed explicitly.
inline void maybe_refresh(PreconditionerCache& cache,
                          const std::function<SystemMatrix()>& assemble_m, int last_iterations,
                          int threshold) {
    if (cache.factor && last_iterations <= threshold) {
        ++cache.age;
        return;
    }
    const SystemMatrix m = assemble_m();
    CholeskyFactor factor;
    if (!factor.compute(m))
        throw IndefinitePreconditionerError("maybe_refresh: indefinite preconditioner");
    cache.factor = std::move(factor);
    cache.age = 0;
}

namespace detail {

inline SystemMatrix assemble_grounded_S(const BasisPursuitProblem& problem, const Vector& mu) {
    SystemMatrix s = assemble_S(problem, mu);
    ground_system(problem, s);
    return s;
}

}  // namespace detail

/// Solves S(mu) u = f for the potential. Uses the handle's mode: a fresh
/// Cholesky factorization, or PCG preconditioned by the cached factor.
/// Throws SingularSystemError when the system cannot be solved to tolerance,
/// which signals rank deficiency or f outside range(A).
inline Vector solve_potential(const BasisPursuitProblem& problem, const Vector& mu,
                              const LinearSolverHandle& handle, PreconditionerCache& cache) {
    handle.validate();
    if (mu.size() != problem.m() || (mu.array() <= 0.0).any())
        throw InputError("solve_potential: conductivity must be positive of length m");
    const Vector& f = problem.grounded_rhs();
    const double fnorm = f.norm();

    Vector u;
    if (handle.mode == LinearSolverHandle::Mode::DirectCholesky) {
        CholeskyFactor factor;
        if (!factor.compute(detail::assemble_grounded_S(problem, mu))) {
            std::ostringstream msg;
            msg << "solve_potential: singular system (smallest pivot "
                << factor.min_pivot_sqrt() << ")";
            throw SingularSystemError(msg.str());
        }
        u = factor.solve(f);
    } else {
        auto assemble = [&] { return detail::assemble_grounded_S(problem, mu); };
        auto apply = [&](const Vector& x) { return apply_S(problem, mu, x); };
        auto precond = [&](const Vector& r) { return cache.factor->solve(r); };
        auto good = [&](const PcgResult& r) {
            return r.converged && (apply_S(problem, mu, r.x) - f).norm() <= handle.tolerance * fnorm;
        };
        maybe_refresh(cache, assemble, cache.last_pcg_iterations, handle.refresh_threshold);
        PcgResult result = pcg(apply, f, precond, handle.tolerance, handle.max_iterations);
        if (fnorm > 0.0 && !good(result)) {
            // One retry with a fresh factorization of the current matrix.
            maybe_refresh(cache, assemble, handle.refresh_threshold + 1, handle.refresh_threshold);
            result = pcg(apply, f, precond, handle.tolerance, handle.max_iterations);
            if (!result.converged)
                throw SingularSystemError("solve_potential: PCG iteration overflow");
        }
        cache.last_pcg_iterations = result.iterations;
        u = std::move(result.x);
    }

    const double residual = (apply_S(problem, mu, u) - f).norm();
    if (fnorm > 0.0 && residual > handle.tolerance * fnorm)
        throw SingularSystemError("solve_potential: residual too large, f may be outside range(A)");
    return u;
}

inline Vector solve_potential(const BasisPursuitProblem& problem, const Vector& mu,
                              const LinearSolverHandle& handle = {
                                  LinearSolverHandle::Mode::DirectCholesky, 1e-10, 500, 30}) {
    PreconditionerCache scratch;
    return solve_potential(problem, mu, handle, scratch);
}

}  // namespace physarum
