#pragma once

#include "physarum/dynamics.hpp"
#include "physarum/linear_solver.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace physarum {

/// Per-step scratch data for one backward-Euler Newton solve.
///
/// The Newton system in (du, dmu) has the block form
///   [ S(mu)                A Diag(grad) ] [s1]   [f1]
///   [ -dt C(mu) D1 G       D2           ] [s2] = -[f2]
/// with D1 = Diag(sign(grad)), D2 = Diag(1 - dt (|grad| - 1)). Eliminating
/// s2 leaves the SPD system S(mu_tilde) s1 = A Diag(grad) D2^-1 f2 - f1.
struct NewtonWorkspace {
    Vector f1;           // S(mu) u - f
    Vector f2;           // mu - dt (C(mu) |grad| - mu) - mu_prev
    Vector grad;         // G u
    Vector grad_sign;    // sign(grad), sign(0) = 0
    Vector update_diag;  // D2, must stay positive for the step to be valid
    Vector mu_tilde;     // effective conductivity of the reduced system
};

struct NewtonReport {
    enum class Failure { None, StepTooLarge, MuNonpositive, InnerSolve, MaxIterations };
    int iterations = 0;
    double final_residual = 0.0;
    int pcg_iterations = 0;
    bool converged = false;
    Failure failure = Failure::None;
};

inline const char* to_string(NewtonReport::Failure f) {
    switch (f) {
        case NewtonReport::Failure::None: return "none";
        case NewtonReport::Failure::StepTooLarge: return "step too large";
        case NewtonReport::Failure::MuNonpositive: return "conductivity not positive";
        case NewtonReport::Failure::InnerSolve: return "inner solve failed";
        case NewtonReport::Failure::MaxIterations: return "max iterations";
    }
    return "unknown";
}

/// Nonlinear residual of the backward-Euler system at (u, mu).
inline std::pair<Vector, Vector> newton_residual(const BasisPursuitProblem& problem,
                                                 const TransportState& state,
                                                 const Vector& mu_prev, double dt) {
    const Vector grad = apply_G(problem, state.u);
    Vector f1 = apply_S(problem, state.mu, state.u) - problem.grounded_rhs();
    Vector f2 = state.mu - dt * (state.mu.cwiseProduct(grad.cwiseAbs()) - state.mu) - mu_prev;
    return {std::move(f1), std::move(f2)};
}

/// Effective conductivity mu_tilde_e = mu_e (1 + dt) / (1 - dt (|grad|_e - 1));
/// S(mu_tilde) equals the Schur complement of the Newton system.
inline Vector mu_tilde(const Vector& mu, const Vector& grad_abs, double dt) {
    return (mu.array() * (1.0 + dt) / (1.0 - dt * (grad_abs.array() - 1.0))).matrix();
}

/// Fills the Jacobian diagonals and the effective conductivity at the
/// current state. The residual fields are left empty.
inline NewtonWorkspace jacobian_blocks(const BasisPursuitProblem& problem,
                                       const TransportState& state, double dt) {
    NewtonWorkspace ws;
    ws.grad = apply_G(problem, state.u);
    ws.grad_sign = ws.grad.array().sign().matrix();
    const Vector grad_abs = ws.grad.cwiseAbs();
    ws.update_diag = (1.0 - dt * (grad_abs.array() - 1.0)).matrix();
    if ((ws.update_diag.array() > 0.0).all()) ws.mu_tilde = mu_tilde(state.mu, grad_abs, dt);
    return ws;
}

/// Solves the full block Newton system J s = -F through the reduced SPD
/// system and back-substitution s2 = D2^-1 (dt C D1 G s1 - f2). Requires
/// D2 > 0; callers back off dt otherwise.
inline std::pair<Vector, Vector> schur_solve(const NewtonWorkspace& ws,
                                             const BasisPursuitProblem& problem,
                                             const TransportState& state, double dt,
                                             const LinearSolverHandle& handle,
                                             PreconditionerCache& cache, double pcg_tol,
                                             int* pcg_iterations = nullptr) {
    if ((ws.update_diag.array() <= 0.0).any())
        throw Error("schur_solve: step too large, D2 not positive");

    // rhs = A Diag(grad) D2^-1 f2 - f1, projected onto the grounded subspace.
    const Vector edge = ws.grad.cwiseProduct(ws.f2.cwiseQuotient(ws.update_diag));
    Vector rhs = problem.matrix().apply(edge) - ws.f1;
    for (Index g : problem.grounded_nodes()) rhs[g] = 0.0;

    Vector s1;
    int iterations = 0;
    if (handle.mode == LinearSolverHandle::Mode::DirectCholesky) {
        CholeskyFactor factor;
        if (!factor.compute(detail::assemble_grounded_S(problem, ws.mu_tilde)))
            throw SingularSystemError("schur_solve: reduced matrix not positive definite");
        s1 = factor.solve(rhs);
    } else {
        auto apply = [&](const Vector& x) { return apply_S(problem, ws.mu_tilde, x); };
        auto precond = [&](const Vector& r) { return cache.factor->solve(r); };
        PcgResult result = pcg(apply, rhs, precond, pcg_tol, handle.max_iterations);
        if (!result.converged) {
            maybe_refresh(
                cache, [&] { return detail::assemble_grounded_S(problem, ws.mu_tilde); },
                handle.refresh_threshold + 1, handle.refresh_threshold);
            result = pcg(apply, rhs, precond, pcg_tol, handle.max_iterations);
            if (!result.converged) throw SingularSystemError("schur_solve: inner solve failed");
        }
        cache.last_pcg_iterations = result.iterations;
        iterations = result.iterations;
        s1 = std::move(result.x);
    }
    if (pcg_iterations) *pcg_iterations = iterations;

    const Vector g_s1 = apply_G(problem, s1);
    Vector s2 = (dt * state.mu.cwiseProduct(ws.grad_sign.cwiseProduct(g_s1)) - ws.f2)
                    .cwiseQuotient(ws.update_diag);
    return {std::move(s1), std::move(s2)};
}

/// Solver tolerances and limits for one backward-Euler step.
struct SolverConfig {
    LinearSolverHandle linear;
    double newton_tolerance = 1e-11;  // relative to max(1, ||f||)
    int newton_max_iterations = 20;
};

/// One implicit backward-Euler step: find (u, mu) with S(mu) u = f and
/// mu - dt (C(mu)|G u| - mu) = mu_prev, starting the Newton iteration from
/// the converged values of the previous step.
inline std::pair<TransportState, NewtonReport> newton_solve(const BasisPursuitProblem& problem,
                                                            const TransportState& prev, double dt,
                                                            const SolverConfig& config,
                                                            PreconditionerCache& cache) {
    TransportState state = prev;
    const Vector& mu_prev = prev.mu;
    NewtonReport report;
    const double target =
        config.newton_tolerance * std::max(1.0, problem.grounded_rhs().norm());

    double initial_norm = 0.0;
    for (int it = 0; it <= config.newton_max_iterations; ++it) {
        NewtonWorkspace ws = jacobian_blocks(problem, state, dt);
        ws.f1 = apply_S(problem, state.mu, state.u) - problem.grounded_rhs();
        ws.f2 = state.mu - dt * (state.mu.cwiseProduct(ws.grad.cwiseAbs()) - state.mu) - mu_prev;
        const double fnorm = std::sqrt(ws.f1.squaredNorm() + ws.f2.squaredNorm());
        report.final_residual = fnorm;
        report.iterations = it;
        if (fnorm <= target) {
            report.converged = true;
            return {std::move(state), report};
        }
        if (it == config.newton_max_iterations) break;
        if (it == 0) initial_norm = fnorm;

        if ((ws.update_diag.array() <= 0.0).any()) {
            report.failure = NewtonReport::Failure::StepTooLarge;
            return {std::move(state), report};
        }

        const bool use_pcg = config.linear.mode == LinearSolverHandle::Mode::PcgWithCache;
        if (use_pcg) {
            maybe_refresh(
                cache, [&] { return detail::assemble_grounded_S(problem, ws.mu_tilde); },
                cache.last_pcg_iterations, config.linear.refresh_threshold);
        }
        const double eta = forcing_term(fnorm, initial_norm);
        int pcg_iters = 0;
        Vector s1, s2;
        try {
            std::tie(s1, s2) =
                schur_solve(ws, problem, state, dt, config.linear, cache, eta, &pcg_iters);
        } catch (const SingularSystemError&) {
            report.failure = NewtonReport::Failure::InnerSolve;
            return {std::move(state), report};
        } catch (const IndefinitePreconditionerError&) {
            report.failure = NewtonReport::Failure::InnerSolve;
            return {std::move(state), report};
        }
        report.pcg_iterations += pcg_iters;

        state.u += s1;
        state.mu += s2;
        if ((state.mu.array() <= 0.0).any()) {
            report.failure = NewtonReport::Failure::MuNonpositive;
            return {std::move(state), report};
        }
    }
    report.failure = NewtonReport::Failure::MaxIterations;
    return {std::move(state), report};
}

}  // namespace physarum
