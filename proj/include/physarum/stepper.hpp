#pragma once

#include "physarum/newton.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace physarum {

/// Diagnostics of one accepted time step.
struct StepRecord {
    int step = 0;
    double t = 0.0;
    double dt = 0.0;
    int newton_iterations = 0;
    int pcg_iterations = 0;
    double var = 0.0;
    std::optional<double> err_x;  // relative flux error vs ground truth
    double err_dual = 0.0;        // | ||A^T u||_inf - 1 |
    double lyapunov = 0.0;
    double energy = 0.0;
    double mass = 0.0;
    double wall_seconds = 0.0;
};

enum class Integrator { BackwardEuler, ForwardEuler };

struct StepperConfig {
    double dt0 = 1.0;
    double tau = 5e-8;        // convergence threshold on var
    int max_steps = 1000;
    double max_wall_seconds = std::numeric_limits<double>::infinity();
    double growth_factor = 2.0;
    double backoff_factor = 2.0;
    int max_backoffs = 40;
    double mu0 = 1.0;         // uniform initial conductivity
    Integrator integrator = Integrator::BackwardEuler;

    void validate() const {
        if (!(dt0 > 0.0)) throw InputError("StepperConfig: dt0 must be positive");
        if (!(tau > 0.0)) throw InputError("StepperConfig: tau must be positive");
        if (!(growth_factor > 1.0)) throw InputError("StepperConfig: growth factor must be > 1");
        if (!(backoff_factor > 1.0)) throw InputError("StepperConfig: backoff factor must be > 1");
        if (!(mu0 > 0.0)) throw InputError("StepperConfig: mu0 must be positive");
        if (max_steps < 1) throw InputError("StepperConfig: max_steps must be >= 1");
    }
};

enum class RunStatus { Converged, MaxSteps, Stalled, TimeBudget };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Converged: return "converged";
        case RunStatus::MaxSteps: return "max_steps";
        case RunStatus::Stalled: return "stalled";
        case RunStatus::TimeBudget: return "time_budget";
    }
    return "unknown";
}

/// Scaled successive-iterate distance, the steady-state stopping metric:
/// ||mu_next - mu_prev|| / (dt ||mu_prev||).
inline double variation(const Vector& mu_next, const Vector& mu_prev, double dt) {
    return (mu_next - mu_prev).norm() / (dt * mu_prev.norm());
}

namespace detail {

inline StepRecord make_record(const BasisPursuitProblem& problem, const TransportState& state,
                              const Vector& mu_prev, double dt, int newton_iters, int pcg_iters,
                              double wall_seconds) {
    StepRecord rec;
    rec.t = state.t;
    rec.dt = dt;
    rec.newton_iterations = newton_iters;
    rec.pcg_iterations = pcg_iters;
    rec.var = variation(state.mu, mu_prev, dt);
    const Flux flux = compute_flux(problem, state);
    if (problem.ground_truth()) {
        const Vector& xt = *problem.ground_truth();
        rec.err_x = (flux.v - xt).norm() / xt.norm();
    }
    rec.err_dual =
        std::abs(problem.matrix().apply_transpose(state.u).lpNorm<Eigen::Infinity>() - 1.0);
    const LyapunovBreakdown lb = lyapunov_breakdown(problem, state);
    rec.lyapunov = lb.lyapunov;
    rec.energy = lb.energy;
    rec.mass = lb.mass;
    rec.wall_seconds = wall_seconds;
    return rec;
}

}  // namespace detail

/// Attempts one backward-Euler step. Proposes growth_factor * state.dt,
/// halving on "step too large" or Newton failure, at most max_backoffs
/// times. Returns the accepted state and its diagnostics, or nullopt when
/// dt underflows (the caller keeps the last good state).
inline std::optional<std::pair<TransportState, StepRecord>> advance(
    const BasisPursuitProblem& problem, const TransportState& state, const StepperConfig& stepper,
    const SolverConfig& solver, PreconditionerCache& cache) {
    const auto started = std::chrono::steady_clock::now();
    double dt_try = stepper.growth_factor * state.dt;
    for (int backoff = 0; backoff <= stepper.max_backoffs; ++backoff) {
        if (dt_try < 1e-14) return std::nullopt;
        auto [next, report] = newton_solve(problem, state, dt_try, solver, cache);
        if (report.converged) {
            next.t = state.t + dt_try;
            next.dt = dt_try;
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            StepRecord rec = detail::make_record(problem, next, state.mu, dt_try,
                                                 report.iterations, report.pcg_iterations, wall);
            return std::make_pair(std::move(next), std::move(rec));
        }
        dt_try /= stepper.backoff_factor;
    }
    return std::nullopt;
}

struct RunResult {
    TransportState state;
    std::vector<StepRecord> trace;
    RunStatus status = RunStatus::MaxSteps;
    double lyapunov_initial = 0.0;
    double wall_seconds = 0.0;
};

using StepObserver = std::function<void(const TransportState&, const StepRecord&)>;

inline std::optional<std::pair<TransportState, StepRecord>> forward_euler_step(
    const BasisPursuitProblem& problem, const TransportState& state, const StepperConfig& stepper,
    const SolverConfig& solver, PreconditionerCache& cache);

/// Runs the time loop from an explicit starting state. state0.dt is the
/// last accepted step size; the first proposal is growth_factor * state0.dt.
inline RunResult run_from(const BasisPursuitProblem& problem, TransportState state0,
                          const StepperConfig& stepper, const SolverConfig& solver,
                          const StepObserver& observer = nullptr) {
    stepper.validate();
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };

    RunResult out;
    PreconditionerCache cache;
    if (state0.u.size() == 0)
        state0.u = solve_potential(problem, state0.mu, solver.linear, cache);
    out.lyapunov_initial = lyapunov_breakdown(problem, state0).lyapunov;
    out.state = std::move(state0);

    int step = 0;
    for (int k = 0; k < stepper.max_steps; ++k) {
        if (elapsed() > stepper.max_wall_seconds) {
            out.status = RunStatus::TimeBudget;
            out.wall_seconds = elapsed();
            return out;
        }

        std::optional<std::pair<TransportState, StepRecord>> accepted;
        if (stepper.integrator == Integrator::BackwardEuler) {
            accepted = advance(problem, out.state, stepper, solver, cache);
        } else {
            accepted = forward_euler_step(problem, out.state, stepper, solver, cache);
        }
        if (!accepted) {
            out.status = RunStatus::Stalled;
            out.wall_seconds = elapsed();
            return out;
        }
        out.state = std::move(accepted->first);
        StepRecord rec = std::move(accepted->second);
        rec.step = ++step;
        out.trace.push_back(rec);
        if (observer) observer(out.state, rec);
        if (rec.var < stepper.tau) {
            out.status = RunStatus::Converged;
            out.wall_seconds = elapsed();
            return out;
        }
    }
    out.status = RunStatus::MaxSteps;
    out.wall_seconds = elapsed();
    return out;
}

/// Forward-Euler baseline with fixed step dt0 (the reweighted-least-squares
/// scheme). Stability is the caller's responsibility.
inline std::optional<std::pair<TransportState, StepRecord>> forward_euler_step(
    const BasisPursuitProblem& problem, const TransportState& state, const StepperConfig& stepper,
    const SolverConfig& solver, PreconditionerCache& cache) {
    const auto started = std::chrono::steady_clock::now();
    const double dt = stepper.dt0;
    TransportState next;
    next.mu = state.mu + dt * dynamics_rhs(problem, state);
    if ((next.mu.array() <= 0.0).any()) return std::nullopt;
    next.u = solve_potential(problem, next.mu, solver.linear, cache);
    next.t = state.t + dt;
    next.dt = dt;
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    StepRecord rec = detail::make_record(problem, next, state.mu, dt, 0,
                                         cache.last_pcg_iterations, wall);
    return std::make_pair(std::move(next), std::move(rec));
}

/// Full solve from the uniform initial conductivity mu0.
inline RunResult run(const BasisPursuitProblem& problem, const StepperConfig& stepper,
                     const SolverConfig& solver = {}, const StepObserver& observer = nullptr) {
    stepper.validate();
    TransportState state0;
    state0.mu = Vector::Constant(problem.m(), stepper.mu0);
    // Seed so that the first proposal growth_factor * dt equals dt0.
    state0.dt = stepper.dt0 / stepper.growth_factor;
    state0.t = 0.0;
    return run_from(problem, std::move(state0), stepper, solver, observer);
}

/// Writes the trace in the documented CSV layout. err_x is empty when the
/// problem carries no ground truth.
inline std::string trace_csv(const std::vector<StepRecord>& trace) {
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string out =
        "step,t,dt,newton_iters,pcg_iters,var,err_x,err_dual,lyapunov,energy,mass,wall_seconds\n";
    for (const StepRecord& r : trace) {
        out += std::to_string(r.step) + ',' + fmt(r.t) + ',' + fmt(r.dt) + ',' +
               std::to_string(r.newton_iterations) + ',' + std::to_string(r.pcg_iterations) + ',' +
               fmt(r.var) + ',' + (r.err_x ? fmt(*r.err_x) : std::string()) + ',' +
               fmt(r.err_dual) + ',' + fmt(r.lyapunov) + ',' + fmt(r.energy) + ',' + fmt(r.mass) +
               ',' + fmt(r.wall_seconds) + '\n';
    }
    return out;
}

}  // namespace physarum
