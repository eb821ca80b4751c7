#pragma once

#include "physarum/operators.hpp"

#include <cmath>
#include <sstream>

namespace physarum {

/// Right-hand side of the conductivity ODE: mu .* |G u| - mu.
inline Vector dynamics_rhs(const BasisPursuitProblem& problem, const TransportState& state) {
    const Vector grad = apply_G(problem, state.u);
    return state.mu.cwiseProduct(grad.cwiseAbs()) - state.mu;
}

/// Quadratic energy of the current state. Returned as f^T u / 2; the
/// equivalent form u^T S(mu) u / 2 is evaluated as a consistency check and a
/// disagreement beyond 1e-10 relative means the potential is stale.
inline double energy(const BasisPursuitProblem& problem, const TransportState& state) {
    const double from_rhs = 0.5 * problem.rhs().dot(state.u);
    const double from_operator = 0.5 * state.u.dot(apply_S_raw(problem, state.mu, state.u));
    const double scale = std::max({std::abs(from_rhs), std::abs(from_operator), 1e-300});
    if (std::abs(from_rhs - from_operator) > 1e-10 * scale) {
        std::ostringstream msg;
        msg << "energy: stale potential (rhs form " << from_rhs << " vs operator form "
            << from_operator << ")";
        throw StalePotentialError(msg.str());
    }
    return from_rhs;
}

/// Mass functional: mu^T w / 2.
inline double mass(const BasisPursuitProblem& problem, const Vector& mu) {
    return 0.5 * mu.dot(problem.weights());
}

/// Derivative of the Lyapunov functional along the flow:
/// -1/2 sum_e mu_e (|Gu|_e + 1)(|Gu|_e - 1)^2 w_e, nonpositive by sign
/// structure.
inline double lie_derivative(const BasisPursuitProblem& problem, const TransportState& state) {
    const Vector grad_abs = apply_G(problem, state.u).cwiseAbs();
    double sum = 0.0;
    for (Index e = 0; e < problem.m(); ++e) {
        const double g = grad_abs[e];
        sum += state.mu[e] * (g + 1.0) * (g - 1.0) * (g - 1.0) * problem.weights()[e];
    }
    return -0.5 * sum;
}

/// Energy, mass, their sum, and the Lie derivative at the current state.
struct LyapunovBreakdown {
    double energy = 0.0;
    double mass = 0.0;
    double lyapunov = 0.0;
    double lie_derivative = 0.0;
};

inline LyapunovBreakdown lyapunov_breakdown(const BasisPursuitProblem& problem,
                                            const TransportState& state) {
    LyapunovBreakdown out;
    out.energy = energy(problem, state);
    out.mass = mass(problem, state.mu);
    out.lyapunov = out.energy + out.mass;
    out.lie_derivative = lie_derivative(problem, state);
    return out;
}

/// Primal/dual objective values and residuals of the optimality system.
struct OptimalityResiduals {
    double primal_objective = 0.0;   // sum_e |v_e| w_e
    double dual_objective = 0.0;     // f^T u
    double duality_gap = 0.0;        // primal - dual
    double dual_feasibility = 0.0;   // max(0, ||G u||_inf - 1)
};

inline OptimalityResiduals optimality_residuals(const BasisPursuitProblem& problem,
                                                const TransportState& state) {
    OptimalityResiduals out;
    const Flux flux = compute_flux(problem, state);
    out.primal_objective = flux.v.cwiseAbs().dot(problem.weights());
    out.dual_objective = problem.rhs().dot(state.u);
    out.duality_gap = out.primal_objective - out.dual_objective;
    const double sup = apply_G(problem, state.u).lpNorm<Eigen::Infinity>();
    out.dual_feasibility = std::max(0.0, sup - 1.0);
    return out;
}

}  // namespace physarum
