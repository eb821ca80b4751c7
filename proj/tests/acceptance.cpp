// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run through ctest or directly from the build tree.

#include "newton_oracle.hpp"
#include "test_helpers.hpp"

#include "physarum/dynamics.hpp"
#include "physarum/generators.hpp"
#include "physarum/oracle.hpp"
#include "physarum/stepper.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace physarum;
using namespace physarum::testing;

namespace {

namespace fs = std::filesystem;

struct Criterion {
    int id;
    std::string label;
    bool passed;
    std::string detail;
};

std::vector<Criterion> g_results;

void report(int id, const std::string& label, bool passed, const std::string& detail) {
    std::printf("criterion %d [%s] %s%s%s\n", id, passed ? "PASS" : "FAIL", label.c_str(),
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
    g_results.push_back({id, label, passed, detail});
}

SolverConfig production_solver() {
    SolverConfig cfg;
    cfg.linear.mode = LinearSolverHandle::Mode::PcgWithCache;
    return cfg;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct DeskRun {
    BasisPursuitProblem problem;
    RunResult result;
};

// Shared across criteria 1, 3, 7, 8.
std::vector<DeskRun> g_desk_runs;
// Shared across criteria 2, 3, 7, 8.
std::vector<DeskRun> g_recovery_runs;

void criterion_1_oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream detail;
    double worst_obj = 0.0, worst_v = 0.0;
    int unique_count = 0;
    for (std::uint64_t seed = 1; seed <= 20 && ok; ++seed) {
        BasisPursuitProblem problem = generate_random_bp({10, 30, 3, seed});
        RunResult result = run(problem, StepperConfig{}, production_solver());
        if (result.status != RunStatus::Converged) {
            ok = false;
            detail << "seed " << seed << " did not converge";
            break;
        }
        const LpSolution lp = lp_solve_l1(problem);
        if (lp.status != LpSolution::Status::Optimal) {
            ok = false;
            detail << "oracle failed on seed " << seed;
            break;
        }
        const double primal = optimality_residuals(problem, result.state).primal_objective;
        const double obj_gap = std::abs(primal - lp.objective) / std::abs(lp.objective);
        worst_obj = std::max(worst_obj, obj_gap);
        if (obj_gap > 1e-6) {
            ok = false;
            detail << "seed " << seed << " objective gap " << obj_gap;
            break;
        }
        if (lp.unique_optimum) {
            ++unique_count;
            const Vector v = compute_flux(problem, result.state).v;
            const double v_err = (v - lp.v_opt).lpNorm<Eigen::Infinity>();
            worst_v = std::max(worst_v, v_err);
            if (v_err > 1e-5) {
                ok = false;
                detail << "seed " << seed << " vertex error " << v_err;
                break;
            }
        }
        g_desk_runs.push_back({std::move(problem), std::move(result)});
    }
    const double elapsed = seconds_since(t0);
    if (ok && elapsed >= 10.0) {
        ok = false;
        detail << "took " << elapsed << " s (limit 10)";
    }
    if (ok) {
        detail << "20 instances, max objective gap " << worst_obj << ", max vertex error "
               << worst_v << " over " << unique_count << " unique optima, " << elapsed << " s";
    }
    report(1, "oracle equivalence at desk scale", ok, detail.str());
}

void criterion_2_sparse_recovery() {
    bool ok = true;
    std::ostringstream detail;

    const auto t0 = std::chrono::steady_clock::now();
    BasisPursuitProblem problem = generate_random_bp({100, 1000, 8, 1});
    RunResult result = run(problem, StepperConfig{}, production_solver());
    const double elapsed = seconds_since(t0);
    const StepRecord& last = result.trace.back();
    if (result.status != RunStatus::Converged)
        ok = false, detail << "(100,1000,8) did not converge; ";
    if (!(last.var < 5e-8)) ok = false, detail << "var " << last.var << "; ";
    if (!last.err_x || !(*last.err_x < 1e-5))
        ok = false, detail << "err_x " << (last.err_x ? *last.err_x : -1.0) << "; ";
    if (!(last.err_dual < 1e-4)) ok = false, detail << "err_dual " << last.err_dual << "; ";
    if (!(elapsed < 60.0)) ok = false, detail << "took " << elapsed << " s; ";
    if (!(result.trace.size() < 200))
        ok = false, detail << result.trace.size() << " steps; ";
    if (ok)
        detail << "(100,1000,8): var " << last.var << ", err_x " << *last.err_x << ", err_dual "
               << last.err_dual << ", " << result.trace.size() << " steps, " << elapsed << " s";
    g_recovery_runs.push_back({std::move(problem), std::move(result)});

    // Smallest benchmark instance as a smoke test within a 30 minute budget.
    const auto t1 = std::chrono::steady_clock::now();
    BasisPursuitProblem smoke_problem = generate_random_bp(paper_suite(1));
    RunResult smoke = run(smoke_problem, StepperConfig{}, production_solver());
    const double smoke_elapsed = seconds_since(t1);
    if (smoke.status != RunStatus::Converged)
        ok = false, detail << "(250,25000,5) did not converge; ";
    if (!(smoke_elapsed < 1800.0))
        ok = false, detail << "(250,25000,5) took " << smoke_elapsed << " s; ";
    if (ok) detail << "; (250,25000,5): " << smoke.trace.size() << " steps, " << smoke_elapsed
                   << " s";
    g_recovery_runs.push_back({std::move(smoke_problem), std::move(smoke)});

    report(2, "sparse recovery at the stated tolerances", ok, detail.str());
}

void criterion_3_lyapunov_monotonicity() {
    bool ok = true;
    std::ostringstream detail;
    long steps = 0;
    auto check = [&](const DeskRun& r) {
        double prev = r.result.lyapunov_initial;
        for (const StepRecord& rec : r.result.trace) {
            ++steps;
            if (!(rec.lyapunov <= prev + 1e-10 * std::abs(prev))) {
                ok = false;
                detail << "increase at t=" << rec.t << " (" << prev << " -> " << rec.lyapunov
                       << "); ";
            }
            prev = rec.lyapunov;
        }
    };
    for (const DeskRun& r : g_desk_runs) check(r);
    for (const DeskRun& r : g_recovery_runs) check(r);
    if (ok) detail << "monotone on all " << steps << " accepted steps";
    report(3, "Lyapunov decrease on every accepted step", ok, detail.str());
}

void criterion_4_lie_derivative_consistency() {
    const BasisPursuitProblem problem = generate_random_bp({10, 30, 3, 2});
    StepperConfig cfg;
    cfg.integrator = Integrator::ForwardEuler;
    cfg.dt0 = 1e-4;
    SolverConfig solver;
    solver.linear.mode = LinearSolverHandle::Mode::DirectCholesky;
    PreconditionerCache cache;

    TransportState state;
    state.mu = Vector::Ones(30);
    state.u = solve_potential(problem, state.mu, solver.linear, cache);

    bool ok = true;
    std::ostringstream detail;
    double worst = 0.0;
    double lyap = lyapunov_breakdown(problem, state).lyapunov;
    for (int k = 0; k < 100; ++k) {
        const double lie = lie_derivative(problem, state);
        auto next = forward_euler_step(problem, state, cfg, solver, cache);
        if (!next) {
            ok = false;
            detail << "forward Euler failed at step " << k;
            break;
        }
        state = next->first;
        const double decrement = lyap - next->second.lyapunov;
        lyap = next->second.lyapunov;
        const double predicted = -cfg.dt0 * lie;
        const double rel = std::abs(decrement - predicted) / std::abs(predicted);
        worst = std::max(worst, rel);
        if (!(rel < 0.10)) {
            ok = false;
            detail << "step " << k << " relative error " << rel;
            break;
        }
    }
    if (ok) detail << "100 steps, worst relative error " << worst;
    report(4, "forward-Euler decrement matches dt * Lie derivative within 10%", ok, detail.str());
}

void criterion_5_jacobian_vs_finite_differences() {
    CounterRng rng(501);
    bool ok = true;
    std::ostringstream detail;
    double worst = 0.0;
    for (int sample = 0; sample < 30 && ok; ++sample) {
        const BasisPursuitProblem p = generate_random_bp({6, 15, 2, 500 + static_cast<std::uint64_t>(sample)});
        const TransportState state = kink_free_state(p, rng);
        const double gmax = apply_G(p, state.u).cwiseAbs().maxCoeff();
        const double dt =
            std::min(rng.uniform(0.1, 2.0), gmax > 1.0 ? 0.9 / (gmax - 1.0) : 2.0);
        const DenseJacobian analytic = analytic_jacobian(p, state, dt);
        const DenseJacobian fd = fd_jacobian(p, state, state.mu, dt);
        const double errs[4] = {
            block_rel_error(fd.s, analytic.s), block_rel_error(fd.b12, analytic.b12),
            block_rel_error(fd.b21, analytic.b21), block_rel_error(fd.b22, analytic.b22)};
        for (double e : errs) {
            worst = std::max(worst, e);
            if (!(e < 1e-5)) {
                ok = false;
                detail << "sample " << sample << " block error " << e;
            }
        }
    }
    if (ok) detail << "30 samples, worst block error " << worst;
    report(5, "Jacobian blocks match central finite differences to 1e-5", ok, detail.str());
}

void criterion_6_schur_correctness() {
    CounterRng rng(601);
    bool ok = true;
    std::ostringstream detail;
    double worst_residual = 0.0, worst_identity = 0.0;
    for (int sample = 0; sample < 10 && ok; ++sample) {
        // n + m <= 200
        const Index n = 8 + 2 * (sample % 4);
        const Index m = 3 * n + 4 * sample;
        const BasisPursuitProblem p =
            generate_random_bp(
            {n, m, std::max<Index>(2, n / 3), 600 + static_cast<std::uint64_t>(sample)});
        const TransportState state = kink_free_state(p, rng);
        const double gmax = apply_G(p, state.u).cwiseAbs().maxCoeff();
        const double dt =
            std::min(rng.uniform(0.2, 1.5), gmax > 1.0 ? 0.9 / (gmax - 1.0) : 1.5);

        NewtonWorkspace ws = jacobian_blocks(p, state, dt);
        std::tie(ws.f1, ws.f2) = newton_residual(p, state, random_positive_mu(rng, m), dt);

        // mu_tilde reproduces the eliminated matrix entrywise.
        const DenseJacobian blocks = analytic_jacobian(p, state, dt);
        const Eigen::MatrixXd m_explicit =
            blocks.s - blocks.b12 * ws.update_diag.cwiseInverse().asDiagonal() * blocks.b21;
        const Eigen::MatrixXd m_assembled = assemble_S(p, ws.mu_tilde).to_dense();
        const double identity_err = (m_assembled - m_explicit).cwiseAbs().maxCoeff() /
                                    m_explicit.cwiseAbs().maxCoeff();
        worst_identity = std::max(worst_identity, identity_err);
        if (!(identity_err <= 1e-12)) {
            ok = false;
            detail << "sample " << sample << " mu_tilde identity error " << identity_err;
            break;
        }

        LinearSolverHandle handle{LinearSolverHandle::Mode::PcgWithCache, 1e-12, 1000, 30};
        PreconditionerCache cache;
        maybe_refresh(
            cache,
            [&] {
                SystemMatrix s = assemble_S(p, ws.mu_tilde);
                ground_system(p, s);
                return s;
            },
            1, 30);
        const auto [s1, s2] = schur_solve(ws, p, state, dt, handle, cache, 1e-12);
        Vector full_f(n + m), step(n + m);
        full_f << ws.f1, ws.f2;
        step << s1, s2;
        const double residual =
            (full_jacobian(blocks) * step + full_f).norm() / full_f.norm();
        worst_residual = std::max(worst_residual, residual);
        if (!(residual <= 1e-9)) {
            ok = false;
            detail << "sample " << sample << " block-system residual " << residual;
        }
    }
    if (ok)
        detail << "10 systems, worst residual " << worst_residual << ", worst identity error "
               << worst_identity;
    report(6, "Schur reduction solves the full Newton system", ok, detail.str());
}

void criterion_7_duality_at_convergence() {
    bool ok = true;
    std::ostringstream detail;
    double worst_gap = 0.0, worst_sup = 0.0;
    auto check = [&](const DeskRun& r) {
        if (r.result.status != RunStatus::Converged) return;
        const OptimalityResiduals opt = optimality_residuals(r.problem, r.result.state);
        const double rel_gap = opt.duality_gap / opt.primal_objective;
        const double sup = apply_G(r.problem, r.result.state.u).lpNorm<Eigen::Infinity>();
        worst_gap = std::max(worst_gap, std::abs(rel_gap));
        worst_sup = std::max(worst_sup, sup);
        if (!(std::abs(rel_gap) <= 1e-6)) {
            ok = false;
            detail << "relative gap " << rel_gap << "; ";
        }
        if (!(sup <= 1.0 + 1e-4)) {
            ok = false;
            detail << "||Gu||_inf " << sup << "; ";
        }
    };
    for (const DeskRun& r : g_desk_runs) check(r);
    for (const DeskRun& r : g_recovery_runs) check(r);
    if (ok) detail << "worst |gap|/primal " << worst_gap << ", worst ||Gu||_inf " << worst_sup;
    report(7, "duality gap and dual feasibility at convergence", ok, detail.str());
}

void criterion_8_positivity_and_confinement() {
    bool ok = true;
    std::ostringstream detail;
    auto check = [&](const DeskRun& r) {
        if (!(r.result.state.mu.minCoeff() > 0.0)) {
            ok = false;
            detail << "final conductivity not positive; ";
        }
        for (const StepRecord& rec : r.result.trace) {
            if (!(rec.mass <= r.result.lyapunov_initial * (1.0 + 1e-12))) {
                ok = false;
                detail << "mass " << rec.mass << " above initial Lyapunov "
                       << r.result.lyapunov_initial << " at t=" << rec.t << "; ";
                break;
            }
        }
    };
    for (const DeskRun& r : g_desk_runs) check(r);
    for (const DeskRun& r : g_recovery_runs) check(r);
    if (ok) detail << "all accepted steps confined to the initial Lyapunov ball";
    report(8, "conductivity positivity and mass confinement", ok, detail.str());
}

void criterion_9_determinism() {
    bool ok = true;
    std::ostringstream detail;
    const fs::path tmp =
        fs::temp_directory_path() / ("physarum-acc-" + std::to_string(::getpid()));
    fs::create_directories(tmp);

    auto cli = [&](const std::string& args) {
        const std::string cmd = std::string(PHYSARUM_CLI_PATH) + " " + args + " > " +
                                (tmp / "log").string() + " 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };
    // Timing is the one non-reproducible column; drop it before comparing.
    auto strip_wall = [](const std::string& csv) {
        std::string out;
        std::istringstream in(csv);
        std::string line;
        while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
        return out;
    };

    if (cli("gen random --n 10 --m 30 --k 3 --seed 4 --out " + (tmp / "p").string()) != 0) {
        ok = false;
        detail << "gen failed";
    } else if (cli("solve " + (tmp / "p" / "manifest.json").string() + " --out " +
                   (tmp / "r1").string()) != 0 ||
               cli("solve " + (tmp / "p" / "manifest.json").string() + " --out " +
                   (tmp / "r2").string()) != 0) {
        ok = false;
        detail << "solve failed";
    } else {
        const std::string t1 = slurp(tmp / "r1" / "trace.csv");
        const std::string t2 = slurp(tmp / "r2" / "trace.csv");
        if (t1.empty() || strip_wall(t1) != strip_wall(t2)) {
            ok = false;
            detail << "traces differ beyond the wall-clock column";
        } else {
            detail << "trace identical byte-for-byte outside the wall-clock column";
        }
    }
    fs::remove_all(tmp);
    report(9, "single-thread reruns reproduce the trace", ok, detail.str());
}

}  // namespace

int main() {
    criterion_1_oracle_equivalence();
    criterion_2_sparse_recovery();
    criterion_3_lyapunov_monotonicity();
    criterion_4_lie_derivative_consistency();
    criterion_5_jacobian_vs_finite_differences();
    criterion_6_schur_correctness();
    criterion_7_duality_at_convergence();
    criterion_8_positivity_and_confinement();
    criterion_9_determinism();

    int failures = 0;
    for (const Criterion& c : g_results)
        if (!c.passed) ++failures;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(g_results.size()) - failures,
                g_results.size());
    return failures;
}
