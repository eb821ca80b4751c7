#include "physarum/dynamics.hpp"
#include "physarum/generators.hpp"
#include "physarum/io.hpp"
#include "physarum/log.hpp"
#include "physarum/oracle.hpp"
#include "physarum/stepper.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace physarum;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitNotConverged = 1;
constexpr int kExitInputError = 2;

struct SolveFlags {
    double dt0 = 1.0;
    bool dt0_set = false;
    double tau = 5e-8;
    double mu0 = 1.0;
    std::string integrator = "backward-euler";
    double pcg_tol = 1e-10;
    int pcg_max_iter = 500;
    int precond_refresh = 30;
    int max_steps = 1000;
    double max_wall_seconds = std::numeric_limits<double>::infinity();

    void add_to(CLI::App& cmd) {
        cmd.add_option("--dt0", dt0, "initial time step (forward-euler: fixed step, default 0.1)")
            ->each([this](const std::string&) { dt0_set = true; });
        cmd.add_option("--tau", tau, "convergence threshold on var")->capture_default_str();
        cmd.add_option("--mu0", mu0, "uniform initial conductivity")->capture_default_str();
        cmd.add_option("--integrator", integrator, "backward-euler | forward-euler")
            ->check(CLI::IsMember({"backward-euler", "forward-euler"}))
            ->capture_default_str();
        cmd.add_option("--pcg-tol", pcg_tol, "inner linear-solve relative tolerance")
            ->capture_default_str();
        cmd.add_option("--pcg-max-iter", pcg_max_iter, "inner linear-solve iteration cap")
            ->capture_default_str();
        cmd.add_option("--precond-refresh", precond_refresh,
                       "PCG iteration count that triggers refactorization")
            ->capture_default_str();
        cmd.add_option("--max-steps", max_steps, "time-step budget")->capture_default_str();
        cmd.add_option("--max-wall-seconds", max_wall_seconds, "wall-clock budget");
    }

    StepperConfig stepper() const {
        StepperConfig cfg;
        cfg.integrator = integrator == "forward-euler" ? Integrator::ForwardEuler
                                                       : Integrator::BackwardEuler;
        cfg.dt0 = dt0;
        if (cfg.integrator == Integrator::ForwardEuler && !dt0_set) cfg.dt0 = 0.1;
        cfg.tau = tau;
        cfg.mu0 = mu0;
        cfg.max_steps = max_steps;
        cfg.max_wall_seconds = max_wall_seconds;
        return cfg;
    }

    SolverConfig solver() const {
        SolverConfig cfg;
        cfg.linear.mode = LinearSolverHandle::Mode::PcgWithCache;
        cfg.linear.tolerance = pcg_tol;
        cfg.linear.max_iterations = pcg_max_iter;
        cfg.linear.refresh_threshold = precond_refresh;
        return cfg;
    }
};

json summarize(const BasisPursuitProblem& problem, const RunResult& result,
               const std::string& integrator) {
    const OptimalityResiduals opt = optimality_residuals(problem, result.state);
    json j;
    j["status"] = to_string(result.status);
    j["converged"] = result.status == RunStatus::Converged;
    j["steps"] = result.trace.size();
    j["final_var"] = result.trace.empty() ? json(nullptr) : json(result.trace.back().var);
    j["primal_objective"] = opt.primal_objective;
    j["dual_objective"] = opt.dual_objective;
    j["duality_gap"] = opt.duality_gap;
    j["dual_feasibility"] = opt.dual_feasibility;
    if (!result.trace.empty()) {
        j["err_dual"] = result.trace.back().err_dual;
        if (result.trace.back().err_x) j["err_x"] = *result.trace.back().err_x;
    }
    long newton_total = 0, pcg_total = 0;
    for (const StepRecord& r : result.trace) {
        newton_total += r.newton_iterations;
        pcg_total += r.pcg_iterations;
    }
    j["newton_iterations_total"] = newton_total;
    j["pcg_iterations_total"] = pcg_total;
    j["lyapunov_initial"] = result.lyapunov_initial;
    j["lyapunov_final"] =
        result.trace.empty() ? json(nullptr) : json(result.trace.back().lyapunov);
    j["wall_seconds"] = result.wall_seconds;
    j["integrator"] = integrator;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out.is_open()) throw InputError("cannot write file: " + path.string());
    out << text;
    if (!out.good()) throw InputError("write failed: " + path.string());
}

int run_solve(const std::string& manifest, const SolveFlags& flags, const fs::path& out_dir) {
    const BasisPursuitProblem problem = load_problem(manifest);
    PHYSARUM_INFO("solve: n=%ld m=%ld integrator=%s", static_cast<long>(problem.n()),
                  static_cast<long>(problem.m()), flags.integrator.c_str());
    const RunResult result = run(problem, flags.stepper(), flags.solver());
    write_text(out_dir / "trace.csv", trace_csv(result.trace));
    write_text(out_dir / "summary.json",
               summarize(problem, result, flags.integrator).dump(2) + "\n");
    PHYSARUM_INFO("solve: status=%s steps=%zu", to_string(result.status), result.trace.size());
    return result.status == RunStatus::Converged ? kExitConverged : kExitNotConverged;
}

struct BenchRow {
    int instance = 0;
    RandomBpSpec spec;
    json summary;
    double oracle_rel_gap = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
};

void run_bench_instance(const RandomBpSpec& spec, const SolveFlags& flags, const fs::path& dir,
                        bool against_oracle, BenchRow& row) {
    const BasisPursuitProblem problem = generate_random_bp(spec);
    const RunResult result = run(problem, flags.stepper(), flags.solver());
    write_text(dir / "trace.csv", trace_csv(result.trace));
    row.summary = summarize(problem, result, flags.integrator);
    row.converged = result.status == RunStatus::Converged;
    if (against_oracle) {
        const LpSolution lp = lp_solve_l1(problem);
        if (lp.status == LpSolution::Status::Optimal) {
            const double primal = row.summary["primal_objective"].get<double>();
            row.oracle_rel_gap = std::abs(primal - lp.objective) / std::abs(lp.objective);
            row.summary["oracle_objective"] = lp.objective;
            row.summary["oracle_rel_gap"] = row.oracle_rel_gap;
        }
    }
    write_text(dir / "summary.json", row.summary.dump(2) + "\n");
}

int run_bench(const std::string& suite, double scale, int threads, const SolveFlags& flags,
              const fs::path& out_dir) {
    std::vector<RandomBpSpec> specs;
    bool against_oracle = false;
    if (suite == "paper") {
        for (int i = 1; i <= 4; ++i) {
            RandomBpSpec spec = paper_suite(i);
            if (scale != 1.0) {
                spec.n = std::max<Index>(1, static_cast<Index>(std::llround(spec.n * scale)));
                spec.m = std::max<Index>(spec.n, static_cast<Index>(std::llround(spec.m * scale)));
                spec.k = std::min(spec.k, spec.m);
            }
            specs.push_back(spec);
        }
    } else if (suite == "tiny") {
        against_oracle = true;
        for (int s = 1; s <= 20; ++s) specs.push_back({10, 30, 3, static_cast<std::uint64_t>(s)});
    } else {
        throw InputError("unknown bench suite: '" + suite + "' (expected paper or tiny)");
    }

    std::vector<BenchRow> rows(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        rows[i].instance = static_cast<int>(i + 1);
        rows[i].spec = specs[i];
    }

    auto work = [&](std::size_t i) {
        run_bench_instance(specs[i], flags, out_dir / ("instance_" + std::to_string(i + 1)),
                           against_oracle, rows[i]);
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::mutex next_mutex;
        std::size_t next = 0;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lock(next_mutex);
                        if (next >= specs.size()) return;
                        i = next++;
                    }
                    work(i);
                }
            });
        }
        for (std::thread& th : pool) th.join();
    }

    std::string csv =
        "instance,n,m,k,seed,status,steps,final_var,primal_objective,duality_gap,err_x,err_dual,"
        "newton_total,pcg_total,wall_seconds,oracle_rel_gap\n";
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    bool all_converged = true;
    double max_gap = 0.0;
    for (const BenchRow& row : rows) {
        const json& s = row.summary;
        csv += std::to_string(row.instance) + ',' + std::to_string(row.spec.n) + ',' +
               std::to_string(row.spec.m) + ',' + std::to_string(row.spec.k) + ',' +
               std::to_string(row.spec.seed) + ',' + s["status"].get<std::string>() + ',' +
               std::to_string(s["steps"].get<long>()) + ',' + fmt(s["final_var"].get<double>()) +
               ',' + fmt(s["primal_objective"].get<double>()) + ',' +
               fmt(s["duality_gap"].get<double>()) + ',' +
               (s.contains("err_x") ? fmt(s["err_x"].get<double>()) : std::string()) + ',' +
               fmt(s["err_dual"].get<double>()) + ',' +
               std::to_string(s["newton_iterations_total"].get<long>()) + ',' +
               std::to_string(s["pcg_iterations_total"].get<long>()) + ',' +
               fmt(s["wall_seconds"].get<double>()) + ',' +
               (std::isnan(row.oracle_rel_gap) ? std::string() : fmt(row.oracle_rel_gap)) + '\n';
        all_converged = all_converged && row.converged;
        if (!std::isnan(row.oracle_rel_gap)) max_gap = std::max(max_gap, row.oracle_rel_gap);
    }
    write_text(out_dir / "bench.csv", csv);
    if (against_oracle)
        std::cout << "max relative objective gap vs oracle: " << max_gap << "\n";
    std::cout << "bench: " << rows.size() << " instances, "
              << (all_converged ? "all converged" : "NOT all converged") << "\n";
    return all_converged ? kExitConverged : kExitNotConverged;
}

int run_oracle(const std::string& manifest, const fs::path& out_dir) {
    const BasisPursuitProblem problem = load_problem(manifest);
    const LpSolution lp = lp_solve_l1(problem);
    json j;
    j["status"] = to_string(lp.status);
    if (lp.status == LpSolution::Status::Optimal) {
        j["objective"] = lp.objective;
        j["unique_optimum"] = lp.unique_optimum;
        j["v_opt"] = std::vector<double>(lp.v_opt.data(), lp.v_opt.data() + lp.v_opt.size());
        j["dual_u"] = std::vector<double>(lp.dual_u.data(), lp.dual_u.data() + lp.dual_u.size());
    }
    if (out_dir.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        write_text(out_dir / "oracle.json", j.dump(2) + "\n");
    }
    return lp.status == LpSolution::Status::Optimal ? kExitConverged : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physarum-dynamics solver for weighted basis-pursuit problems"};
    app.require_subcommand(1);

    // gen
    CLI::App* gen = app.add_subcommand("gen", "generate a problem bundle");
    gen->require_subcommand(1);
    CLI::App* gen_random = gen->add_subcommand("random", "random dense compressed-sensing instance");
    Index gn = 10, gm = 30, gk = 3;
    std::uint64_t gseed = 0;
    std::string gen_out = "problem";
    gen_random->add_option("--n", gn, "rows")->required();
    gen_random->add_option("--m", gm, "columns")->required();
    gen_random->add_option("--k", gk, "ground-truth sparsity")->required();
    gen_random->add_option("--seed", gseed, "generator seed")->capture_default_str();
    gen_random->add_option("--out", gen_out, "output directory")->capture_default_str();
    CLI::App* gen_graph = gen->add_subcommand("graph", "graph transshipment instance");
    Index path_nodes = 3;
    std::string graph_out = "problem";
    gen_graph->add_option("--path-nodes", path_nodes, "nodes of a unit-length path graph")
        ->required();
    gen_graph->add_option("--out", graph_out, "output directory")->capture_default_str();

    // solve
    CLI::App* solve = app.add_subcommand("solve", "run the solver on a problem bundle");
    std::string solve_manifest;
    std::string solve_out = "out";
    SolveFlags solve_flags;
    solve->add_option("manifest", solve_manifest, "path to manifest.json")->required();
    solve->add_option("--out", solve_out, "output directory")->capture_default_str();
    solve_flags.add_to(*solve);

    // bench
    CLI::App* bench = app.add_subcommand("bench", "run a benchmark suite");
    std::string suite;
    double bench_scale = 1.0;
    int bench_threads = 1;
    std::string bench_out = "bench-out";
    SolveFlags bench_flags;
    bench->add_option("--suite", suite, "paper | tiny")->required();
    bench->add_option("--scale", bench_scale, "scale factor on n and m of the paper suite")
        ->capture_default_str();
    bench->add_option("--threads", bench_threads, "parallel workers, one per instance")
        ->capture_default_str();
    bench->add_option("--out", bench_out, "output directory")->capture_default_str();
    bench_flags.add_to(*bench);

    // oracle
    CLI::App* oracle_cmd = app.add_subcommand("oracle", "LP ground truth for small instances");
    std::string oracle_manifest;
    std::string oracle_out;
    oracle_cmd->add_option("manifest", oracle_manifest, "path to manifest.json")->required();
    oracle_cmd->add_option("--out", oracle_out, "output directory (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInputError;
    }

    try {
        if (gen_random->parsed()) {
            const BasisPursuitProblem problem = generate_random_bp({gn, gm, gk, gseed});
            const auto path = save_problem(gen_out, problem, gseed, "random-bp");
            std::cout << path.string() << "\n";
            return kExitConverged;
        }
        if (gen_graph->parsed()) {
            const BasisPursuitProblem problem = generate_graph_problem(path_graph_spec(path_nodes));
            const auto path = save_problem(graph_out, problem, std::nullopt, "graph-path");
            std::cout << path.string() << "\n";
            return kExitConverged;
        }
        if (solve->parsed()) return run_solve(solve_manifest, solve_flags, solve_out);
        if (bench->parsed())
            return run_bench(suite, bench_scale, bench_threads, bench_flags, bench_out);
        if (oracle_cmd->parsed()) return run_oracle(oracle_manifest, oracle_out);
    } catch (const InputError& e) {
        json err{{"error", e.what()}};
        std::cout << err.dump() << "\n";
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const Error& e) {
        json err{{"error", e.what()}};
        std::cout << err.dump() << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return kExitNotConverged;
    }
    return kExitInputError;
}
