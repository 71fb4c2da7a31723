/**
 * @file experiments.hpp
 * @brief Named experiments: each runs solvers from a validated config and returns
 * result tables plus the invariants it asserts.
 *
 * Every runner also returns typed numbers (the *Run structs) so callers can apply
 * their own thresholds without parsing tables.
 */

#ifndef RMFBSDE_HARNESS_EXPERIMENTS_HPP
#define RMFBSDE_HARNESS_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmfbsde/analytic_oracle.hpp"
#include "rmfbsde/binomial.hpp"
#include "rmfbsde/bsde_solver.hpp"
#include "rmfbsde/forward_sde.hpp"
#include "rmfbsde/harness/config.hpp"
#include "rmfbsde/harness/result_table.hpp"
#include "rmfbsde/particle_system.hpp"
#include "rmfbsde/pde_obstacle.hpp"
#include "rmfbsde/penalization.hpp"
#include "rmfbsde/problems.hpp"
#include "rmfbsde/validate.hpp"

namespace rmf::harness {

struct NamedInvariants {
    std::string label;
    ReflectionInvariants invariants;
};

/// Common part of every run: the generic result plus the reflected solves it performed.
struct RunBase {
    ExperimentResult result;
    std::vector<NamedInvariants> reflections;
};

struct MeanCurveRun : RunBase {
    std::vector<double> times, mean_y, se, oracle, relative_error;
    double max_relative_error = 0.0;
};

struct CounterexampleRun : RunBase {
    CounterexampleReport report;
};

struct SolveRun : RunBase {
    double y0 = 0.0;
    double reference = std::nan("");  ///< binomial price or exact value when known
    double relative_error = std::nan("");
    double deterministic_sup_error = std::nan("");
};

struct PenalizationRun : RunBase {
    PenalizationReport report;
    double ode_limit_distance = std::nan("");   ///< deterministic case: sup |Y^n_max - (1 - t)|
    double ode_oracle_distance = std::nan("");  ///< deterministic case: sup |Y^n_max - RK oracle|
};

struct ParticleRun : RunBase {
    ConvergenceReport report;
};

struct PdeLevel {
    std::size_t steps = 0, intervals = 0, particles = 0, mc_particles = 0;
    ComparisonReport comparison;
    bool valid = true;
    double clamp_share = 0.0;
};

struct PdeCompareRun : RunBase {
    std::vector<PdeLevel> levels;
};

struct LipschitzRun : RunBase {
    LipschitzReport report;
};

struct ZeroDriverRun : RunBase {
    double y0 = 0.0, mean_xi = 0.0, se_xi = 0.0;
    double max_reflected_gap = 0.0;  ///< sup |Y_reflected - Y_free| over both non-binding cases
    double max_k = 0.0;
};

namespace detail {

inline ExperimentResult start(const ExperimentConfig& cfg) {
    ExperimentResult r;
    r.experiment = cfg.experiment;
    r.seed = cfg.seed;
    return r;
}

inline ParticleConfig particle_config(const ExperimentConfig& cfg) {
    ParticleConfig pc;
    pc.solver = cfg.solver();
    pc.pooled_regression = cfg.pooled_regression;
    pc.threads = cfg.threads;
    return pc;
}

inline void record_reflection(RunBase& run, const std::string& label, const ReflectionInvariants& inv,
                              const ExperimentConfig& cfg) {
    auto& c = run.result.checks;
    c.push_back(check_ge(label + ": min(Y - h)", inv.min_obstacle_gap, 0.0));
    c.push_back(check_true(label + ": K_0 = 0", inv.k_starts_at_zero));
    c.push_back(check_true(label + ": K nondecreasing", inv.k_nondecreasing));
    c.push_back(check_true(label + ": Y_T = xi", inv.terminal_exact));
    c.push_back(check_le(label + ": Skorokhod sum / (1 + K_T)", inv.max_skorokhod, cfg.tol_skorokhod));
    c.push_back(check_le(label + ": martingale |mean| / SE", inv.max_martingale_ratio, cfg.se_multiplier));
    run.reflections.push_back({label, inv});
}

inline ResultTable reflection_table(const std::vector<NamedInvariants>& list) {
    ResultTable t("reflection_invariants",
                  {"solve", "min_obstacle_gap", "k0_zero", "k_nondecreasing", "max_skorokhod", "max_martingale_ratio"});
    for (const auto& r : list) {
        const auto& v = r.invariants;
        t.add({r.label, v.min_obstacle_gap, static_cast<long long>(v.k_starts_at_zero),
               static_cast<long long>(v.k_nondecreasing), v.max_skorokhod, v.max_martingale_ratio});
    }
    return t;
}

/// Law ensemble of a problem: grid, noise stream (seed, 0) and self-interacting paths.
struct LawEnsemble {
    TimeGrid grid;
    NoiseEnsemble noise;
    PathEnsemble X;
};

inline LawEnsemble law_ensemble(const MfProblem& pr, std::size_t steps, std::size_t particles, RngSeed seed,
                                std::size_t threads) {
    const TimeGrid grid = make_grid(pr.horizon, static_cast<long long>(steps));
    NoiseEnsemble noise = sample_brownian(grid, particles, pr.noise_dim, seed, threads);
    PathEnsemble X = simulate_law_ensemble(pr, grid, noise, threads);
    return {grid, std::move(noise), std::move(X)};
}

inline StepRule rule_from(const ExperimentConfig& cfg) {
    if (cfg.rule == "reflect") return StepRule::reflect();
    if (cfg.rule == "penalize") return StepRule::penalize(cfg.penalty);
    return StepRule::free();
}

inline double sample_se(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
}

inline ResultTable grid_function_table(const GridFunction& u, const std::string& name) {
    ResultTable t(name, {"t", "x", "u"});
    const auto& g = u.grid();
    for (std::size_t i = 0; i < g.time().nodes(); ++i) {
        for (std::size_t j = 0; j < g.points(); ++j) t.add({g.time().time(i), g.x(j), u(i, j)});
    }
    return t;
}

inline void require_problem(const ExperimentConfig& cfg, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (cfg.problem == a) return;
    }
    std::string list;
    for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    throw std::invalid_argument("experiment '" + cfg.experiment + "' supports problem(s): " + list + " (got '" +
                                cfg.problem + "')");
}

}  // namespace detail

/// Mean curve of the interacting example (N = 1, two universes) against the closed form.
inline MeanCurveRun run_example31(const ExperimentConfig& cfg) {
    detail::require_problem(cfg, {"example31"});
    MeanCurveRun run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    const TimeGrid grid = make_grid(pr.horizon, static_cast<long long>(cfg.steps));
    const std::size_t S = std::max<std::size_t>(cfg.particles / 2, 1);
    const NoiseEnsemble noise = universe_noise(grid, 2, S, 1, RngSeed{cfg.seed, 0}, cfg.threads);
    const ParticleSystemSolution ps = solve_rbsde_n(pr, 1, noise, detail::particle_config(cfg));

    ResultTable t("mean_curve", {"t", "mean_y", "se", "oracle", "relative_error"});
    for (double tt : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        const std::size_t i = grid.index_of(tt);
        const double m = ps.mean_y(i);
        const double se = detail::sample_se(ps.solution().y_row(i));
        const double o = oracle::expected_y(tt);
        const double rel = std::abs(m - o) / std::abs(o);
        run.times.push_back(tt);
        run.mean_y.push_back(m);
        run.se.push_back(se);
        run.oracle.push_back(o);
        run.relative_error.push_back(rel);
        run.max_relative_error = std::max(run.max_relative_error, rel);
        t.add({tt, m, se, o, rel});
        char label[64];
        std::snprintf(label, sizeof label, "relative error of E[Y_t] at t = %.2f", tt);
        run.result.checks.push_back(check_le(label, rel, cfg.tol_relative));
    }
    run.result.tables.push_back(std::move(t));
    detail::record_reflection(run, "example31 particle system",
                              check_reflection(pr, ps.paths(), ps.solution(), ps.terminal()), cfg);
    run.result.tables.push_back(detail::reflection_table(run.reflections));
    return run;
}

inline CounterexampleRun run_counterexample(const ExperimentConfig& cfg) {
    detail::require_problem(cfg, {"example31"});
    CounterexampleRun run;
    run.result = detail::start(cfg);
    const TimeGrid grid = make_grid(oracle::kHorizon, static_cast<long long>(cfg.steps));
    run.report = comparison_counterexample(cfg.particles, grid, RngSeed{cfg.seed, 0}, detail::particle_config(cfg));
    const auto& r = run.report;

    ResultTable p("probability", {"quantity", "estimate", "se", "analytic"});
    p.add({std::string("P{Y_1 < 0}"), r.p_y1_negative, r.p_y1_negative_se, r.analytic_probability});
    p.add({std::string("max |(Y', Z', K')| for zero data"), r.max_abs_zero_solution, 0.0, 0.0});
    p.add({std::string("max node share of Y' > Y"), r.ordering.max_violation_fraction, 0.0, std::nan("")});
    run.result.tables.push_back(std::move(p));
    ResultTable m("mean_curve", {"t", "mean_y", "oracle"});
    for (std::size_t k = 0; k < r.times.size(); ++k) m.add({r.times[k], r.mean_y[k], r.oracle_mean_y[k]});
    run.result.tables.push_back(std::move(m));

    auto& c = run.result.checks;
    c.push_back(check_le("|P{Y_1 < 0} - analytic|", std::abs(r.p_y1_negative - r.analytic_probability),
                         cfg.tol_probability));
    c.push_back(check_ge("P{Y_1 < 0}", r.p_y1_negative, cfg.min_violation_probability));
    c.push_back(check_true("zero data gives Y' = Z' = K' = 0 exactly", r.zero_solution_exact));
    return run;
}

inline SolveRun run_solve(const ExperimentConfig& cfg) {
    SolveRun run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    const StepRule rule = detail::rule_from(cfg);
    if (rule.kind != StepRule::Kind::free && !pr.has_obstacle()) {
        throw std::invalid_argument("solve: rule '" + cfg.rule + "' needs a problem with an obstacle");
    }
    const auto law = detail::law_ensemble(pr, cfg.steps, cfg.particles, RngSeed{cfg.seed, 0}, cfg.threads);
    const BackwardSolution sol = solve_mean_field(pr, law.X, law.noise, rule, cfg.solver());
    run.y0 = sol.mean_y(0);

    ResultTable path("path", {"t", "mean_y", "mean_k"});
    for (std::size_t i = 0; i < law.grid.nodes(); ++i) path.add({law.grid.time(i), sol.mean_y(i), sol.mean_k(i)});
    run.result.tables.push_back(std::move(path));

    ResultTable s("solution", {"quantity", "value"});
    s.add({std::string("mean Y_0"), run.y0});
    s.add({std::string("mean K_T"), sol.mean_k(law.grid.steps())});
    s.add({std::string("picard_sweeps"), static_cast<long long>(sol.diagnostics.picard_sweeps)});
    if (pr.name == "american_put") {
        oracle::PutParams pp{cfg.params.strike, cfg.params.rate, cfg.params.vol, cfg.params.spot,
                             cfg.params.maturity, 2000};
        run.reference = oracle::binomial_american_put(pp);
        run.relative_error = std::abs(run.y0 - run.reference) / run.reference;
        s.add({std::string("binomial_2000"), run.reference});
        s.add({std::string("relative_error"), run.relative_error});
        if (rule.kind == StepRule::Kind::reflect) {
            run.result.checks.push_back(
                check_le("relative error against the binomial tree", run.relative_error, cfg.tol_price));
        }
    }
    if (pr.name == "deterministic_obstacle" && rule.kind == StepRule::Kind::reflect) {
        double e = 0.0;
        for (std::size_t i = 0; i < law.grid.nodes(); ++i) {
            e = std::max(e, std::abs(sol.mean_y(i) - (1.0 - law.grid.time(i))));
        }
        run.deterministic_sup_error = e;
        run.reference = 1.0;
        s.add({std::string("sup |Y - (1 - t)|"), e});
        run.result.checks.push_back(check_le("sup |Y_t - (1 - t)|", e, cfg.tol_deterministic));
    }
    run.result.tables.push_back(std::move(s));
    if (rule.kind == StepRule::Kind::reflect) {
        const auto xi = terminal_values(pr, law.X, law.X);
        detail::record_reflection(run, pr.name + " reflected solve", check_reflection(pr, law.X, sol, xi), cfg);
        run.result.tables.push_back(detail::reflection_table(run.reflections));
    }
    return run;
}

inline PenalizationRun run_penalization(const ExperimentConfig& cfg) {
    PenalizationRun run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    if (!pr.has_obstacle()) throw std::invalid_argument("converge-penalization: problem has no obstacle");
    const auto law = detail::law_ensemble(pr, cfg.steps, cfg.particles, RngSeed{cfg.seed, 0}, cfg.threads);
    const SolverConfig sc = cfg.solver();
    run.report = penalization_sweep(pr, cfg.n_list, law.X, law.noise, sc, cfg.se_multiplier);
    const auto& rep = run.report;

    ResultTable lv("levels", {"n", "distance", "distance_all_nodes", "k_terminal_mean", "k_distance",
                              "monotonicity_violation", "monotonicity_worst_node", "picard_sweeps"});
    for (const auto& l : rep.levels) {
        lv.add({l.n, l.distance, l.distance_all_nodes, l.k_terminal_mean, l.k_distance, l.monotonicity_violation,
                l.monotonicity_worst_node, static_cast<long long>(l.picard_sweeps)});
    }
    run.result.tables.push_back(std::move(lv));
    ResultTable pm("probe_means", {"level", "t", "mean_y"});
    for (std::size_t k = 0; k < rep.probe_times.size(); ++k) {
        pm.add({std::string("reflected"), rep.probe_times[k], rep.reference_probe_mean_y[k]});
    }
    for (const auto& l : rep.levels) {
        for (std::size_t k = 0; k < rep.probe_times.size(); ++k) {
            pm.add({"n=" + format_cell(l.n), rep.probe_times[k], l.probe_mean_y[k]});
        }
    }
    run.result.tables.push_back(std::move(pm));

    auto& c = run.result.checks;
    c.push_back(check_true("probe distance strictly decreasing in n", rep.distances_strictly_decreasing()));
    c.push_back(check_le("distance at the largest n", rep.levels.back().distance, cfg.tol_distance));
    c.push_back(check_le("share of Y^n > Y^{n'} + 3 SE", rep.max_monotonicity_violation(), cfg.tol_monotone));

    if (pr.name == "deterministic_obstacle") {
        const double n = cfg.n_list.back();
        const BackwardSolution pen = solve_penalized(pr, n, law.X, law.noise, sc);
        const std::vector<double> times = law.grid.times();
        const std::vector<double> ode = oracle::penalized_obstacle_ode(n, times);
        ResultTable od("ode_oracle", {"t", "y_numeric", "y_ode", "y_limit"});
        double dl = 0.0, dor = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double y = pen.mean_y(i);
            dl = std::max(dl, std::abs(y - (1.0 - times[i])));
            dor = std::max(dor, std::abs(y - ode[i]));
            od.add({times[i], y, ode[i], 1.0 - times[i]});
        }
        run.ode_limit_distance = dl;
        run.ode_oracle_distance = dor;
        run.result.tables.push_back(std::move(od));
        c.push_back(check_le("sup |Y^n - (1 - t)| at the largest n", dl, cfg.tol_deterministic));
        c.push_back(check_le("sup |Y^n - ODE oracle| at the largest n", dor, cfg.tol_deterministic));
    }

    const BackwardSolution ref = solve_reflected(pr, law.X, law.noise, sc);
    const auto xi = terminal_values(pr, law.X, law.X);
    detail::record_reflection(run, pr.name + " reflected reference", check_reflection(pr, law.X, ref, xi), cfg);
    run.result.tables.push_back(detail::reflection_table(run.reflections));
    return run;
}

inline ParticleRun run_particles(const ExperimentConfig& cfg) {
    ParticleRun run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    const auto law = detail::law_ensemble(pr, cfg.steps, cfg.reference_particles, RngSeed{cfg.seed, 0}, cfg.threads);
    const SolverConfig sc = cfg.solver();
    const BackwardSolution ref = pr.has_obstacle() ? solve_reflected(pr, law.X, law.noise, sc)
                                                   : solve_bsde(pr, law.X, law.noise, sc);
    if (pr.has_obstacle()) {
        const auto xi = terminal_values(pr, law.X, law.X);
        detail::record_reflection(run, pr.name + " mean-field reference", check_reflection(pr, law.X, ref, xi), cfg);
    }
    ConvergenceConfig cc;
    cc.n_list = cfg.interaction_sizes;
    cc.budget = cfg.budget;
    cc.min_sub_size = cfg.min_sub_size;
    cc.seed = RngSeed{cfg.seed, 1000};
    cc.particle = detail::particle_config(cfg);
    run.report = convergence_study(pr, law.X, ref, cc);
    const auto& rep = run.report;

    ResultTable rows("errors", {"N", "sub_size", "y_error", "k_error", "mean_y0", "limit_mean_y0"});
    for (const auto& r : rep.rows) {
        rows.add({static_cast<long long>(r.N), static_cast<long long>(r.sub_size), r.y_error, r.k_error, r.mean_y0,
                  r.limit_mean_y0});
    }
    run.result.tables.push_back(std::move(rows));
    ResultTable probes("probe_errors", {"N", "t", "rms_gap"});
    for (const auto& r : rep.rows) {
        for (std::size_t k = 0; k < rep.probe_nodes.size(); ++k) {
            probes.add({static_cast<long long>(r.N), law.grid.time(rep.probe_nodes[k]), r.probe_rms[k]});
        }
    }
    run.result.tables.push_back(std::move(probes));
    ResultTable rate("rate", {"slope", "ci95_low", "ci95_high"});
    rate.add({rep.rate, rep.rate_ci_low, rep.rate_ci_high});
    run.result.tables.push_back(std::move(rate));

    auto& c = run.result.checks;
    c.push_back(check_true("Y error strictly decreasing in N", rep.strictly_decreasing()));
    const double ratio = rep.rows.back().y_error / rep.rows.front().y_error;
    c.push_back(check_le("error(N_max) / error(N_min)", ratio, 1.0 / cfg.tol_rate_factor));
    run.result.notes.push_back("empirical rate " + format_cell(rep.rate) + " (95% CI " + format_cell(rep.rate_ci_low) +
                               ", " + format_cell(rep.rate_ci_high) + "), reported only");
    run.result.tables.push_back(detail::reflection_table(run.reflections));
    return run;
}

inline PdeCompareRun run_pde_compare(const ExperimentConfig& cfg) {
    PdeCompareRun run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    PdeConfig pc;
    pc.scheme = cfg.pde_scheme == "explicit" ? DiffusionScheme::explicit_euler : DiffusionScheme::implicit;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : cfg.probes) {
        lo = std::min(lo, p.x);
        hi = std::max(hi, p.x);
    }
    ResultTable probes("probes", {"level", "steps", "intervals", "t", "x", "u_fd", "y_mc", "se", "gap"});
    ResultTable levels("levels", {"level", "steps", "intervals", "particles", "mc_particles", "max_gap", "max_se",
                                  "clamp_share", "valid"});
    std::size_t scale = 1;
    for (std::size_t k = 0; k < cfg.refinements; ++k, scale *= 2) {
        PdeLevel L;
        L.steps = cfg.steps * scale;
        L.intervals = cfg.pde_intervals * scale;
        L.particles = cfg.particles * scale * scale;
        L.mc_particles = cfg.mc_particles * scale * scale;
        const auto law = detail::law_ensemble(pr, L.steps, L.particles, RngSeed{cfg.seed, 0}, cfg.threads);
        const SolverConfig sc = cfg.solver();
        const StepRule rule = pr.has_obstacle() ? StepRule::reflect() : StepRule::free();
        const BackwardSolution law_sol = solve_mean_field(pr, law.X, law.noise, rule, sc);
        if (pr.has_obstacle()) {
            const auto xi = terminal_values(pr, law.X, law.X);
            detail::record_reflection(run, "law solve, level " + std::to_string(k),
                                      check_reflection(pr, law.X, law_sol, xi), cfg);
        }
        const SpaceTimeGrid sg = default_space_grid(pr, law.X, L.intervals, lo, hi);
        const GridFunction u = solve_nonlocal_pde(pr, rule, sg, law.X, pc);
        McConfig mc;
        mc.particles = L.mc_particles;
        mc.seed = RngSeed{cfg.seed, 500};
        mc.solver = sc;
        mc.threads = cfg.threads;
        L.comparison = compare_with_probabilistic(u, pr, law.X, law_sol, cfg.probes, mc);
        L.valid = u.valid;
        L.clamp_share = static_cast<double>(u.clamped_evaluations) /
                        static_cast<double>(std::max<std::size_t>(u.law_evaluations, 1));
        for (const auto& r : L.comparison.rows) {
            probes.add({static_cast<long long>(k), static_cast<long long>(L.steps), static_cast<long long>(L.intervals),
                        r.probe.t, r.probe.x, r.u_fd, r.y_mc, r.se, r.gap});
        }
        levels.add({static_cast<long long>(k), static_cast<long long>(L.steps), static_cast<long long>(L.intervals),
                    static_cast<long long>(L.particles), static_cast<long long>(L.mc_particles),
                    L.comparison.max_gap, L.comparison.max_se, L.clamp_share,
                    std::string(L.valid ? "true" : "false")});
        run.result.checks.push_back(check_true("level " + std::to_string(k) + " PDE run valid (clamps)", L.valid));
        run.result.checks.push_back(
            check_le("level " + std::to_string(k) + " max probe gap", L.comparison.max_gap, cfg.tol_gap));
        if (k + 1 == cfg.refinements) run.result.tables.push_back(detail::grid_function_table(u, "u_finest"));
        run.levels.push_back(std::move(L));
    }
    bool shrinking = true;
    for (std::size_t k = 1; k < run.levels.size(); ++k) {
        shrinking = shrinking && run.levels[k].comparison.max_gap < run.levels[k - 1].comparison.max_gap;
    }
    run.result.checks.push_back(check_true("max probe gap shrinks at every refinement", shrinking));
    run.result.tables.push_back(std::move(probes));
    run.result.tables.push_back(std::move(levels));
    run.result.tables.push_back(detail::reflection_table(run.reflections));
    return run;
}

inline LipschitzRun run_pde_lipschitz(const ExperimentConfig& cfg) {
    LipschitzRun run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    PdeConfig pc;
    pc.scheme = cfg.pde_scheme == "explicit" ? DiffusionScheme::explicit_euler : DiffusionScheme::implicit;
    const auto law = detail::law_ensemble(pr, cfg.steps, cfg.particles, RngSeed{cfg.seed, 0}, cfg.threads);
    const SpaceTimeGrid sg = default_space_grid(pr, law.X, cfg.pde_intervals);
    run.report = lipschitz_report(pr, cfg.n_list, sg, law.X, pc, cfg.tol_scheme);
    const auto& rep = run.report;
    ResultTable t("levels", {"n", "lipschitz", "monotone_violation"});
    double worst = 0.0;
    for (std::size_t k = 0; k < rep.n_list.size(); ++k) {
        t.add({rep.n_list[k], rep.lipschitz[k], rep.monotone_violation[k]});
        if (k > 0) worst = std::max(worst, rep.monotone_violation[k]);
    }
    run.result.tables.push_back(std::move(t));
    run.result.checks.push_back(check_le("max L_n / min L_n", rep.ratio, cfg.tol_lipschitz_ratio));
    run.result.checks.push_back(check_le("share of nodes with u_n > u_{n'} + tol", worst, cfg.tol_monotone));
    return run;
}

/// Reflected solves of every named problem with an obstacle, plus the interacting example.
inline RunBase run_reflection_invariants(const ExperimentConfig& cfg) {
    RunBase run;
    run.result = detail::start(cfg);
    const SolverConfig sc = cfg.solver();
    for (const auto& name : problem_names()) {
        const MfProblem pr = make_named_problem(name, cfg.params);
        if (!pr.has_obstacle()) continue;
        const auto law = detail::law_ensemble(pr, cfg.steps, cfg.particles, RngSeed{cfg.seed, 0}, cfg.threads);
        const BackwardSolution sol = solve_reflected(pr, law.X, law.noise, sc);
        const auto xi = terminal_values(pr, law.X, law.X);
        detail::record_reflection(run, name + " reflected solve", check_reflection(pr, law.X, sol, xi), cfg);
    }
    const MfProblem ex = example31_problem();
    const TimeGrid grid = make_grid(ex.horizon, static_cast<long long>(cfg.steps));
    const std::size_t S = std::max<std::size_t>(cfg.particles / 2, 1);
    const ParticleSystemSolution ps =
        solve_rbsde_n(ex, 1, S, grid, RngSeed{cfg.seed, 0}, detail::particle_config(cfg));
    detail::record_reflection(run, "example31 particle system",
                              check_reflection(ex, ps.paths(), ps.solution(), ps.terminal()), cfg);
    run.result.tables.push_back(detail::reflection_table(run.reflections));
    return run;
}

inline ZeroDriverRun run_zero_driver(const ExperimentConfig& cfg) {
    detail::require_problem(cfg, {"benchmark_reflected_mf"});
    ZeroDriverRun run;
    run.result = detail::start(cfg);
    const SolverConfig sc = cfg.solver();
    const MfProblem free_pr = benchmark_zero_driver();
    const auto law = detail::law_ensemble(free_pr, cfg.steps, cfg.particles, RngSeed{cfg.seed, 0}, cfg.threads);
    const BackwardSolution sol = solve_bsde(free_pr, law.X, law.noise, sc);
    const auto xi = terminal_values(free_pr, law.X, law.X);
    for (double v : xi) run.mean_xi += v;
    run.mean_xi /= static_cast<double>(xi.size());
    run.se_xi = detail::sample_se(xi);
    run.y0 = sol.mean_y(0);

    ResultTable t("identities", {"case", "quantity", "value"});
    t.add({std::string("g = 0, no obstacle"), std::string("mean Y_0"), run.y0});
    t.add({std::string("g = 0, no obstacle"), std::string("mean xi"), run.mean_xi});
    t.add({std::string("g = 0, no obstacle"), std::string("se(xi)"), run.se_xi});
    run.result.checks.push_back(
        check_le("|Y_0 - mean(xi)| / se(xi)", std::abs(run.y0 - run.mean_xi) / run.se_xi, cfg.se_multiplier));

    constexpr double kLevel = -10.0;
    auto pathwise = [&](const std::string& label, const MfProblem& with, const MfProblem& without) {
        const BackwardSolution a = solve_reflected(with, law.X, law.noise, sc);
        const BackwardSolution b = solve_bsde(without, law.X, law.noise, sc);
        double gap = 0.0, kmax = 0.0;
        for (std::size_t k = 0; k < a.y_all().size(); ++k) gap = std::max(gap, std::abs(a.y_all()[k] - b.y_all()[k]));
        for (double v : a.k_all()) kmax = std::max(kmax, std::abs(v));
        run.max_reflected_gap = std::max(run.max_reflected_gap, gap);
        run.max_k = std::max(run.max_k, kmax);
        t.add({label, std::string("sup |Y_reflected - Y_free|"), gap});
        t.add({label, std::string("sup K"), kmax});
        run.result.checks.push_back(check_le(label + ": sup |Y_reflected - Y_free|", gap, 0.0));
        run.result.checks.push_back(check_le(label + ": sup K", kmax, 0.0));
        const auto xw = terminal_values(with, law.X, law.X);
        detail::record_reflection(run, label, check_reflection(with, law.X, a, xw), cfg);
    };
    pathwise("g = 0, obstacle at -10", benchmark_zero_driver(kLevel), free_pr);
    pathwise("benchmark driver, obstacle at -10", benchmark_with_flat_obstacle(kLevel), [] {
        MfProblem p = benchmark_reflected_mf();
        p.obstacle.reset();
        return p;
    }());
    run.result.tables.push_back(std::move(t));
    run.result.tables.push_back(detail::reflection_table(run.reflections));
    return run;
}

inline RunBase run_oracle(const ExperimentConfig& cfg) {
    detail::require_problem(cfg, {"example31"});
    RunBase run;
    run.result = detail::start(cfg);
    const auto k = oracle::example31_constants();
    ResultTable t("oracle", {"quantity", "value"});
    t.add({std::string("horizon"), k.horizon});
    t.add({std::string("e_xi"), k.e_xi});
    t.add({std::string("threshold"), k.threshold});
    t.add({std::string("violation_probability"), k.violation_prob});
    for (double tt : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        char label[48];
        std::snprintf(label, sizeof label, "expected_y(%.1f)", tt);
        t.add({std::string(label), oracle::expected_y(tt)});
    }
    t.add({std::string("series_remainder(t=0,depth=10,C=1)"), oracle::series_mean_remainder_bound(0.0, 10, 1.0)});
    run.result.tables.push_back(std::move(t));
    return run;
}

inline RunBase run_validate(const ExperimentConfig& cfg) {
    RunBase run;
    run.result = detail::start(cfg);
    const MfProblem pr = make_named_problem(cfg.problem, cfg.params);
    const TimeGrid grid = make_grid(pr.horizon, static_cast<long long>(cfg.steps));
    const NoiseEnsemble noise = sample_brownian(grid, cfg.particles, pr.noise_dim, RngSeed{cfg.seed, 0}, cfg.threads);
    const ValidationReport rep = validate(pr, noise);
    ResultTable t("coefficients",
                  {"coefficient", "declared_lipschitz", "empirical_lipschitz", "ok", "max_abs_moderate", "max_abs_extreme"});
    for (const auto& c : rep.coefficients) {
        t.add({c.name, c.declared_lipschitz, c.empirical_lipschitz, std::string(c.lipschitz_ok ? "true" : "false"),
               c.max_abs_moderate, c.max_abs_extreme});
    }
    run.result.tables.push_back(std::move(t));
    ResultTable s("compatibility", {"quantity", "value"});
    s.add({std::string("samples"), static_cast<long long>(rep.samples)});
    s.add({std::string("pair_violations"), static_cast<long long>(rep.compatibility_violations)});
    s.add({std::string("mean_violations"), static_cast<long long>(rep.mean_compatibility_violations)});
    s.add({std::string("worst_gap"), rep.worst_compatibility_gap});
    run.result.tables.push_back(std::move(s));
    for (const auto& c : rep.coefficients) {
        run.result.checks.push_back(check_true(c.name + " within declared Lipschitz bound", c.lipschitz_ok));
    }
    run.result.checks.push_back(check_true("boundedness claim", rep.bounded_ok));
    run.result.checks.push_back(check_true("monotone in y~ claim", rep.monotone_in_ytilde_ok));
    run.result.checks.push_back(check_le("obstacle above terminal (pairs)",
                                         static_cast<double>(rep.compatibility_violations), 0.0));
    run.result.notes = rep.failures;
    return run;
}

/// Dispatches on cfg.experiment and records the wall time.
inline ExperimentResult run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult res;
    const std::string& e = cfg.experiment;
    if (e == "example31") res = run_example31(cfg).result;
    else if (e == "example31-counterexample") res = run_counterexample(cfg).result;
    else if (e == "solve") res = run_solve(cfg).result;
    else if (e == "converge-penalization") res = run_penalization(cfg).result;
    else if (e == "converge-particles") res = run_particles(cfg).result;
    else if (e == "pde-compare") res = run_pde_compare(cfg).result;
    else if (e == "pde-lipschitz") res = run_pde_lipschitz(cfg).result;
    else if (e == "reflection-invariants") res = run_reflection_invariants(cfg).result;
    else if (e == "zero-driver") res = run_zero_driver(cfg).result;
    else if (e == "oracle") res = run_oracle(cfg).result;
    else if (e == "validate-problem") res = run_validate(cfg).result;
    else {
        std::string list;
        for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown experiment '" + e + "'; valid names: " + list);
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace rmf::harness

#endif  // RMFBSDE_HARNESS_EXPERIMENTS_HPP
