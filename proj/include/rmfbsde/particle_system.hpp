/**
 * @file particle_system.hpp
 * @brief Interacting (N+1)-universe reflected system and its convergence to the mean-field limit.
 *
 * Universe j (j = 0..N) owns S particles driven by its own noise stream. Particle p
 * of universe j interacts with particle p of the universes j+1, ..., j+N (mod N+1):
 * every mean-field argument is replaced by the average over these N neighbours.
 * Storage is universe-major inside each node: global index j*S + p.
 */

#ifndef RMFBSDE_PARTICLE_SYSTEM_HPP
#define RMFBSDE_PARTICLE_SYSTEM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "rmfbsde/analytic_oracle.hpp"
#include "rmfbsde/bsde_solver.hpp"
#include "rmfbsde/forward_sde.hpp"
#include "rmfbsde/problems.hpp"
#include "rmfbsde/random.hpp"

namespace rmf {

struct ParticleConfig {
    SolverConfig solver = [] {
        SolverConfig c;
        c.theta = 0.5;
        c.inner_iterations = 2;
        return c;
    }();
    /// Regress on all universes jointly (they are exchangeable); false = one fit per universe.
    bool pooled_regression = true;
    std::size_t threads = 1;
};

/// max(budget / (N+1), floor) particles per universe.
inline std::size_t default_sub_ensemble(std::size_t N, std::size_t budget = 10000, std::size_t floor = 500) {
    return std::max(budget / (N + 1), floor);
}

/// Universe j uses stream seed.stream_id + j; the result is universe-major.
inline NoiseEnsemble universe_noise(const TimeGrid& grid, std::size_t universes, std::size_t sub_size,
                                    std::size_t dim, RngSeed seed, std::size_t threads = 1) {
    std::vector<NoiseEnsemble> parts;
    parts.reserve(universes);
    for (std::size_t j = 0; j < universes; ++j) {
        parts.push_back(sample_brownian(grid, sub_size, dim, RngSeed{seed.seed, seed.stream_id + j}, threads));
    }
    return concatenate(parts);
}

namespace detail {

/**
 * out[(j*S+p)*od + k] = (1/N) sum_{k'=1..N} c(view(j,p), view(j+k' mod U, p))_k.
 * Separable coefficients use feature totals over universes, minus the own term.
 */
template <class View, class ViewAt>
void neighbor_average(const MeanFieldCoefficient<View>& c, std::size_t U, std::size_t S, ViewAt&& view_at,
                      bool force_pairwise, std::vector<double>& out) {
    const std::size_t od = c.out_dim;
    const std::size_t N = U - 1;
    out.assign(U * S * od, 0.0);
    if (c.separable() && !force_pairwise) {
        const std::size_t fd = c.feature_dim;
        std::vector<double> feats(U * S * fd), total(S * fd, 0.0), mean(fd);
        if (fd > 0) {
            for (std::size_t j = 0; j < U; ++j) {
                for (std::size_t p = 0; p < S; ++p) {
                    const std::span<double> f(feats.data() + (j * S + p) * fd, fd);
                    c.features(view_at(j, p), f);
                    for (std::size_t k = 0; k < fd; ++k) total[p * fd + k] += f[k];
                }
            }
        }
        for (std::size_t j = 0; j < U; ++j) {
            for (std::size_t p = 0; p < S; ++p) {
                for (std::size_t k = 0; k < fd; ++k) {
                    mean[k] = (total[p * fd + k] - feats[(j * S + p) * fd + k]) / static_cast<double>(N);
                }
                c.combine(view_at(j, p), mean, std::span<double>(out.data() + (j * S + p) * od, od));
            }
        }
        return;
    }
    std::vector<double> tmp(od);
    for (std::size_t j = 0; j < U; ++j) {
        for (std::size_t p = 0; p < S; ++p) {
            const View own = view_at(j, p);
            const std::span<double> acc(out.data() + (j * S + p) * od, od);
            for (std::size_t k = 1; k <= N; ++k) {
                c.pairwise(own, view_at((j + k) % U, p), tmp);
                for (std::size_t m = 0; m < od; ++m) acc[m] += tmp[m];
            }
            for (std::size_t m = 0; m < od; ++m) acc[m] /= static_cast<double>(N);
        }
    }
}

}  // namespace detail

/// Forward Euler for the interacting universes (neighbour-averaged coefficients).
inline PathEnsemble simulate_particle_universes(const MfProblem& problem, const TimeGrid& grid, std::size_t N,
                                                const NoiseEnsemble& noise, bool force_pairwise = false) {
    detail::check_noise(problem, grid, noise);
    const std::size_t U = N + 1;
    if (noise.particles() % U != 0) throw std::invalid_argument("simulate_particle_universes: P not divisible by N+1");
    const std::size_t S = noise.particles() / U;
    const std::size_t n = problem.state_dim;
    const std::size_t d = problem.noise_dim;
    const double dt = grid.dt();
    PathEnsemble X(grid, U * S, n, 0, false);
    for (std::size_t q = 0; q < U * S; ++q) std::copy(problem.x0.begin(), problem.x0.end(), X.point(0, q).begin());
    std::vector<double> b, s;
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        const double t = grid.time(i);
        auto view = [&](std::size_t j, std::size_t p) { return StateView{t, X.point(i, j * S + p)}; };
        detail::neighbor_average(problem.drift, U, S, view, force_pairwise, b);
        detail::neighbor_average(problem.diffusion, U, S, view, force_pairwise, s);
        for (std::size_t q = 0; q < U * S; ++q) {
            const auto x = X.point(i, q);
            auto next = X.point(i + 1, q);
            const auto dw = noise.increments(i, q);
            for (std::size_t k = 0; k < n; ++k) {
                double v = x[k] + b[q * n + k] * dt;
                for (std::size_t l = 0; l < d; ++l) v += s[(q * n + k) * d + l] * dw[l];
                if (!std::isfinite(v)) throw numerical_blowup("particle system: non-finite state", i + 1);
                next[k] = v;
            }
        }
    }
    return X;
}

struct ExchangeabilityReport {
    std::size_t node = 0;
    std::vector<double> universe_mean;
    std::vector<double> universe_se;
    double max_ratio = 0.0;  ///< max_j |mean_j - mean_0| / sqrt(se_j^2 + se_0^2)
};

class ParticleSystemSolution {
public:
    ParticleSystemSolution(std::size_t N, std::size_t sub_size, PathEnsemble X, BackwardSolution sol,
                           std::vector<double> xi)
        : N_(N), sub_(sub_size), X_(std::move(X)), sol_(std::move(sol)), xi_(std::move(xi)) {}

    std::size_t interaction_size() const noexcept { return N_; }
    std::size_t universes() const noexcept { return N_ + 1; }
    std::size_t sub_size() const noexcept { return sub_; }
    const PathEnsemble& paths() const noexcept { return X_; }
    const BackwardSolution& solution() const noexcept { return sol_; }
    std::span<const double> terminal() const noexcept { return xi_; }

    double y(std::size_t j, std::size_t i, std::size_t p) const noexcept { return sol_.y(i, j * sub_ + p); }
    double k(std::size_t j, std::size_t i, std::size_t p) const noexcept { return sol_.k(i, j * sub_ + p); }
    /// E[Y_{t_i}] averaged over every universe.
    double mean_y(std::size_t i) const noexcept { return sol_.mean_y(i); }

    double universe_mean_y(std::size_t j, std::size_t i) const noexcept {
        double s = 0.0;
        for (std::size_t p = 0; p < sub_; ++p) s += y(j, i, p);
        return s / static_cast<double>(sub_);
    }
    double universe_se_y(std::size_t j, std::size_t i) const noexcept {
        const double m = universe_mean_y(j, i);
        double v = 0.0;
        for (std::size_t p = 0; p < sub_; ++p) v += (y(j, i, p) - m) * (y(j, i, p) - m);
        return sub_ > 1 ? std::sqrt(v / static_cast<double>(sub_ - 1) / static_cast<double>(sub_)) : 0.0;
    }

    ExchangeabilityReport exchangeability(std::size_t node) const {
        ExchangeabilityReport r;
        r.node = node;
        for (std::size_t j = 0; j < universes(); ++j) {
            r.universe_mean.push_back(universe_mean_y(j, node));
            r.universe_se.push_back(universe_se_y(j, node));
        }
        for (std::size_t j = 1; j < universes(); ++j) {
            const double diff = std::abs(r.universe_mean[j] - r.universe_mean[0]);
            const double se = std::hypot(r.universe_se[j], r.universe_se[0]);
            r.max_ratio = std::max(r.max_ratio, se > 0.0 ? diff / se : (diff <= 1e-12 ? 0.0 : 1e300));
        }
        return r;
    }

private:
    std::size_t N_;
    std::size_t sub_;
    PathEnsemble X_;
    BackwardSolution sol_;
    std::vector<double> xi_;
};

/**
 * Solves the interacting reflected system on prescribed universe-major noise
 * ((N+1) * S particles). Reflection applies whenever the problem has an obstacle.
 */
inline ParticleSystemSolution solve_rbsde_n(const MfProblem& problem, std::size_t N, const NoiseEnsemble& noise,
                                            const ParticleConfig& cfg = {}) {
    if (!problem.flags.bounded_coefficients) {
        throw std::invalid_argument("solve_rbsde_n: problem '" + problem.name +
                                    "' is not flagged bounded; the particle system requires a bounded driver");
    }
    if (N == 0) throw std::invalid_argument("solve_rbsde_n: N must be >= 1 (empty interaction average)");
    const std::size_t U = N + 1;
    if (noise.particles() % U != 0 || noise.particles() == 0) {
        throw std::invalid_argument("solve_rbsde_n: noise particle count must be a multiple of N+1");
    }
    const std::size_t S = noise.particles() / U;
    const TimeGrid& grid = noise.grid();
    const bool fp = cfg.solver.force_pairwise;
    const std::size_t d = problem.noise_dim;
    const std::size_t M = grid.steps();

    PathEnsemble X = simulate_particle_universes(problem, grid, N, noise, fp);

    std::vector<double> xi;
    {
        const double T = grid.horizon();
        auto view = [&](std::size_t j, std::size_t p) { return StateView{T, X.point(M, j * S + p)}; };
        detail::neighbor_average(problem.terminal, U, S, view, fp, xi);
    }
    const StepRule rule = problem.has_obstacle() ? StepRule::reflect() : StepRule::free();
    if (rule.kind == StepRule::Kind::reflect) detail::require_compatible_terminal(problem, X, xi);

    std::vector<double> g;
    const detail::DriverAverage driver = [&](std::size_t i, bool, std::span<const double> y_own,
                                             std::span<const double> z, std::span<double> out) {
        const double t = grid.time(i);
        auto view = [&](std::size_t j, std::size_t p) {
            const std::size_t q = j * S + p;
            return AgentView{t, X.point(i, q), y_own[q], z.subspan(q * d, d)};
        };
        detail::neighbor_average(problem.driver, U, S, view, fp, g);
        std::copy(g.begin(), g.end(), out.begin());
    };
    BackwardSolution sol =
        detail::backward_sweep(problem, X, noise, driver, xi, rule, cfg.solver, cfg.pooled_regression ? 1 : U);
    sol.diagnostics.picard_sweeps = 1;
    return ParticleSystemSolution(N, S, std::move(X), std::move(sol), std::move(xi));
}

/// Seeded variant: universe j draws from stream seed.stream_id + j.
inline ParticleSystemSolution solve_rbsde_n(const MfProblem& problem, std::size_t N, std::size_t sub_size,
                                            const TimeGrid& grid, RngSeed seed, const ParticleConfig& cfg = {}) {
    if (N == 0) throw std::invalid_argument("solve_rbsde_n: N must be >= 1 (empty interaction average)");
    if (sub_size == 0) throw std::invalid_argument("solve_rbsde_n: sub-ensemble size must be >= 1");
    const NoiseEnsemble noise = universe_noise(grid, N + 1, sub_size, problem.noise_dim, seed, cfg.threads);
    return solve_rbsde_n(problem, N, noise, cfg);
}

struct ConvergenceConfig {
    std::vector<std::size_t> n_list{8, 32, 128, 512};
    std::size_t budget = 10000;        ///< total particles per N before the per-universe floor
    std::size_t min_sub_size = 500;
    RngSeed seed{2024, 1000};
    ParticleConfig particle;
};

struct ConvergenceRow {
    std::size_t N = 0;
    std::size_t sub_size = 0;
    std::vector<double> probe_rms;  ///< RMS gap Y^N - Y^inf at each probe node
    double y_error = 0.0;           ///< max over probe_rms
    double k_error = 0.0;           ///< mean |K^N_M - K^inf_M|
    double mean_y0 = 0.0;
    double limit_mean_y0 = 0.0;
};

struct ConvergenceReport {
    std::vector<std::size_t> probe_nodes;
    std::vector<ConvergenceRow> rows;
    double rate = 0.0;  ///< slope of log(error) against log(N)
    double rate_ci_low = 0.0;
    double rate_ci_high = 0.0;

    bool strictly_decreasing() const {
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (!(rows[r].y_error < rows[r - 1].y_error)) return false;
        }
        return true;
    }
};

/// Least-squares slope of y on x with a two-sided 95% t interval (NaN bounds for fewer than 3 points).
inline std::array<double, 3> fit_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    if (n < 3 || sxx <= 0.0) return {slope, std::nan(""), std::nan("")};
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - my - slope * (x[i] - mx);
        sse += r * r;
    }
    const double se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    const boost::math::students_t dist(static_cast<double>(n - 2));
    const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    return {slope, slope - tq * se, slope + tq * se};
}

/**
 * For each N: solve the interacting system, then the limit equation on the
 * same noise (flows under the frozen reference law, reflected backward solve
 * against the reference solution) and record the pathwise gap.
 */
inline ConvergenceReport convergence_study(const MfProblem& problem, const PathEnsemble& law_x,
                                           const BackwardSolution& reference, const ConvergenceConfig& cfg) {
    if (!(reference.grid() == law_x.grid())) throw std::invalid_argument("convergence_study: grid mismatch");
    const TimeGrid& grid = law_x.grid();
    const std::size_t M = grid.steps();
    ConvergenceReport rep;
    rep.probe_nodes = {0, M / 4, M / 2, (3 * M) / 4, M};
    const StepRule rule = problem.has_obstacle() ? StepRule::reflect() : StepRule::free();
    std::vector<double> lx, ly;
    for (std::size_t idx = 0; idx < cfg.n_list.size(); ++idx) {
        const std::size_t N = cfg.n_list[idx];
        if (idx > 0 && N <= cfg.n_list[idx - 1]) throw std::invalid_argument("convergence_study: N_list must increase");
        const std::size_t S = default_sub_ensemble(N, cfg.budget, cfg.min_sub_size);
        const RngSeed seed{cfg.seed.seed, cfg.seed.stream_id + 100000 * (idx + 1)};
        const NoiseEnsemble noise = universe_noise(grid, N + 1, S, problem.noise_dim, seed, cfg.particle.threads);
        const ParticleSystemSolution ps = solve_rbsde_n(problem, N, noise, cfg.particle);
        const PathEnsemble x_inf = simulate_flow(problem, grid, 0, problem.x0, law_x, noise, cfg.particle.threads);
        const BackwardSolution y_inf = solve_frozen(problem, x_inf, noise, law_x, reference, rule, cfg.particle.solver);

        ConvergenceRow row;
        row.N = N;
        row.sub_size = S;
        const std::size_t P = noise.particles();
        for (auto i : rep.probe_nodes) {
            double s = 0.0;
            for (std::size_t q = 0; q < P; ++q) {
                const double gap = ps.solution().y(i, q) - y_inf.y(i, q);
                s += gap * gap;
            }
            row.probe_rms.push_back(std::sqrt(s / static_cast<double>(P)));
            row.y_error = std::max(row.y_error, row.probe_rms.back());
        }
        double ks = 0.0;
        for (std::size_t q = 0; q < P; ++q) ks += std::abs(ps.solution().k(M, q) - y_inf.k(M, q));
        row.k_error = ks / static_cast<double>(P);
        row.mean_y0 = ps.mean_y(0);
        row.limit_mean_y0 = y_inf.mean_y(0);
        lx.push_back(std::log(static_cast<double>(N)));
        ly.push_back(std::log(std::max(row.y_error, 1e-300)));
        rep.rows.push_back(std::move(row));
    }
    const auto fit = fit_slope(lx, ly);
    rep.rate = fit[0];
    rep.rate_ci_low = fit[1];
    rep.rate_ci_high = fit[2];
    return rep;
}

struct CounterexampleReport {
    std::size_t node_t1 = 0;
    double p_y1_negative = 0.0;     ///< share of particles with Y_1 < 0
    double p_y1_negative_se = 0.0;
    double analytic_probability = 0.0;
    double p_xi_above_zero_data = 0.0;   ///< share with xi > xi' = 0
    double max_abs_zero_solution = 0.0;  ///< max |Y'|, |Z'|, |K'| for the zero-data system
    bool zero_solution_exact = false;
    OrderingReport ordering;             ///< violations of Y' <= Y
    std::vector<double> times;
    std::vector<double> mean_y;
    std::vector<double> oracle_mean_y;
};

/**
 * The interacting example with driver -y~ (N = 1, two universes) for the capped
 * square terminal value and for zero data, on common noise.
 */
inline CounterexampleReport comparison_counterexample(std::size_t mc_size, const TimeGrid& grid,
                                                      RngSeed seed = {31, 0}, const ParticleConfig& cfg = {}) {
    if (std::abs(grid.horizon() - oracle::kHorizon) > 1e-12) {
        throw std::invalid_argument("comparison_counterexample: horizon must be 2");
    }
    if (mc_size < 2) throw std::invalid_argument("comparison_counterexample: mc_size must be >= 2");
    const std::size_t node = grid.index_of(1.0);
    const std::size_t S = mc_size / 2;
    const NoiseEnsemble noise = universe_noise(grid, 2, S, 1, seed, cfg.threads);
    const ParticleSystemSolution a = solve_rbsde_n(example31_problem(Example31Terminal::capped_square), 1, noise, cfg);
    const ParticleSystemSolution b = solve_rbsde_n(example31_problem(Example31Terminal::zero), 1, noise, cfg);

    CounterexampleReport rep;
    rep.node_t1 = node;
    rep.analytic_probability = oracle::violation_probability();
    const std::size_t P = noise.particles();
    std::size_t neg = 0, pos_xi = 0;
    for (std::size_t q = 0; q < P; ++q) {
        if (a.solution().y(node, q) < 0.0) ++neg;
        if (a.terminal()[q] > 0.0) ++pos_xi;
    }
    rep.p_y1_negative = static_cast<double>(neg) / static_cast<double>(P);
    rep.p_y1_negative_se = std::sqrt(rep.p_y1_negative * (1.0 - rep.p_y1_negative) / static_cast<double>(P));
    rep.p_xi_above_zero_data = static_cast<double>(pos_xi) / static_cast<double>(P);
    for (double v : b.solution().y_all()) rep.max_abs_zero_solution = std::max(rep.max_abs_zero_solution, std::abs(v));
    for (double v : b.solution().z_all()) rep.max_abs_zero_solution = std::max(rep.max_abs_zero_solution, std::abs(v));
    for (double v : b.solution().k_all()) rep.max_abs_zero_solution = std::max(rep.max_abs_zero_solution, std::abs(v));
    rep.zero_solution_exact = rep.max_abs_zero_solution == 0.0;
    rep.ordering = compare_solutions(b.solution(), a.solution());
    for (double t : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        const std::size_t i = grid.index_of(t);
        rep.times.push_back(t);
        rep.mean_y.push_back(a.mean_y(i));
        rep.oracle_mean_y.push_back(oracle::expected_y(t));
    }
    return rep;
}

}  // namespace rmf

#endif  // RMFBSDE_PARTICLE_SYSTEM_HPP
