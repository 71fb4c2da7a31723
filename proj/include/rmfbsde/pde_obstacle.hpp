/**
 * @file pde_obstacle.hpp
 * @brief Finite differences for the scalar nonlocal (penalized / obstacle) PDE
 *
 *   min{ u - h, -u_t - b~ u_x - 0.5 sigma~^2 u_xx - F[u] } = 0,   u(T, x) = E[Phi(x, X_T)],
 *
 * with b~, sigma~ averaged over the frozen law ensemble X and the nonlocal term
 *
 *   F[u](t, x) = (1/P) sum_q g(t, (x, u(t,x), u_x sigma~(t,x)), (X^q_t, u(t, X^q_t), z~^q)).
 *
 * Backward stepping: diffusion and drift implicit (Thomas solve, central
 * differences) or explicit under a CFL bound; F trapezoidal through one
 * predictor-corrector pass; then the penalty or projection rule of StepRule.
 * Boundary nodes are Dirichlet rows advanced by the zero-order terms alone.
 */

#ifndef RMFBSDE_PDE_OBSTACLE_HPP
#define RMFBSDE_PDE_OBSTACLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmfbsde/bsde_solver.hpp"
#include "rmfbsde/forward_sde.hpp"
#include "rmfbsde/mean_field.hpp"
#include "rmfbsde/problem.hpp"
#include "rmfbsde/random.hpp"

namespace rmf {

/// Time grid times a uniform space lattice x_0 = x_min < ... < x_J = x_max.
class SpaceTimeGrid {
public:
    SpaceTimeGrid(TimeGrid time, double x_min, double x_max, std::size_t intervals)
        : time_(time), x_min_(x_min), x_max_(x_max), J_(intervals) {
        if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
            throw std::invalid_argument("SpaceTimeGrid: need x_min < x_max");
        }
        if (intervals < 2) throw std::invalid_argument("SpaceTimeGrid: need J >= 2 space intervals");
    }

    const TimeGrid& time() const noexcept { return time_; }
    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    std::size_t intervals() const noexcept { return J_; }
    std::size_t points() const noexcept { return J_ + 1; }
    double dx() const noexcept { return (x_max_ - x_min_) / static_cast<double>(J_); }
    double x(std::size_t j) const noexcept {
        return j == J_ ? x_max_ : x_min_ + static_cast<double>(j) * dx();
    }
    /// Boundary policy: Dirichlet with values advanced by the zero-order terms.
    static constexpr const char* boundary_policy() { return "dirichlet-zero-order"; }

private:
    TimeGrid time_;
    double x_min_, x_max_;
    std::size_t J_;
};

enum class DiffusionScheme { implicit, explicit_euler };

struct PdeConfig {
    DiffusionScheme scheme = DiffusionScheme::implicit;
    double cfl = 1.0;                  ///< explicit mode requires dt <= cfl * dx^2 / max sigma~^2
    std::size_t corrector_passes = 1;
    double clamp_limit = 1e-3;         ///< share of clamped law evaluations above which a run is invalid
};

/// (M+1) x (J+1) values on a SpaceTimeGrid, row i = time node i.
class GridFunction {
public:
    GridFunction(SpaceTimeGrid grid, std::string problem, double penalty, bool obstacle_limit)
        : grid_(grid), problem_(std::move(problem)), penalty_(penalty), obstacle_limit_(obstacle_limit),
          values_(grid.time().nodes() * grid.points(), 0.0) {}

    const SpaceTimeGrid& grid() const noexcept { return grid_; }
    const std::string& problem() const noexcept { return problem_; }
    double penalty() const noexcept { return penalty_; }
    bool obstacle_limit() const noexcept { return obstacle_limit_; }
    std::string level() const { return obstacle_limit_ ? "obstacle-limit" : "n=" + std::to_string(penalty_); }

    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * grid_.points() + j]; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {values_.data() + i * grid_.points(), grid_.points()};
    }
    std::span<double> row(std::size_t i) noexcept { return {values_.data() + i * grid_.points(), grid_.points()}; }

    /// Linear interpolation of row i at x (clamped to the window).
    double at(std::size_t i, double x) const noexcept { return interpolate(row(i), x); }

    double interpolate(std::span<const double> r, double x) const noexcept {
        const double s = (std::clamp(x, grid_.x_min(), grid_.x_max()) - grid_.x_min()) / grid_.dx();
        const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(s), grid_.intervals() - 1);
        const double w = s - static_cast<double>(j);
        return (1.0 - w) * r[j] + w * r[j + 1];
    }

    std::size_t clamped_evaluations = 0;
    std::size_t law_evaluations = 0;
    bool valid = true;
    double max_step_ratio = 0.0;  ///< dt max sigma~^2 / dx^2 seen while stepping

    /// CSV rows "t,x,u".
    void write_csv(std::ostream& os) const {
        os << "t,x,u\n";
        os.precision(17);
        for (std::size_t i = 0; i < grid_.time().nodes(); ++i) {
            for (std::size_t j = 0; j < grid_.points(); ++j) {
                os << grid_.time().time(i) << ',' << grid_.x(j) << ',' << (*this)(i, j) << '\n';
            }
        }
    }

private:
    SpaceTimeGrid grid_;
    std::string problem_;
    double penalty_;
    bool obstacle_limit_;
    std::vector<double> values_;
};

namespace detail {

/// Solves a tridiagonal system in place (Thomas algorithm); sub[0] and sup[n-1] unused.
inline void solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                              std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t k = 1; k < n; ++k) {
        const double w = sub[k] / diag[k - 1];
        diag[k] -= w * sup[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) rhs[k] = (rhs[k] - sup[k] * rhs[k + 1]) / diag[k];
}

inline void require_scalar(const MfProblem& problem) {
    if (problem.state_dim != 1 || problem.noise_dim != 1) {
        throw std::invalid_argument("pde_obstacle: only scalar problems (n = d = 1) are supported");
    }
}

/// max over nodes of sigma~(t_i, x) at the law mean and a spread of law states.
inline double max_effective_vol(const MfProblem& problem, const PathEnsemble& law) {
    double best = 0.0;
    for (std::size_t i = 0; i < law.grid().nodes(); ++i) {
        const double t = law.grid().time(i);
        auto other = [&](std::size_t q) { return StateView{t, law.point(i, q)}; };
        const EmpiricalField<StateView> sig(problem.diffusion, law.particles(), other);
        const std::size_t stride = std::max<std::size_t>(1, law.particles() / 16);
        for (std::size_t q = 0; q < law.particles(); q += stride) {
            best = std::max(best, std::abs(sig.scalar(StateView{t, law.point(i, q)})));
        }
    }
    return best;
}

}  // namespace detail

/// Window x0 +- 6 max sigma~ sqrt(T), widened to contain [probe_lo, probe_hi].
inline SpaceTimeGrid default_space_grid(const MfProblem& problem, const PathEnsemble& law, std::size_t intervals,
                                        double probe_lo = std::numeric_limits<double>::infinity(),
                                        double probe_hi = -std::numeric_limits<double>::infinity()) {
    detail::require_scalar(problem);
    const double half = 6.0 * std::max(detail::max_effective_vol(problem, law), 1e-3) * std::sqrt(law.grid().horizon());
    const double lo = std::min(problem.x0[0] - half, probe_lo);
    const double hi = std::max(problem.x0[0] + half, probe_hi);
    return SpaceTimeGrid(law.grid(), lo, hi, intervals);
}

/**
 * Backward stepping with the given rule (free, penalize(n) or reflect).
 * The law ensemble must live on the grid's time grid.
 */
inline GridFunction solve_nonlocal_pde(const MfProblem& problem, const StepRule& rule, const SpaceTimeGrid& grid,
                                       const PathEnsemble& law, const PdeConfig& cfg = {}) {
    detail::require_scalar(problem);
    if (!(law.grid() == grid.time())) throw std::invalid_argument("pde_obstacle: law ensemble on a different time grid");
    if (rule.kind != StepRule::Kind::free && !problem.has_obstacle()) {
        throw std::invalid_argument("pde_obstacle: penalization or projection needs an obstacle");
    }
    const TimeGrid& tg = grid.time();
    const std::size_t M = tg.steps();
    const std::size_t Jp = grid.points();
    const std::size_t P = law.particles();
    const double dt = tg.dt();
    const double dx = grid.dx();
    GridFunction u(grid, problem.name, rule.kind == StepRule::Kind::penalize ? rule.penalty : 0.0,
                   rule.kind == StepRule::Kind::reflect);

    std::vector<double> xs(Jp);
    for (std::size_t j = 0; j < Jp; ++j) xs[j] = grid.x(j);
    auto x_span = [&](std::size_t j) { return std::span<const double>(&xs[j], 1); };

    {
        const double T = tg.horizon();
        auto other = [&](std::size_t q) { return StateView{T, law.point(M, q)}; };
        const EmpiricalField<StateView> phi(problem.terminal, P, other);
        auto last = u.row(M);
        for (std::size_t j = 0; j < Jp; ++j) last[j] = phi.scalar(StateView{T, x_span(j)});
    }

    std::vector<double> bt(Jp), st(Jp), h(Jp, 0.0), du(Jp), lx(P), lz(P, 0.0), ly(P);
    std::vector<double> f_next(Jp), f_pred(Jp), rhs(Jp), sub(Jp), dia(Jp), sup(Jp);

    auto derivative = [&](std::span<const double> r, std::vector<double>& out) {
        out[0] = (r[1] - r[0]) / dx;
        out[Jp - 1] = (r[Jp - 1] - r[Jp - 2]) / dx;
        for (std::size_t j = 1; j + 1 < Jp; ++j) out[j] = (r[j + 1] - r[j - 1]) / (2.0 * dx);
    };

    // Nonlocal zero-order term at node i for a u-row r.
    auto forcing = [&](std::size_t i, std::span<const double> r, std::vector<double>& F) {
        const double t = tg.time(i);
        derivative(r, du);
        for (std::size_t q = 0; q < P; ++q) {
            ly[q] = u.interpolate(r, lx[q]);
            if (problem.flags.driver_depends_on_ztilde) lz[q] = u.interpolate(du, lx[q]) * u.interpolate(st, lx[q]);
        }
        auto other = [&](std::size_t q) {
            return AgentView{t, std::span<const double>(&lx[q], 1), ly[q], std::span<const double>(&lz[q], 1)};
        };
        const EmpiricalField<AgentView> field(problem.driver, P, other);
        for (std::size_t j = 0; j < Jp; ++j) {
            const double z = du[j] * st[j];
            F[j] = field.scalar(AgentView{t, x_span(j), r[j], std::span<const double>(&z, 1)});
        }
    };

    for (std::size_t step = M; step-- > 0;) {
        const std::size_t i = step;
        const double t = tg.time(i);
        {
            auto other = [&](std::size_t q) { return StateView{t, law.point(i, q)}; };
            const EmpiricalField<StateView> drift(problem.drift, P, other);
            const EmpiricalField<StateView> vol(problem.diffusion, P, other);
            double smax = 0.0;
            for (std::size_t j = 0; j < Jp; ++j) {
                bt[j] = drift.scalar(StateView{t, x_span(j)});
                st[j] = vol.scalar(StateView{t, x_span(j)});
                smax = std::max(smax, st[j] * st[j]);
            }
            u.max_step_ratio = std::max(u.max_step_ratio, dt * smax / (dx * dx));
            if (cfg.scheme == DiffusionScheme::explicit_euler && dt * smax > cfg.cfl * dx * dx) {
                throw std::invalid_argument("pde_obstacle: CFL violated, dt = " + std::to_string(dt) +
                                            " > " + std::to_string(cfg.cfl) + " * dx^2 / max sigma~^2 = " +
                                            std::to_string(cfg.cfl * dx * dx / smax));
            }
        }
        for (std::size_t q = 0; q < P; ++q) {
            const double x = law.state(i, q);
            if (x < grid.x_min() || x > grid.x_max()) ++u.clamped_evaluations;
            lx[q] = std::clamp(x, grid.x_min(), grid.x_max());
        }
        u.law_evaluations += P;
        if (rule.kind != StepRule::Kind::free) {
            for (std::size_t j = 0; j < Jp; ++j) h[j] = problem.obstacle_at(t, x_span(j));
        }

        const std::span<const double> next = u.row(i + 1);
        forcing(i, next, f_next);

        auto advance = [&](const std::vector<double>& F, std::span<double> out) {
            for (std::size_t j = 0; j < Jp; ++j) rhs[j] = next[j] + dt * F[j];
            if (cfg.scheme == DiffusionScheme::implicit) {
                for (std::size_t j = 1; j + 1 < Jp; ++j) {
                    const double diff = 0.5 * st[j] * st[j] / (dx * dx);
                    const double adv = bt[j] / (2.0 * dx);
                    sub[j] = -dt * (diff - adv);
                    sup[j] = -dt * (diff + adv);
                    dia[j] = 1.0 + 2.0 * dt * diff;
                }
                sub[0] = sup[0] = sub[Jp - 1] = sup[Jp - 1] = 0.0;
                dia[0] = dia[Jp - 1] = 1.0;
                detail::solve_tridiagonal(sub, dia, sup, rhs);
            } else {
                for (std::size_t j = 1; j + 1 < Jp; ++j) {
                    const double uxx = (next[j + 1] - 2.0 * next[j] + next[j - 1]) / (dx * dx);
                    const double ux = (next[j + 1] - next[j - 1]) / (2.0 * dx);
                    rhs[j] += dt * (0.5 * st[j] * st[j] * uxx + bt[j] * ux);
                }
            }
            for (std::size_t j = 0; j < Jp; ++j) {
                out[j] = rule.kind == StepRule::Kind::free ? rhs[j] : rule.apply(rhs[j], h[j], dt);
            }
        };

        auto cur = u.row(i);
        advance(f_next, cur);
        std::vector<double> avg(Jp);
        for (std::size_t pass = 0; pass < cfg.corrector_passes; ++pass) {
            forcing(i, cur, f_pred);
            for (std::size_t j = 0; j < Jp; ++j) avg[j] = 0.5 * (f_next[j] + f_pred[j]);
            advance(avg, cur);
        }
        for (std::size_t j = 0; j < Jp; ++j) {
            if (!std::isfinite(cur[j])) throw numerical_blowup("pde_obstacle: non-finite value", i);
        }
    }
    u.valid = static_cast<double>(u.clamped_evaluations) <=
              cfg.clamp_limit * static_cast<double>(std::max<std::size_t>(u.law_evaluations, 1));
    return u;
}

inline GridFunction solve_penalized_pde(const MfProblem& problem, double n, const SpaceTimeGrid& grid,
                                        const PathEnsemble& law, const PdeConfig& cfg = {}) {
    if (!(n >= 1.0)) throw std::invalid_argument("solve_penalized_pde: penalty level must be >= 1");
    return solve_nonlocal_pde(problem, StepRule::penalize(n), grid, law, cfg);
}

inline GridFunction solve_obstacle_pde(const MfProblem& problem, const SpaceTimeGrid& grid, const PathEnsemble& law,
                                       const PdeConfig& cfg = {}) {
    return solve_nonlocal_pde(problem, StepRule::reflect(), grid, law, cfg);
}

struct ProbePoint {
    double t = 0.0;
    double x = 0.0;
};

struct ProbeComparison {
    ProbePoint probe;
    double u_fd = 0.0;
    double y_mc = 0.0;
    double se = 0.0;
    double gap = 0.0;  ///< |u_fd - y_mc|
};

struct ComparisonReport {
    std::vector<ProbeComparison> rows;
    double max_gap = 0.0;
    double max_se = 0.0;
};

struct McConfig {
    std::size_t particles = 20000;
    RngSeed seed{77, 500};  ///< probe k uses stream seed.stream_id + k
    SolverConfig solver;
    std::size_t threads = 1;
};

/**
 * For each probe (t, x): paths from x at t under the frozen law, backward solve
 * against (law_x, law_solution) with the same rule as u, and the gap to u(t, x).
 */
inline ComparisonReport compare_with_probabilistic(const GridFunction& u, const MfProblem& problem,
                                                   const PathEnsemble& law_x, const BackwardSolution& law_solution,
                                                   std::span<const ProbePoint> probes, const McConfig& mc) {
    const SpaceTimeGrid& g = u.grid();
    const StepRule rule = u.obstacle_limit() ? StepRule::reflect()
                          : problem.has_obstacle() && u.penalty() > 0.0 ? StepRule::penalize(u.penalty())
                                                                        : StepRule::free();
    ComparisonReport rep;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const ProbePoint pr = probes[k];
        if (!(pr.x > g.x_min() && pr.x < g.x_max())) {
            throw std::invalid_argument("compare_with_probabilistic: probe outside the space window");
        }
        const std::size_t start = g.time().index_of(pr.t);
        const NoiseEnsemble noise = sample_brownian(g.time(), mc.particles, 1,
                                                    RngSeed{mc.seed.seed, mc.seed.stream_id + k}, mc.threads);
        const std::vector<double> x0{pr.x};
        const PathEnsemble flow = simulate_flow(problem, g.time(), start, x0, law_x, noise, mc.threads);
        const BackwardSolution sol = solve_frozen(problem, flow, noise, law_x, law_solution, rule, mc.solver);
        ProbeComparison row;
        row.probe = pr;
        row.u_fd = u.at(start, pr.x);
        row.y_mc = sol.mean_y(start);
        row.se = start < g.time().steps() ? sol.diagnostics.regression_se[start] : 0.0;
        row.gap = std::abs(row.u_fd - row.y_mc);
        rep.max_gap = std::max(rep.max_gap, row.gap);
        rep.max_se = std::max(rep.max_se, row.se);
        rep.rows.push_back(row);
    }
    return rep;
}

struct LipschitzReport {
    std::vector<double> n_list;
    std::vector<double> lipschitz;           ///< L_n, see empirical_lipschitz
    std::vector<double> monotone_violation;  ///< share of nodes with u_prev > u_n + tol (NaN for the first)
    double ratio = 0.0;                      ///< max L_n / min L_n
    double tolerance = 0.0;
};

/// max |u(i,j+1) - u(i,j)| / dx over rows before T (the terminal row does not depend on n).
inline double empirical_lipschitz(const GridFunction& u) {
    const SpaceTimeGrid& g = u.grid();
    double L = 0.0;
    for (std::size_t i = 0; i < g.time().steps(); ++i) {
        for (std::size_t j = 0; j + 1 < g.points(); ++j) L = std::max(L, std::abs(u(i, j + 1) - u(i, j)) / g.dx());
    }
    return L;
}

inline LipschitzReport lipschitz_report(const MfProblem& problem, const std::vector<double>& n_list,
                                        const SpaceTimeGrid& grid, const PathEnsemble& law, const PdeConfig& cfg = {},
                                        double tolerance = 1e-6) {
    if (n_list.empty()) throw std::invalid_argument("lipschitz_report: empty penalty list");
    for (std::size_t l = 1; l < n_list.size(); ++l) {
        if (!(n_list[l] > n_list[l - 1])) throw std::invalid_argument("lipschitz_report: n_list must increase");
    }
    LipschitzReport rep;
    rep.n_list = n_list;
    rep.tolerance = tolerance;
    std::vector<double> prev;
    const std::size_t total = grid.time().nodes() * grid.points();
    for (double n : n_list) {
        const GridFunction u = solve_penalized_pde(problem, n, grid, law, cfg);
        rep.lipschitz.push_back(empirical_lipschitz(u));
        std::vector<double> cur(total);
        for (std::size_t i = 0; i < grid.time().nodes(); ++i) {
            const auto r = u.row(i);
            std::copy(r.begin(), r.end(), cur.begin() + static_cast<std::ptrdiff_t>(i * grid.points()));
        }
        if (prev.empty()) {
            rep.monotone_violation.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            std::size_t bad = 0;
            for (std::size_t k = 0; k < total; ++k) bad += prev[k] > cur[k] + tolerance ? 1 : 0;
            rep.monotone_violation.push_back(static_cast<double>(bad) / static_cast<double>(total));
        }
        prev = std::move(cur);
    }
    const auto [lo, hi] = std::minmax_element(rep.lipschitz.begin(), rep.lipschitz.end());
    rep.ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
    return rep;
}

}  // namespace rmf

#endif  // RMFBSDE_PDE_OBSTACLE_HPP
