/**
 * @file penalization.hpp
 * @brief Penalized mean-field BSDEs and the monotone-convergence sweep towards the reflected solution.
 *
 * Level n replaces the reflection by the extra driver term n (y - h(t,x))^-. The
 * penalty is explicit in the continuation value while n dt <= 0.5 and implicit
 * beyond (see StepRule). K^n is the left-point running integral n sum (Y_i - h_i)^- dt.
 */

#ifndef RMFBSDE_PENALIZATION_HPP
#define RMFBSDE_PENALIZATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmfbsde/bsde_solver.hpp"

namespace rmf {

inline BackwardSolution solve_penalized(const MfProblem& problem, double n, const PathEnsemble& X,
                                        const NoiseEnsemble& noise, const SolverConfig& cfg = {}) {
    if (!problem.has_obstacle()) throw std::invalid_argument("solve_penalized: problem has no obstacle");
    if (!(n >= 1.0)) throw std::invalid_argument("solve_penalized: penalty level must be >= 1");
    return solve_mean_field(problem, X, noise, StepRule::penalize(n), cfg);
}

/// Probe nodes {0, M/4, M/2, 3M/4}.
inline std::vector<std::size_t> quarter_nodes(std::size_t steps, bool include_terminal = false) {
    std::vector<std::size_t> nodes{0, steps / 4, steps / 2, (3 * steps) / 4};
    if (include_terminal) nodes.push_back(steps);
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

/// Mean-square gap of two Y ensembles at one node.
inline double mean_square_gap(const BackwardSolution& a, const BackwardSolution& b, std::size_t node) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.particles(); ++p) {
        const double g = a.y(node, p) - b.y(node, p);
        s += g * g;
    }
    return s / static_cast<double>(a.particles());
}

struct PenalizationLevel {
    double n = 0.0;
    std::vector<double> probe_mean_y;
    double distance = 0.0;            ///< sqrt(sup over probe nodes of mean-square gap to the reference)
    double distance_all_nodes = 0.0;  ///< same with the sup over every node
    double k_terminal_mean = 0.0;
    double k_distance = 0.0;          ///< |mean K^n_M - mean K_M|
    /// Share of (node, particle) pairs with Y^prev > Y^n + 3 SE; NaN on the first level.
    double monotonicity_violation = std::numeric_limits<double>::quiet_NaN();
    double monotonicity_worst_node = std::numeric_limits<double>::quiet_NaN();
    bool k_monotone = true;
    std::size_t picard_sweeps = 0;
};

struct PenalizationReport {
    std::vector<std::size_t> probe_nodes;
    std::vector<double> probe_times;
    std::vector<double> reference_probe_mean_y;
    double reference_k_terminal_mean = 0.0;
    std::vector<PenalizationLevel> levels;

    bool distances_strictly_decreasing() const {
        for (std::size_t l = 1; l < levels.size(); ++l) {
            if (!(levels[l].distance < levels[l - 1].distance)) return false;
        }
        return true;
    }
    bool k_distances_decreasing() const {
        for (std::size_t l = 1; l < levels.size(); ++l) {
            if (levels[l].k_distance > levels[l - 1].k_distance) return false;
        }
        return true;
    }
    double max_monotonicity_violation() const {
        double m = 0.0;
        for (std::size_t l = 1; l < levels.size(); ++l) m = std::max(m, levels[l].monotonicity_violation);
        return m;
    }
};

/**
 * Solves every level on the same paths, noise and basis, plus the reflected
 * reference on that ensemble, and tabulates distances and monotonicity.
 */
inline PenalizationReport penalization_sweep(const MfProblem& problem, const std::vector<double>& n_list,
                                             const PathEnsemble& X, const NoiseEnsemble& noise,
                                             const SolverConfig& cfg = {}, double se_multiplier = 3.0) {
    if (n_list.empty()) throw std::invalid_argument("penalization_sweep: empty penalty list");
    for (std::size_t l = 1; l < n_list.size(); ++l) {
        if (!(n_list[l] > n_list[l - 1])) throw std::invalid_argument("penalization_sweep: n_list must increase");
    }
    const std::size_t M = X.grid().steps();
    PenalizationReport rep;
    rep.probe_nodes = quarter_nodes(M);
    for (auto i : rep.probe_nodes) rep.probe_times.push_back(X.grid().time(i));

    const BackwardSolution ref = solve_reflected(problem, X, noise, cfg);
    for (auto i : rep.probe_nodes) rep.reference_probe_mean_y.push_back(ref.mean_y(i));
    rep.reference_k_terminal_mean = ref.mean_k(M);

    std::vector<BackwardSolution> prev;
    for (double n : n_list) {
        BackwardSolution sol = [&] {
            try {
                return solve_penalized(problem, n, X, noise, cfg);
            } catch (const convergence_failure& e) {
                throw convergence_failure("penalty level n = " + std::to_string(n) + ": " + e.what(), e.gaps());
            } catch (const numerical_blowup& e) {
                throw numerical_blowup("penalty level n = " + std::to_string(n) + ": " + e.what(), e.step());
            }
        }();
        PenalizationLevel lvl;
        lvl.n = n;
        lvl.picard_sweeps = sol.diagnostics.picard_sweeps;
        double sup_probe = 0.0, sup_all = 0.0;
        for (auto i : rep.probe_nodes) {
            lvl.probe_mean_y.push_back(sol.mean_y(i));
            sup_probe = std::max(sup_probe, mean_square_gap(sol, ref, i));
        }
        for (std::size_t i = 0; i <= M; ++i) sup_all = std::max(sup_all, mean_square_gap(sol, ref, i));
        lvl.distance = std::sqrt(sup_probe);
        lvl.distance_all_nodes = std::sqrt(sup_all);
        lvl.k_terminal_mean = sol.mean_k(M);
        lvl.k_distance = std::abs(lvl.k_terminal_mean - rep.reference_k_terminal_mean);
        for (std::size_t i = 1; i <= M && lvl.k_monotone; ++i) {
            for (std::size_t p = 0; p < sol.particles(); ++p) {
                if (sol.k(i, p) < sol.k(i - 1, p)) {
                    lvl.k_monotone = false;
                    break;
                }
            }
        }
        if (!prev.empty()) {
            const OrderingReport ord = compare_solutions(prev.back(), sol, se_multiplier);
            double pooled = 0.0;
            for (double f : ord.violation_fraction) pooled += f;
            lvl.monotonicity_violation = pooled / static_cast<double>(ord.violation_fraction.size());
            lvl.monotonicity_worst_node = ord.max_violation_fraction;
            prev.clear();
        }
        prev.push_back(std::move(sol));
        rep.levels.push_back(std::move(lvl));
    }
    return rep;
}

}  // namespace rmf

#endif  // RMFBSDE_PENALIZATION_HPP
