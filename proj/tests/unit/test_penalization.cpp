#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmfbsde/analytic_oracle.hpp"
#include "rmfbsde/penalization.hpp"
#include "rmfbsde/problems.hpp"

namespace rmf {
namespace {

struct Deterministic {
    MfProblem p = deterministic_obstacle_problem();
    TimeGrid grid{1.0, 1000};
    NoiseEnsemble noise = sample_brownian(grid, 8, 1, {1, 0});
    PathEnsemble X = simulate_law_ensemble(p, grid, noise);
    SolverConfig cfg = [] {
        SolverConfig c;
        c.basis = RegressionBasis::polynomial(1);
        return c;
    }();
};

TEST(Penalization, DeterministicMatchesOdeOracle) {
    const Deterministic d;
    const auto times = d.grid.times();
    for (double n : {1.0, 16.0, 256.0}) {
        const auto sol = solve_penalized(d.p, n, d.X, d.noise, d.cfg);
        const auto ode = oracle::penalized_obstacle_ode(n, times);
        double gap = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) gap = std::max(gap, std::abs(sol.y(i, 0) - ode[i]));
        EXPECT_LT(gap, 3e-3) << "n = " << n;
    }
}

TEST(Penalization, DeterministicGapBoundedByInversePenalty) {
    const Deterministic d;
    for (double n : {16.0, 64.0, 256.0}) {
        const auto sol = solve_penalized(d.p, n, d.X, d.noise, d.cfg);
        double gap = 0.0;
        for (std::size_t i = 0; i <= d.grid.steps(); ++i) gap = std::max(gap, std::abs(sol.y(i, 0) - (1.0 - d.grid.time(i))));
        EXPECT_LE(gap, 2.0 / n + 2.0 * d.grid.dt()) << "n = " << n;
    }
}

TEST(Penalization, RejectsBadInput) {
    const Deterministic d;
    EXPECT_THROW(solve_penalized(d.p, 0.5, d.X, d.noise, d.cfg), std::invalid_argument);
    MfProblem none = d.p;
    none.obstacle.reset();
    EXPECT_THROW(solve_penalized(none, 4.0, d.X, d.noise, d.cfg), std::invalid_argument);
    EXPECT_THROW(penalization_sweep(d.p, {}, d.X, d.noise, d.cfg), std::invalid_argument);
    EXPECT_THROW(penalization_sweep(d.p, {4.0, 2.0}, d.X, d.noise, d.cfg), std::invalid_argument);
}

TEST(Penalization, BenchmarkSweepConvergesMonotonically) {
    const MfProblem p = benchmark_reflected_mf();
    const TimeGrid grid(1.0, 20);
    const auto noise = sample_brownian(grid, 4000, 1, {2, 0});
    const auto X = simulate_law_ensemble(p, grid, noise);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::piecewise(2, 10);
    const auto rep = penalization_sweep(p, {1, 4, 16, 64}, X, noise, cfg);
    ASSERT_EQ(rep.levels.size(), 4u);
    EXPECT_TRUE(rep.distances_strictly_decreasing());
    EXPECT_LE(rep.max_monotonicity_violation(), 0.01);
    EXPECT_TRUE(std::isnan(rep.levels[0].monotonicity_violation));
    for (const auto& l : rep.levels) EXPECT_TRUE(l.k_monotone);
    for (std::size_t l = 1; l < rep.levels.size(); ++l) {
        EXPECT_GE(rep.levels[l].probe_mean_y[0], rep.levels[l - 1].probe_mean_y[0] - 1e-3);
    }
    EXPECT_LT(rep.levels.back().distance, 0.05);
}

TEST(Penalization, QuarterNodes) {
    EXPECT_EQ(quarter_nodes(100), (std::vector<std::size_t>{0, 25, 50, 75}));
    EXPECT_EQ(quarter_nodes(100, true), (std::vector<std::size_t>{0, 25, 50, 75, 100}));
    EXPECT_EQ(quarter_nodes(2), (std::vector<std::size_t>{0, 1}));
}

}  // namespace
}  // namespace rmf
