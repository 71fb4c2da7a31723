#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmfbsde/bsde_solver.hpp"
#include "rmfbsde/problems.hpp"
#include "test_problems.hpp"

namespace rmf {
namespace {

struct Setup {
    TimeGrid grid;
    NoiseEnsemble noise;
    PathEnsemble X;
};

Setup make_setup(const MfProblem& p, std::size_t steps, std::size_t P, std::uint64_t seed) {
    const TimeGrid grid(p.horizon, steps);
    auto noise = sample_brownian(grid, P, p.noise_dim, {seed, 0});
    auto X = simulate_law_ensemble(p, grid, noise);
    return {grid, std::move(noise), std::move(X)};
}

TEST(BsdeSolver, LinearDriverDecaysExponentially) {
    MfProblem p = testing::brownian_problem();
    testing::set_terminal(p, [](double) { return 1.0; });
    testing::set_local_driver(p, [](const AgentView& a) { return -a.y; });
    const auto s = make_setup(p, 100, 500, 1);
    const auto sol = solve_bsde(p, s.X, s.noise);
    for (std::size_t i = 0; i <= 100; i += 25) {
        const double t = s.grid.time(i);
        EXPECT_NEAR(sol.mean_y(i), std::exp(-(1.0 - t)), 5e-3) << "t = " << t;
        EXPECT_NEAR(sol.y(i, 3), sol.y(i, 400), 1e-12);
    }
}

TEST(BsdeSolver, MeanFieldLinearDriverNeedsPicard) {
    MfProblem p = testing::brownian_problem();
    testing::set_terminal(p, [](double x) { return x * x; });
    p.driver = pairwise_scalar<AgentView>([](const AgentView&, const AgentView& o) { return -o.y; });
    p.driver_uses_copy_values = true;
    p.classical = false;
    const auto s = make_setup(p, 50, 4000, 2);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::polynomial(2);
    cfg.tol_picard = 1e-10;
    cfg.max_picard = 30;
    const auto sol = solve_bsde(p, s.X, s.noise, cfg);
    EXPECT_GT(sol.diagnostics.picard_sweeps, 2u);
    // E[Y_0] = E[W_1^2] e^{-1} up to Monte Carlo error of the terminal mean.
    double m = 0.0;
    for (std::size_t q = 0; q < 4000; ++q) m += s.X.state(50, q) * s.X.state(50, q);
    m /= 4000.0;
    EXPECT_NEAR(sol.mean_y(0), m * std::exp(-1.0), 5e-3);
}

TEST(BsdeSolver, ZRecoversDiffusionOfLinearTerminal) {
    MfProblem p = testing::brownian_problem(0.5);
    testing::set_terminal(p, [](double x) { return 2.0 * x; });
    const auto s = make_setup(p, 20, 20000, 3);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::polynomial(1);
    const auto sol = solve_bsde(p, s.X, s.noise, cfg);
    // Y = 2X and Z = 1 up to regression noise of order sqrt(1/P).
    for (std::size_t i = 0; i <= 10; ++i) EXPECT_NEAR(sol.y(i, 11), 2.0 * s.X.state(i, 11), 0.03);
    for (std::size_t i = 0; i < 20; i += 5) EXPECT_NEAR(sol.z(i, 11), 1.0, 0.05);
}

TEST(BsdeSolver, DeterministicObstacleGivesLinearSolution) {
    const MfProblem p = deterministic_obstacle_problem();
    const auto s = make_setup(p, 100, 8, 4);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::polynomial(1);
    const auto sol = solve_reflected(p, s.X, s.noise, cfg);
    for (std::size_t i = 0; i <= 100; ++i) {
        const double t = s.grid.time(i);
        for (std::size_t q = 0; q < 8; ++q) {
            EXPECT_NEAR(sol.y(i, q), 1.0 - t, 1e-12);
            EXPECT_NEAR(sol.k(i, q), t, 1e-12);
        }
    }
    std::vector<double> xi(8, 0.0);
    EXPECT_TRUE(check_reflection(p, s.X, sol, xi).holds());
}

TEST(BsdeSolver, ReflectionInvariantsOnBenchmark) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 20, 4000, 5);
    SolverConfig cfg;
    cfg.basis = RegressionBasis::piecewise(2, 10);
    const auto sol = solve_reflected(p, s.X, s.noise, cfg);
    const auto xi = terminal_values(p, s.X, s.X);
    const auto inv = check_reflection(p, s.X, sol, xi);
    EXPECT_GE(inv.min_obstacle_gap, 0.0);
    EXPECT_TRUE(inv.k_starts_at_zero);
    EXPECT_TRUE(inv.k_nondecreasing);
    EXPECT_TRUE(inv.terminal_exact);
    EXPECT_LE(inv.max_skorokhod, 1e-10);
    EXPECT_TRUE(std::isfinite(inv.max_martingale_ratio));
    EXPECT_GT(sol.mean_k(20), 0.0);
}

TEST(BsdeSolver, ReflectedDominatesFreeSolution) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 20, 2000, 6);
    const auto free = solve_bsde(p, s.X, s.noise);
    const auto refl = solve_reflected(p, s.X, s.noise);
    EXPECT_GE(refl.mean_y(0), free.mean_y(0));
    for (double k : free.k_all()) EXPECT_EQ(k, 0.0);
}

TEST(BsdeSolver, ThreadCountInvariantAndSeparableMatchesPairwise) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 10, 600, 7);
    SolverConfig fast;
    SolverConfig slow;
    slow.force_pairwise = true;
    const auto a = solve_reflected(p, s.X, s.noise, fast);
    const auto b = solve_reflected(p, s.X, s.noise, slow);
    for (std::size_t k = 0; k < a.y_all().size(); ++k) EXPECT_NEAR(a.y_all()[k], b.y_all()[k], 1e-9);
}

TEST(BsdeSolver, IncompatibleTerminalThrows) {
    MfProblem p = benchmark_reflected_mf();
    p.obstacle = [](double, std::span<const double>) { return 5.0; };
    const auto s = make_setup(p, 10, 200, 8);
    EXPECT_THROW(solve_reflected(p, s.X, s.noise), std::invalid_argument);
    MfProblem none = benchmark_reflected_mf();
    none.obstacle.reset();
    EXPECT_THROW(solve_reflected(none, s.X, s.noise), std::invalid_argument);
}

TEST(BsdeSolver, PicardFailureCarriesGapHistory) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 10, 500, 9);
    SolverConfig cfg;
    cfg.max_picard = 2;
    cfg.tol_picard = 1e-30;
    try {
        solve_reflected(p, s.X, s.noise, cfg);
        FAIL() << "expected convergence_failure";
    } catch (const convergence_failure& e) {
        EXPECT_EQ(e.gaps().size(), 2u);
        EXPECT_LT(e.gaps()[1], e.gaps()[0]);
    }
}

TEST(BsdeSolver, PicardGapsShrink) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 10, 500, 10);
    const auto sol = solve_reflected(p, s.X, s.noise);
    const auto& g = sol.diagnostics.picard_gaps;
    ASSERT_GE(g.size(), 2u);
    EXPECT_LT(g.back(), 1e-4);
    EXPECT_EQ(sol.diagnostics.picard_sweeps, g.size());
}

TEST(Comparison, LargerTerminalGivesLargerSolution) {
    const MfProblem a = benchmark_reflected_mf();
    MfProblem b = benchmark_reflected_mf();
    b.terminal = separable_scalar<StateView>(
        1, [](const StateView& o, std::span<double> f) { f[0] = std::cos(o.x[0]); },
        [](const StateView& s, std::span<const double> m) { return benchmark_profile(s.x[0]) + 0.05 * (1.0 + m[0]) + 0.1; });
    const auto s = make_setup(a, 20, 2000, 11);
    const auto rep = comparison_check(a, b, s.X, s.noise);
    EXPECT_TRUE(rep.certified);
    EXPECT_LE(rep.max_violation_fraction, 0.01);
}

TEST(Comparison, DriverReadingZTildeIsNotCertified) {
    MfProblem a = benchmark_reflected_mf();
    a.flags.driver_depends_on_ztilde = true;
    const auto s = make_setup(a, 10, 500, 12);
    const auto rep = comparison_check(a, a, s.X, s.noise);
    EXPECT_FALSE(rep.certified);
    EXPECT_FALSE(rep.note.empty());
}

TEST(SolveFrozen, RejectsForeignGrid) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 10, 300, 13);
    const auto sol = solve_reflected(p, s.X, s.noise);
    const auto t = make_setup(p, 5, 300, 13);
    EXPECT_THROW(solve_frozen(p, t.X, t.noise, s.X, sol, StepRule::reflect()), std::invalid_argument);
}

TEST(SolveFrozen, ReproducesLawSolutionOnSamePaths) {
    const MfProblem p = benchmark_reflected_mf();
    const auto s = make_setup(p, 10, 1000, 14);
    SolverConfig cfg;
    cfg.tol_picard = 1e-12;
    cfg.max_picard = 50;
    const auto sol = solve_reflected(p, s.X, s.noise, cfg);
    const auto again = solve_frozen(p, s.X, s.noise, s.X, sol, StepRule::reflect(), cfg);
    EXPECT_NEAR(again.mean_y(0), sol.mean_y(0), 1e-5);
}

TEST(StepRule, ApplyVariants) {
    EXPECT_EQ(StepRule::free().apply(0.1, 0.5, 0.01), 0.1);
    EXPECT_EQ(StepRule::reflect().apply(0.1, 0.5, 0.01), 0.5);
    EXPECT_EQ(StepRule::reflect().apply(0.7, 0.5, 0.01), 0.7);
    EXPECT_NEAR(StepRule::penalize(10.0).apply(0.1, 0.5, 0.01), 0.1 + 0.1 * 0.4, 1e-15);
    EXPECT_NEAR(StepRule::penalize(1000.0).apply(0.1, 0.5, 0.01), 0.1 + 10.0 / 11.0 * 0.4, 1e-15);
    EXPECT_THROW(StepRule::penalize(-1.0), std::invalid_argument);
}

}  // namespace
}  // namespace rmf
