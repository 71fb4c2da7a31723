#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmfbsde/particle_system.hpp"
#include "rmfbsde/problems.hpp"
#include "test_problems.hpp"

namespace rmf {
namespace {

TEST(ParticleSystem, RejectsEmptyInteractionAndUnboundedProblems) {
    const TimeGrid grid(1.0, 5);
    EXPECT_THROW(solve_rbsde_n(benchmark_reflected_mf(), 0, 10, grid, {1, 0}), std::invalid_argument);
    const MfProblem put = american_put_problem(100, 0.05, 0.2, 100, 1.0);
    EXPECT_THROW(solve_rbsde_n(put, 2, 10, grid, {1, 0}), std::invalid_argument);
    const auto noise = sample_brownian(grid, 10, 1, {1, 0});
    EXPECT_THROW(solve_rbsde_n(benchmark_reflected_mf(), 2, noise), std::invalid_argument);
}

// With no copy dependence the interacting system is N+1 independent copies of the classical solve.
TEST(ParticleSystem, DecoupledProblemMatchesClassicalSolve) {
    MfProblem p = testing::brownian_problem(0.4);
    testing::set_terminal(p, [](double x) { return 0.5 * (1.0 - std::tanh(2.0 * x)) + 0.05; });
    testing::set_local_driver(p, [](const AgentView& a) { return -0.5 * std::tanh(a.y) + 0.1 * std::tanh(a.z[0]); });
    p.obstacle = [](double, std::span<const double> x) { return 0.5 * (1.0 - std::tanh(2.0 * x[0])); };
    const TimeGrid grid(1.0, 10);
    const auto noise = universe_noise(grid, 4, 300, 1, {3, 0});
    ParticleConfig cfg;
    const auto ps = solve_rbsde_n(p, 3, noise, cfg);
    const auto X = simulate_law_ensemble(p, grid, noise);
    const auto direct = solve_reflected(p, X, noise, cfg.solver);
    for (std::size_t k = 0; k < direct.y_all().size(); ++k) {
        EXPECT_NEAR(ps.solution().y_all()[k], direct.y_all()[k], 1e-12);
        EXPECT_NEAR(ps.solution().k_all()[k], direct.k_all()[k], 1e-12);
    }
}

TEST(ParticleSystem, SeparableMatchesPairwise) {
    const MfProblem p = benchmark_reflected_mf();
    const TimeGrid grid(1.0, 8);
    const auto noise = universe_noise(grid, 4, 150, 1, {4, 0});
    ParticleConfig fast;
    ParticleConfig slow;
    slow.solver.force_pairwise = true;
    const auto a = solve_rbsde_n(p, 3, noise, fast);
    const auto b = solve_rbsde_n(p, 3, noise, slow);
    for (std::size_t k = 0; k < a.solution().y_all().size(); ++k) {
        EXPECT_NEAR(a.solution().y_all()[k], b.solution().y_all()[k], 1e-9);
    }
}

TEST(ParticleSystem, UniversesAreExchangeable) {
    const MfProblem p = benchmark_reflected_mf();
    const TimeGrid grid(1.0, 10);
    const auto ps = solve_rbsde_n(p, 5, 800, grid, {5, 0});
    EXPECT_EQ(ps.universes(), 6u);
    const auto rep = ps.exchangeability(5);
    EXPECT_EQ(rep.universe_mean.size(), 6u);
    EXPECT_LT(rep.max_ratio, 4.5);
}

TEST(ParticleSystem, ReflectionHolds) {
    const MfProblem p = benchmark_reflected_mf();
    const TimeGrid grid(1.0, 10);
    const auto ps = solve_rbsde_n(p, 3, 500, grid, {6, 0});
    const auto inv = check_reflection(p, ps.paths(), ps.solution(), ps.terminal());
    EXPECT_GE(inv.min_obstacle_gap, 0.0);
    EXPECT_TRUE(inv.k_nondecreasing);
    EXPECT_LE(inv.max_skorokhod, 1e-10);
}

TEST(ParticleSystem, DefaultSubEnsemble) {
    EXPECT_EQ(default_sub_ensemble(8), 1111u);
    EXPECT_EQ(default_sub_ensemble(512), 500u);
    EXPECT_EQ(default_sub_ensemble(1, 100, 10), 50u);
}

TEST(FitSlope, ExactLineAndInterval) {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y{1.0, 0.5, 0.0, -0.5};
    const auto f = fit_slope(x, y);
    EXPECT_NEAR(f[0], -0.5, 1e-14);
    EXPECT_NEAR(f[1], -0.5, 1e-10);
    EXPECT_NEAR(f[2], -0.5, 1e-10);
    const std::vector<double> noisy{1.0, 0.6, -0.1, -0.5};
    const auto g = fit_slope(x, noisy);
    EXPECT_LT(g[1], g[0]);
    EXPECT_GT(g[2], g[0]);
    const std::vector<double> x2{0.0, 1.0}, y2{0.0, 2.0};
    EXPECT_TRUE(std::isnan(fit_slope(x2, y2)[1]));
}

TEST(Counterexample, SmallRunShowsViolation) {
    const TimeGrid grid(2.0, 40);
    ParticleConfig cfg;
    cfg.solver.basis = RegressionBasis::piecewise(2, 20);
    const auto rep = comparison_counterexample(20000, grid, {31, 0}, cfg);
    EXPECT_TRUE(rep.zero_solution_exact);
    EXPECT_NEAR(rep.p_y1_negative, rep.analytic_probability, 0.05);
    EXPECT_GT(rep.p_xi_above_zero_data, 0.99);
    EXPECT_GT(rep.ordering.max_violation_fraction, 0.3);
    EXPECT_THROW(comparison_counterexample(10, TimeGrid(1.0, 10)), std::invalid_argument);
}

}  // namespace
}  // namespace rmf
