#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "rmfbsde/pde_obstacle.hpp"
#include "rmfbsde/problems.hpp"
#include "test_problems.hpp"

namespace rmf {
namespace {

TEST(Tridiagonal, MatchesDirectSolution) {
    const std::vector<double> sub{0.0, -1.0, -1.0, -1.0}, diag{4.0, 4.0, 4.0, 4.0}, sup{-1.0, -1.0, -1.0, 0.0};
    const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
    std::vector<double> rhs(4);
    for (std::size_t k = 0; k < 4; ++k) {
        rhs[k] = diag[k] * x[k] + (k > 0 ? sub[k] * x[k - 1] : 0.0) + (k < 3 ? sup[k] * x[k + 1] : 0.0);
    }
    detail::solve_tridiagonal(sub, diag, sup, rhs);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(rhs[k], x[k], 1e-14);
}

TEST(SpaceTimeGrid, Construction) {
    const SpaceTimeGrid g(TimeGrid(1.0, 4), -1.0, 1.0, 4);
    EXPECT_EQ(g.points(), 5u);
    EXPECT_DOUBLE_EQ(g.dx(), 0.5);
    EXPECT_EQ(g.x(4), 1.0);
    EXPECT_THROW(SpaceTimeGrid(TimeGrid(1.0, 4), 1.0, -1.0, 4), std::invalid_argument);
    EXPECT_THROW(SpaceTimeGrid(TimeGrid(1.0, 4), -1.0, 1.0, 1), std::invalid_argument);
}

// u_t + (vol^2/2) u_xx = 0 with u(T, x) = x^2 has u(t, x) = x^2 + vol^2 (T - t).
TEST(Pde, HeatEquationWithQuadraticTerminal) {
    MfProblem p = testing::brownian_problem(0.2);
    testing::set_terminal(p, [](double x) { return x * x; });
    const TimeGrid tg(1.0, 200);
    const auto noise = sample_brownian(tg, 10, 1, {1, 0});
    const auto law = simulate_law_ensemble(p, tg, noise);
    const SpaceTimeGrid g(tg, -1.5, 1.5, 300);
    const auto u = solve_nonlocal_pde(p, StepRule::free(), g, law);
    EXPECT_TRUE(u.valid);
    for (double x : {-0.4, 0.0, 0.3}) EXPECT_NEAR(u.at(0, x), x * x + 0.04, 2e-4) << "x = " << x;
    EXPECT_NEAR(u.at(100, 0.1), 0.01 + 0.02, 2e-4);
}

TEST(Pde, LinearDriverDiscount) {
    MfProblem p = testing::brownian_problem(0.3);
    testing::set_terminal(p, [](double) { return 1.0; });
    testing::set_local_driver(p, [](const AgentView& a) { return -a.y; });
    const TimeGrid tg(1.0, 400);
    const auto law = simulate_law_ensemble(p, tg, sample_brownian(tg, 10, 1, {2, 0}));
    const SpaceTimeGrid g(tg, -2.0, 2.0, 80);
    const auto u = solve_nonlocal_pde(p, StepRule::free(), g, law);
    EXPECT_NEAR(u.at(0, 0.0), std::exp(-1.0), 2e-3);
}

struct BenchmarkPde {
    MfProblem p = benchmark_reflected_mf();
    TimeGrid tg{1.0, 20};
    PathEnsemble law = simulate_law_ensemble(p, tg, sample_brownian(tg, 2000, 1, {3, 0}));
    SpaceTimeGrid g = default_space_grid(p, law, 60);
};

TEST(Pde, ObstacleSolutionStaysAboveObstacle) {
    const BenchmarkPde b;
    const auto u = solve_obstacle_pde(b.p, b.g, b.law);
    for (std::size_t i = 0; i <= b.tg.steps(); ++i) {
        for (std::size_t j = 0; j < b.g.points(); ++j) {
            const double x = b.g.x(j);
            EXPECT_GE(u(i, j), benchmark_profile(x) - 1e-14);
        }
    }
    EXPECT_EQ(u.level(), "obstacle-limit");
}

TEST(Pde, PenalizedIncreasesTowardObstacleLimit) {
    const BenchmarkPde b;
    const auto lim = solve_obstacle_pde(b.p, b.g, b.law);
    double prev_gap = INFINITY;
    for (double n : {4.0, 64.0, 1024.0}) {
        const auto u = solve_penalized_pde(b.p, n, b.g, b.law);
        double gap = 0.0;
        for (std::size_t j = 0; j < b.g.points(); ++j) gap = std::max(gap, std::abs(u(0, j) - lim(0, j)));
        EXPECT_LT(gap, prev_gap) << "n = " << n;
        prev_gap = gap;
    }
    EXPECT_LT(prev_gap, 0.01);
    const auto rep = lipschitz_report(b.p, {1, 4, 16, 64, 256}, b.g, b.law);
    EXPECT_LT(rep.ratio, 2.0);
    for (std::size_t l = 1; l < rep.monotone_violation.size(); ++l) EXPECT_LE(rep.monotone_violation[l], 0.01);
}

TEST(Pde, ExplicitSchemeEnforcesCfl) {
    const BenchmarkPde b;
    PdeConfig cfg;
    cfg.scheme = DiffusionScheme::explicit_euler;
    const SpaceTimeGrid fine(b.tg, b.g.x_min(), b.g.x_max(), 2000);
    EXPECT_THROW(solve_nonlocal_pde(b.p, StepRule::reflect(), fine, b.law, cfg), std::invalid_argument);
    const SpaceTimeGrid coarse(b.tg, b.g.x_min(), b.g.x_max(), 10);
    const auto ue = solve_nonlocal_pde(b.p, StepRule::reflect(), coarse, b.law, cfg);
    const auto ui = solve_nonlocal_pde(b.p, StepRule::reflect(), coarse, b.law);
    EXPECT_NEAR(ue.at(0, 0.0), ui.at(0, 0.0), 0.05);
}

TEST(Pde, RejectsUnsupportedInput) {
    const BenchmarkPde b;
    MfProblem none = b.p;
    none.obstacle.reset();
    EXPECT_THROW(solve_obstacle_pde(none, b.g, b.law), std::invalid_argument);
    EXPECT_THROW(solve_penalized_pde(b.p, 0.5, b.g, b.law), std::invalid_argument);
    const TimeGrid other(1.0, 10);
    const SpaceTimeGrid g2(other, -1.0, 1.0, 20);
    EXPECT_THROW(solve_obstacle_pde(b.p, g2, b.law), std::invalid_argument);
}

TEST(Pde, GridFunctionCsv) {
    const SpaceTimeGrid g(TimeGrid(1.0, 1), 0.0, 1.0, 2);
    const GridFunction u(g, "x", 4.0, false);
    std::ostringstream os;
    u.write_csv(os);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, 6), "t,x,u\n");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 7);
    EXPECT_EQ(u.at(0, 5.0), 0.0);
}

}  // namespace
}  // namespace rmf
