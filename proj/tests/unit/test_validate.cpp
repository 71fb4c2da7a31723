#include <gtest/gtest.h>

#include <cmath>

#include "rmfbsde/problems.hpp"
#include "rmfbsde/validate.hpp"
#include "test_problems.hpp"

namespace rmf {
namespace {

ValidationReport check(const MfProblem& p) {
    const TimeGrid grid(p.horizon, 10);
    return validate(p, sample_brownian(grid, 2000, p.noise_dim, {1, 0}));
}

TEST(Validate, BenchmarkPasses) {
    const auto rep = check(benchmark_reflected_mf());
    EXPECT_TRUE(rep.ok()) << (rep.failures.empty() ? "" : rep.failures.front());
    EXPECT_TRUE(rep.bounded_ok);
    EXPECT_TRUE(rep.monotone_in_ytilde_ok);
    EXPECT_EQ(rep.compatibility_violations, 0u);
}

TEST(Validate, NamedProblemsPass) {
    for (const char* name : {"deterministic_obstacle", "american_put", "example31"}) {
        const auto rep = check(make_named_problem(name));
        EXPECT_TRUE(rep.ok()) << name << ": " << (rep.failures.empty() ? "" : rep.failures.front());
    }
}

TEST(Validate, UnderstatedLipschitzConstantIsFlagged) {
    MfProblem p = benchmark_reflected_mf();
    p.flags.lipschitz.driver = 0.05;
    const auto rep = check(p);
    EXPECT_FALSE(rep.ok());
    bool driver_flagged = false;
    for (const auto& c : rep.coefficients) driver_flagged |= c.name == "driver" && !c.lipschitz_ok;
    EXPECT_TRUE(driver_flagged);
}

TEST(Validate, FalseBoundednessClaimIsFlagged) {
    MfProblem p = testing::brownian_problem();
    testing::set_terminal(p, [](double x) { return x * x; });
    p.flags.lipschitz.terminal = 1e9;
    const auto rep = check(p);
    EXPECT_FALSE(rep.bounded_ok);
}

TEST(Validate, ObstacleAboveTerminalIsFlagged) {
    MfProblem p = benchmark_reflected_mf();
    p.obstacle = [](double, std::span<const double> x) { return benchmark_profile(x[0]) + 0.2; };
    const auto rep = check(p);
    EXPECT_GT(rep.compatibility_violations, 0u);
    EXPECT_GT(rep.worst_compatibility_gap, 0.0);
    EXPECT_FALSE(rep.ok());
}

TEST(Validate, FalseMonotonicityClaimIsFlagged) {
    MfProblem p = testing::brownian_problem();
    p.driver = pairwise_scalar<AgentView>([](const AgentView&, const AgentView& o) { return -std::tanh(o.y); });
    p.classical = false;
    p.driver_uses_copy_values = true;
    p.flags.lipschitz.driver = 1.0;
    p.flags.g_nondecreasing_in_ytilde = true;
    const auto rep = check(p);
    EXPECT_FALSE(rep.monotone_in_ytilde_ok);
}

}  // namespace
}  // namespace rmf
