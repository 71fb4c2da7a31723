#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmfbsde/analytic_oracle.hpp"
#include "rmfbsde/binomial.hpp"

namespace rmf::oracle {
namespace {

double simpson(auto f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

TEST(Oracle, TruncatedSecondMomentMatchesQuadrature) {
    const double e = gaussian_truncated_second_moment();
    EXPECT_NEAR(e, 0.516058, 1e-6);
    const double q = simpson([](double z) { return std::min(z * z, 1.0) * normal_pdf(z); }, -12.0, 12.0, 240000);
    EXPECT_NEAR(e, q, 1e-9);
    EXPECT_EQ(gaussian_truncated_second_moment(0.0), 0.0);
    EXPECT_EQ(gaussian_truncated_second_moment(INFINITY), 1.0);
    EXPECT_THROW(gaussian_truncated_second_moment(NAN), std::invalid_argument);
}

TEST(Oracle, ExpectedYSolvesIntegralEquation) {
    // m(t) = E[xi] - int_t^2 m(s) ds
    for (double t : {0.0, 0.7, 1.5, 2.0}) {
        const double integral = simpson([](double s) { return expected_y(s); }, t, 2.0, 2000);
        EXPECT_NEAR(expected_y(t), gaussian_truncated_second_moment() - integral, 1e-10);
    }
    EXPECT_THROW(expected_y(-0.1), std::invalid_argument);
    EXPECT_THROW(expected_y(2.1), std::invalid_argument);
}

TEST(Oracle, ViolationProbability) {
    const auto c = example31_constants();
    EXPECT_NEAR(c.violation_prob, 0.4321, 1e-4);
    EXPECT_NEAR(c.threshold, c.e_xi * (1.0 - std::exp(-1.0)), 1e-15);
    EXPECT_NEAR(c.violation_prob, 2.0 * normal_cdf(std::sqrt(c.threshold)) - 1.0, 1e-14);
    EXPECT_EQ(violation_probability(c.e_xi), c.violation_prob);
    EXPECT_EQ(probability_capped_square_below(0.0), 0.0);
    EXPECT_EQ(probability_capped_square_below(1.5), 1.0);
}

TEST(Oracle, SeriesRemainder) {
    EXPECT_NEAR(series_mean_remainder_bound(0.0, 10, 1.0), 6.139e-5, 1e-7);
    double direct = std::exp(2.0), term = 1.0;
    direct -= 1.0;
    for (int i = 1; i <= 10; ++i) {
        term *= 2.0 / i;
        direct -= term;
    }
    EXPECT_NEAR(series_mean_remainder_bound(0.0, 10, 1.0), direct, 1e-12);
    EXPECT_NEAR(series_mean_remainder_bound(1.0, 0, 2.0), 2.0 * (std::exp(1.0) - 1.0), 1e-12);
    EXPECT_EQ(series_mean_remainder_bound(2.0, 3, 1.0), 0.0);
    EXPECT_THROW(series_mean_remainder_bound(0.0, -1, 1.0), std::invalid_argument);
    EXPECT_THROW(series_mean_remainder_bound(0.0, 1, 0.0), std::invalid_argument);
    EXPECT_THROW(series_mean_remainder_bound(3.0, 1, 1.0), std::invalid_argument);
}

TEST(Oracle, PenalizedObstacleOde) {
    const std::vector<double> t{0.0, 0.5, 1.0};
    const auto zero = penalized_obstacle_ode(0.0, t);
    for (double v : zero) EXPECT_EQ(v, 0.0);
    const auto big = penalized_obstacle_ode(1000.0, t);
    EXPECT_NEAR(big[0], 1.0 - 1e-3, 2e-6);
    EXPECT_NEAR(big[1], 0.5 - 1e-3, 2e-6);
    EXPECT_EQ(big[2], 0.0);
    // n = 1: y(s) = s - 1 + e^{-s} in s = 1 - t
    const auto one = penalized_obstacle_ode(1.0, t);
    EXPECT_NEAR(one[0], std::exp(-1.0), 1e-10);
    EXPECT_NEAR(one[1], -0.5 + std::exp(-0.5), 1e-10);
    const std::vector<double> bad{1.5};
    EXPECT_THROW(penalized_obstacle_ode(1.0, bad), std::invalid_argument);
    EXPECT_THROW(penalized_obstacle_ode(-1.0, t), std::invalid_argument);
}

TEST(Binomial, ReferencePut) {
    const double v = binomial_american_put({});
    EXPECT_NEAR(v, 6.08999, 5e-5);
    // American exceeds the European Black-Scholes value 5.5735.
    EXPECT_GT(v, 5.5735);
    PutParams coarse;
    coarse.steps = 500;
    EXPECT_NEAR(binomial_american_put(coarse), v, 5e-3);
}

TEST(Binomial, ZeroVolatility) {
    PutParams p;
    p.vol = 0.0;
    EXPECT_EQ(binomial_american_put(p), 0.0);
    p.strike = 110.0;
    EXPECT_NEAR(binomial_american_put(p), 10.0, 1e-12);
    p.strike = 0.0;
    p.vol = 0.2;
    EXPECT_EQ(binomial_american_put(p), 0.0);
}

TEST(Binomial, RejectsBadInput) {
    PutParams p;
    p.steps = 0;
    EXPECT_THROW(binomial_american_put(p), std::invalid_argument);
    p.steps = 10;
    p.spot = 0.0;
    EXPECT_THROW(binomial_american_put(p), std::invalid_argument);
    p.spot = 100.0;
    p.vol = -0.1;
    EXPECT_THROW(binomial_american_put(p), std::invalid_argument);
}

}  // namespace
}  // namespace rmf::oracle
