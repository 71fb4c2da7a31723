#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmfbsde/random.hpp"
#include "rmfbsde/regression.hpp"

namespace rmf {
namespace {

std::vector<double> gaussian_states(std::size_t n, std::uint64_t seed) {
    const CounterNormal gen({seed, 0});
    std::vector<double> x(n);
    for (std::size_t p = 0; p < n; ++p) x[p] = gen.normal(p, 0, 0);
    return x;
}

TEST(Regression, PolynomialFitsQuadraticExactly) {
    const auto x = gaussian_states(500, 1);
    std::vector<double> y(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) y[p] = 1.5 - 2.0 * x[p] + 0.25 * x[p] * x[p];
    const LeastSquares ls(x, 1, RegressionBasis::polynomial(2));
    const auto fit = ls.fit(y);
    for (std::size_t p = 0; p < x.size(); ++p) EXPECT_NEAR(fit.fitted[p], y[p], 1e-9);
    EXPECT_LT(fit.residual_variance, 1e-18);
    const std::vector<double> probe{0.3};
    EXPECT_NEAR(ls.predict(fit, probe)[0], 1.5 - 0.6 + 0.25 * 0.09, 1e-9);
}

TEST(Regression, TwoDimensionalTotalDegreeBasis) {
    const auto a = gaussian_states(400, 2);
    const auto b = gaussian_states(400, 3);
    std::vector<double> x(800), y(400);
    for (std::size_t p = 0; p < 400; ++p) {
        x[2 * p] = a[p];
        x[2 * p + 1] = b[p];
        y[p] = a[p] * b[p] - b[p] + 2.0;
    }
    EXPECT_EQ(RegressionBasis::polynomial(2).size(2), 6u);
    const auto fitted = estimate_conditional_expectation(y, x, 2, RegressionBasis::polynomial(2));
    for (std::size_t p = 0; p < 400; ++p) EXPECT_NEAR(fitted[p], y[p], 1e-9);
}

TEST(Regression, PiecewiseBeatsGlobalOnKink) {
    const auto x = gaussian_states(4000, 4);
    std::vector<double> y(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) y[p] = std::max(x[p] - 0.3, 0.0);
    const auto global = LeastSquares(x, 1, RegressionBasis::polynomial(2)).fit(y);
    const auto local = LeastSquares(x, 1, RegressionBasis::piecewise(1, 20)).fit(y);
    EXPECT_LT(local.residual_variance, 0.1 * global.residual_variance);
}

TEST(Regression, ConditionalMeanOfNoisyTarget) {
    const auto x = gaussian_states(20000, 5);
    const auto e = gaussian_states(20000, 6);
    std::vector<double> y(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) y[p] = x[p] * x[p] + e[p];
    const LeastSquares ls(x, 1, RegressionBasis::polynomial(3));
    const auto fit = ls.fit(y);
    const std::vector<double> probe{-1.0, 0.0, 1.0};
    const auto pred = ls.predict(fit, probe);
    EXPECT_NEAR(pred[0], 1.0, 0.05);
    EXPECT_NEAR(pred[1], 0.0, 0.05);
    EXPECT_NEAR(pred[2], 1.0, 0.05);
    EXPECT_NEAR(fit.residual_variance, 1.0, 0.05);
    EXPECT_GT(fit.standard_error, 0.0);
}

TEST(Regression, DegenerateStatesKeepExactMean) {
    std::vector<double> x(100, 0.25);
    std::vector<double> y(100);
    for (std::size_t p = 0; p < 100; ++p) y[p] = 0.5 + 1e-3 * static_cast<double>(p % 7);
    const LeastSquares ls(x, 1, RegressionBasis::polynomial(3));
    EXPECT_TRUE(ls.ridge_applied());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= 100.0;
    const auto fit = ls.fit(y);
    for (double f : fit.fitted) EXPECT_NEAR(f, mean, 1e-12);
}

TEST(Regression, RejectsTooFewSamples) {
    const std::vector<double> x{0.0, 1.0, 2.0};
    EXPECT_THROW(LeastSquares(x, 1, RegressionBasis::polynomial(3)), std::invalid_argument);
    EXPECT_THROW(LeastSquares(x, 2, RegressionBasis::polynomial(1)), std::invalid_argument);
    const std::vector<double> y{1.0, 2.0};
    EXPECT_THROW(estimate_conditional_expectation(y, x, 1, RegressionBasis::polynomial(0)), std::invalid_argument);
}

}  // namespace
}  // namespace rmf
