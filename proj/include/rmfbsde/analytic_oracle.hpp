/**
 * @file analytic_oracle.hpp
 * @brief Closed-form reference values for the interacting example with driver -y~ on [0, 2].
 *
 * With xi = min(W_1^2, 1) and one independent copy in the driver:
 *   E[Y_t]        = E[xi] e^{-(2-t)}
 *   E[Y_1 | W]    = xi - E[xi] (1 - e^{-1}), negative on {W_1^2 < E[xi](1 - e^{-1})}.
 */

#ifndef RMFBSDE_ANALYTIC_ORACLE_HPP
#define RMFBSDE_ANALYTIC_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>
#include <stdexcept>

namespace rmf::oracle {

inline constexpr double kHorizon = 2.0;

/// Standard normal CDF via erfc (full double accuracy in both tails).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/**
 * E[min(Z^2, c)] for standard normal Z; c = +inf gives 1, c <= 0 gives 0.
 * With a = sqrt(c): (2 Phi(a) - 1) - 2 a phi(a) + 2 c (1 - Phi(a)).
 */
inline double gaussian_truncated_second_moment(double cap = 1.0) {
    if (std::isnan(cap)) throw std::invalid_argument("gaussian_truncated_second_moment: cap is NaN");
    if (cap <= 0.0) return 0.0;
    if (std::isinf(cap)) return 1.0;
    const double a = std::sqrt(cap);
    const double tail = std::erfc(a / std::numbers::sqrt2);  // P(|Z| > a)
    return (1.0 - tail) - 2.0 * a * normal_pdf(a) + cap * tail;
}

/// e_xi e^{-(2-t)} for t in [0, 2].
inline double expected_y(double t) {
    if (!(t >= 0.0 && t <= kHorizon)) throw std::invalid_argument("expected_y: t must lie in [0, 2]");
    return gaussian_truncated_second_moment() * std::exp(-(kHorizon - t));
}

/// P{min(Z^2, 1) < thr} for a threshold thr.
inline double probability_capped_square_below(double threshold) {
    if (threshold <= 0.0) return 0.0;
    if (threshold > 1.0) return 1.0;
    return 1.0 - std::erfc(std::sqrt(threshold) / std::numbers::sqrt2);
}

struct Example31Constants {
    double horizon = kHorizon;
    double e_xi = 0.0;
    double threshold = 0.0;       ///< e_xi (1 - e^{-1})
    double violation_prob = 0.0;  ///< P{E[Y_1 | W] < 0}
};

inline Example31Constants example31_constants() {
    Example31Constants c;
    c.e_xi = gaussian_truncated_second_moment();
    c.threshold = c.e_xi * (1.0 - std::exp(-1.0));
    c.violation_prob = probability_capped_square_below(c.threshold);
    return c;
}

inline double violation_probability() { return example31_constants().violation_prob; }

/// Same event probability with a substitute for E[xi].
inline double violation_probability(double e_xi) {
    return probability_capped_square_below(e_xi * (1.0 - std::exp(-1.0)));
}

/**
 * C sum_{i > depth} (T - t)^i / i!: the tail left after truncating the
 * exponential series of the a-priori bound |Y_t| <= C e^{T-t}.
 */
inline double series_mean_remainder_bound(double t, long long depth, double bound_c, double horizon = kHorizon) {
    if (depth < 0) throw std::invalid_argument("series_mean_remainder_bound: depth must be >= 0");
    if (!(bound_c > 0.0)) throw std::invalid_argument("series_mean_remainder_bound: C must be > 0");
    if (!(t >= 0.0 && t <= horizon)) throw std::invalid_argument("series_mean_remainder_bound: t outside [0, T]");
    const double s = horizon - t;
    if (s == 0.0) return 0.0;
    double term = 1.0;
    for (long long i = 1; i <= depth; ++i) term *= s / static_cast<double>(i);
    double tail = 0.0;
    for (long long i = depth + 1;; ++i) {
        term *= s / static_cast<double>(i);
        tail += term;
        if (term < tail * std::numeric_limits<double>::epsilon() || term == 0.0) break;
    }
    return bound_c * tail;
}

/**
 * Penalized deterministic obstacle problem on [0, 1]: y(1) = 0,
 * -y'(t) = n (y - (1 - t))^-. Classical RK4 run backwards with step dt;
 * returns y at each requested time (which must lie in [0, 1]).
 */
inline std::vector<double> penalized_obstacle_ode(double n, std::span<const double> times, double dt = 1e-5) {
    if (!(n >= 0.0)) throw std::invalid_argument("penalized_obstacle_ode: n must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("penalized_obstacle_ode: dt must be > 0");
    for (double t : times) {
        if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("penalized_obstacle_ode: t outside [0, 1]");
    }
    // s = 1 - t runs forward; dy/ds = n (y - s)^-.
    auto rhs = [n](double s, double y) { return n * std::max(s - y, 0.0); };
    const auto steps = static_cast<long long>(std::ceil(1.0 / dt));
    const double h = 1.0 / static_cast<double>(steps);
    std::vector<double> path(static_cast<std::size_t>(steps) + 1);
    double y = 0.0;
    path[0] = y;
    for (long long k = 0; k < steps; ++k) {
        const double s = static_cast<double>(k) * h;
        const double k1 = rhs(s, y);
        const double k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1);
        const double k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2);
        const double k4 = rhs(s + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        path[static_cast<std::size_t>(k) + 1] = y;
    }
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        const double pos = (1.0 - t) / h;
        const auto k = std::min(static_cast<std::size_t>(pos), path.size() - 2);
        const double w = pos - static_cast<double>(k);
        out.push_back((1.0 - w) * path[k] + w * path[k + 1]);
    }
    return out;
}

}  // namespace rmf::oracle

#endif  // RMFBSDE_ANALYTIC_ORACLE_HPP
