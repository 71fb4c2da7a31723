/**
 * @file problems.hpp
 * @brief Canonical problem instances addressable by name.
 */

#ifndef RMFBSDE_PROBLEMS_HPP
#define RMFBSDE_PROBLEMS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmfbsde/problem.hpp"

namespace rmf {

enum class Example31Terminal {
    capped_square,  ///< xi = |W_1|^2 ^ 1
    zero,           ///< xi' = 0
};

/**
 * Interacting BSDE with driver -y~ (one independent copy), T = 2, barrier -e^T.
 *
 * The state is X_t = W_{t^1}: unit diffusion before t = 1, frozen afterwards,
 * so the path functional |W_1|^2 ^ 1 is the Markov terminal function min(x^2, 1).
 */
inline MfProblem example31_problem(Example31Terminal terminal = Example31Terminal::capped_square) {
    MfProblem p;
    p.name = terminal == Example31Terminal::zero ? "example31_zero" : "example31";
    p.horizon = 2.0;
    p.x0 = {0.0};
    p.drift = local_coefficient<StateView>(1, [](const StateView&, std::span<double> out) { out[0] = 0.0; });
    p.diffusion = local_coefficient<StateView>(1, [](const StateView& s, std::span<double> out) {
        out[0] = s.t < 1.0 ? 1.0 : 0.0;
    });
    p.driver = separable_scalar<AgentView>(
        1, [](const AgentView& other, std::span<double> f) { f[0] = other.y; },
        [](const AgentView&, std::span<const double> m) { return -m[0]; });
    if (terminal == Example31Terminal::zero) {
        p.terminal = local_coefficient<StateView>(1, [](const StateView&, std::span<double> out) { out[0] = 0.0; });
    } else {
        p.terminal = local_coefficient<StateView>(1, [](const StateView& s, std::span<double> out) {
            out[0] = std::min(s.x[0] * s.x[0], 1.0);
        });
    }
    const double barrier = -std::exp(p.horizon);
    p.obstacle = [barrier](double, std::span<const double>) { return barrier; };
    p.flags.lipschitz = {0.0, 0.0, 1.0, 2.0, 0.0};
    // |Y_t| <= e^{T-t} a priori, so the linear driver only ever sees a bounded range.
    p.flags.bounded_coefficients = true;
    p.flags.g_nondecreasing_in_ytilde = false;
    return p;
}

/**
 * American put as a classical reflected BSDE in log-price coordinates.
 *
 * x = log S follows dx = (r - vol^2/2) dt + vol dW (Euler is exact for these
 * constant coefficients); driver -r*y; obstacle and terminal max(K - e^x, 0).
 */
inline ClassicalRbsdeProblem american_put_problem(double strike, double rate, double vol, double spot,
                                                  double maturity) {
    if (!(strike >= 0.0)) throw std::invalid_argument("american_put_problem: strike must be >= 0");
    if (!(vol > 0.0)) throw std::invalid_argument("american_put_problem: vol must be > 0");
    if (!(spot > 0.0)) throw std::invalid_argument("american_put_problem: spot must be > 0");
    if (!(maturity > 0.0)) throw std::invalid_argument("american_put_problem: maturity must be > 0");
    if (!std::isfinite(rate)) throw std::invalid_argument("american_put_problem: rate must be finite");
    MfProblem p;
    p.name = "american_put";
    p.horizon = maturity;
    p.x0 = {std::log(spot)};
    const double mu = rate - 0.5 * vol * vol;
    p.drift = local_coefficient<StateView>(1, [mu](const StateView&, std::span<double> out) { out[0] = mu; });
    p.diffusion = local_coefficient<StateView>(1, [vol](const StateView&, std::span<double> out) { out[0] = vol; });
    p.driver = local_coefficient<AgentView>(1, [rate](const AgentView& a, std::span<double> out) {
        out[0] = -rate * a.y;
    });
    auto payoff = [strike](std::span<const double> x) { return std::max(strike - std::exp(x[0]), 0.0); };
    p.terminal = local_coefficient<StateView>(1, [payoff](const StateView& s, std::span<double> out) {
        out[0] = payoff(s.x);
    });
    p.obstacle = [payoff](double, std::span<const double> x) { return payoff(x); };
    p.flags.lipschitz = {0.0, 0.0, std::abs(rate), strike, strike};
    p.classical = true;
    p.driver_uses_copy_values = false;
    return p;
}

/// Bounded put-like profile 0.5*(1 - tanh(2x)), Lipschitz constant 1.
inline double benchmark_profile(double x) { return 0.5 * (1.0 - std::tanh(2.0 * x)); }

/**
 * One-dimensional reflected mean-field benchmark used by the convergence studies.
 *
 *   b(t,x,x~)      = 0.5 (x~ - x)
 *   sigma(t,x,x~)  = 0.3 + 0.1 cos(x~)
 *   g(t,(x,y,z),(x~,y~,z~)) = -0.5 tanh(y) + 0.25 tanh(y~) + 0.1 cos(x - x~) + 0.1 tanh(z) - 0.2
 *   Phi(x,x~)      = psi(x) + 0.05 (1 + cos(x~))
 *   h(t,x)         = psi(x),   psi(x) = 0.5 (1 - tanh(2x))
 *
 * g, Phi and h are bounded and Lipschitz, g is nondecreasing in y~ and does not
 * read z~, and h(T,x) <= Phi(x,x~) for all (x,x~). All copy dependences are
 * separable: cos(x - x~) = cos x cos x~ + sin x sin x~.
 */
inline MfProblem benchmark_reflected_mf() {
    MfProblem p;
    p.name = "benchmark_reflected_mf";
    p.horizon = 1.0;
    p.x0 = {0.0};

    p.drift.out_dim = 1;
    p.drift.feature_dim = 1;
    p.drift.features = [](const StateView& o, std::span<double> f) { f[0] = o.x[0]; };
    p.drift.combine = [](const StateView& s, std::span<const double> m, std::span<double> out) {
        out[0] = 0.5 * (m[0] - s.x[0]);
    };
    p.drift.pairwise = [](const StateView& s, const StateView& o, std::span<double> out) {
        out[0] = 0.5 * (o.x[0] - s.x[0]);
    };

    p.diffusion.out_dim = 1;
    p.diffusion.feature_dim = 1;
    p.diffusion.features = [](const StateView& o, std::span<double> f) { f[0] = std::cos(o.x[0]); };
    p.diffusion.combine = [](const StateView&, std::span<const double> m, std::span<double> out) {
        out[0] = 0.3 + 0.1 * m[0];
    };
    p.diffusion.pairwise = [](const StateView&, const StateView& o, std::span<double> out) {
        out[0] = 0.3 + 0.1 * std::cos(o.x[0]);
    };

    p.driver = separable_scalar<AgentView>(
        3,
        [](const AgentView& o, std::span<double> f) {
            f[0] = std::tanh(o.y);
            f[1] = std::cos(o.x[0]);
            f[2] = std::sin(o.x[0]);
        },
        [](const AgentView& a, std::span<const double> m) {
            return -0.5 * std::tanh(a.y) + 0.25 * m[0] +
                   0.1 * (std::cos(a.x[0]) * m[1] + std::sin(a.x[0]) * m[2]) + 0.1 * std::tanh(a.z[0]) - 0.2;
        });

    p.terminal = separable_scalar<StateView>(
        1, [](const StateView& o, std::span<double> f) { f[0] = std::cos(o.x[0]); },
        [](const StateView& s, std::span<const double> m) { return benchmark_profile(s.x[0]) + 0.05 * (1.0 + m[0]); });
    p.obstacle = [](double, std::span<const double> x) { return benchmark_profile(x[0]); };

    p.flags.lipschitz = {0.5, 0.1, 0.5, 1.05, 1.0};
    p.flags.bounded_coefficients = true;
    p.flags.g_nondecreasing_in_ytilde = true;
    return p;
}

/**
 * Deterministic reflected problem: T = 1, xi = 0, g = 0, L_t = 1 - t.
 * The reflected solution is Y_t = 1 - t with K_t = t.
 */
inline ClassicalRbsdeProblem deterministic_obstacle_problem() {
    MfProblem p;
    p.name = "deterministic_obstacle";
    p.horizon = 1.0;
    p.x0 = {0.0};
    auto zero_state = [](const StateView&, std::span<double> out) { out[0] = 0.0; };
    p.drift = local_coefficient<StateView>(1, zero_state);
    p.diffusion = local_coefficient<StateView>(1, zero_state);
    p.driver = local_coefficient<AgentView>(1, [](const AgentView&, std::span<double> out) { out[0] = 0.0; });
    p.terminal = local_coefficient<StateView>(1, zero_state);
    p.obstacle = [](double t, std::span<const double>) { return 1.0 - t; };
    p.flags.lipschitz = {0.0, 0.0, 0.0, 0.0, 0.0};
    p.flags.bounded_coefficients = true;
    p.classical = true;
    p.driver_uses_copy_values = false;
    return p;
}

/**
 * Benchmark forward dynamics and terminal function with g = 0. With an obstacle
 * level the constant obstacle sits at that level; a level below inf Phi never binds.
 */
inline MfProblem benchmark_zero_driver(std::optional<double> obstacle_level = std::nullopt) {
    MfProblem p = benchmark_reflected_mf();
    p.name = "benchmark_zero_driver";
    p.driver = local_coefficient<AgentView>(1, [](const AgentView&, std::span<double> out) { out[0] = 0.0; });
    p.driver_uses_copy_values = false;
    p.flags.lipschitz.driver = 0.0;
    if (obstacle_level) {
        const double level = *obstacle_level;
        p.obstacle = [level](double, std::span<const double>) { return level; };
        p.flags.lipschitz.obstacle = 0.0;
    } else {
        p.obstacle.reset();
    }
    return p;
}

/// The benchmark with its obstacle replaced by a constant level (driver kept).
inline MfProblem benchmark_with_flat_obstacle(double level) {
    MfProblem p = benchmark_reflected_mf();
    p.name = "benchmark_flat_obstacle";
    p.obstacle = [level](double, std::span<const double>) { return level; };
    p.flags.lipschitz.obstacle = 0.0;
    return p;
}

/// Parameters of the named families; unused entries are ignored by a family.
struct ProblemParams {
    double strike = 100.0;
    double rate = 0.05;
    double vol = 0.2;
    double spot = 100.0;
    double maturity = 1.0;
};

inline const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names{"example31", "example31_zero", "american_put",
                                                "benchmark_reflected_mf", "deterministic_obstacle"};
    return names;
}

inline MfProblem make_named_problem(const std::string& name, const ProblemParams& params = {}) {
    if (name == "example31") return example31_problem();
    if (name == "example31_zero") return example31_problem(Example31Terminal::zero);
    if (name == "american_put") {
        return american_put_problem(params.strike, params.rate, params.vol, params.spot, params.maturity);
    }
    if (name == "benchmark_reflected_mf") return benchmark_reflected_mf();
    if (name == "deterministic_obstacle") return deterministic_obstacle_problem();
    std::string valid;
    for (const auto& n : problem_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown problem '" + name + "'; valid names: " + valid);
}

}  // namespace rmf

#endif  // RMFBSDE_PROBLEMS_HPP
