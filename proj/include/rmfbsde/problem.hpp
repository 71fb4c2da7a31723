#ifndef RMFBSDE_PROBLEM_HPP
#define RMFBSDE_PROBLEM_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmfbsde/mean_field.hpp"

namespace rmf {

/// Declared Lipschitz constants, in the sum-of-argument-differences form |F(a)-F(b)| <= C * sum|a_k-b_k|.
struct LipschitzBounds {
    double drift = 0.0;
    double diffusion = 0.0;
    double driver = 0.0;
    double terminal = 0.0;
    double obstacle = 0.0;
};

struct ProblemFlags {
    LipschitzBounds lipschitz;
    /// Driver, terminal function and obstacle are bounded (required by the particle system).
    bool bounded_coefficients = false;
    bool g_nondecreasing_in_ytilde = false;
    /// Driver reads the copy's z~; ordering certificates are refused for such drivers.
    bool driver_depends_on_ztilde = false;
};

using ObstacleFn = std::function<double(double t, std::span<const double> x)>;

/**
 * Coefficient bundle of a (reflected) mean-field forward-backward system.
 *
 *   dX = E[b(t, x, X~)]|_{x=X} dt + E[sigma(t, x, X~)]|_{x=X} dW,   X_0 = x0
 *   Y_t = E[Phi(x, X~_T)]|_{x=X_T} + int_t^T E[g(s, (X,Y,Z), (X~,Y~,Z~))] ds + K_T - K_t - int Z dW
 *   Y_t >= h(t, X_t),  int (Y - h) dK = 0
 *
 * The copy (X~, Y~, Z~) is realized numerically by an empirical measure.
 * Callables must be pure: no hidden state, safe to call concurrently.
 */
struct MfProblem {
    std::string name;
    std::size_t state_dim = 1;  ///< n
    std::size_t noise_dim = 1;  ///< d
    double horizon = 1.0;
    std::vector<double> x0;

    MeanFieldCoefficient<StateView> drift;      ///< out_dim n
    MeanFieldCoefficient<StateView> diffusion;  ///< out_dim n*d, row-major
    MeanFieldCoefficient<AgentView> driver;     ///< scalar
    MeanFieldCoefficient<StateView> terminal;   ///< scalar, evaluated with t = T
    std::optional<ObstacleFn> obstacle;         ///< empty means "no obstacle"

    ProblemFlags flags;
    /// Mean-field arguments are ignored by every coefficient.
    bool classical = false;
    /// Driver reads y~ or z~ of the copy, so the backward solve needs Picard sweeps.
    bool driver_uses_copy_values = true;

    bool has_obstacle() const noexcept { return obstacle.has_value(); }
    double obstacle_at(double t, std::span<const double> x) const { return (*obstacle)(t, x); }
};

/// Classical (non mean-field) reflected BSDE data; a problem whose copy arguments are ignored.
using ClassicalRbsdeProblem = MfProblem;

}  // namespace rmf

#endif  // RMFBSDE_PROBLEM_HPP
