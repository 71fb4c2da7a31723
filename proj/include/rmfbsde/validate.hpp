/**
 * @file validate.hpp
 * @brief Empirical assumption checks for an MfProblem (report-only, never throws on findings).
 *
 * Argument samples come from a law ensemble simulated on the supplied noise; BSDE
 * values (y, z, y~, z~) are drawn from a seeded Gaussian in a moderate range.
 * Lipschitz quotients are |F(a) - F(b)| / sum_k |a_k - b_k| over nearby and far pairs.
 */

#ifndef RMFBSDE_VALIDATE_HPP
#define RMFBSDE_VALIDATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rmfbsde/forward_sde.hpp"
#include "rmfbsde/problem.hpp"
#include "rmfbsde/random.hpp"

namespace rmf {

struct CoefficientCheck {
    std::string name;
    double declared_lipschitz = 0.0;
    double empirical_lipschitz = 0.0;
    bool lipschitz_ok = true;
    double max_abs_moderate = 0.0;  ///< sup |F| with states from the ensemble
    double max_abs_extreme = 0.0;   ///< sup |F| with states scaled far out
};

struct ValidationReport {
    std::vector<CoefficientCheck> coefficients;
    std::size_t samples = 0;
    bool bounded_ok = true;
    std::size_t compatibility_violations = 0;       ///< pairs with h(T,x) > Phi(x,x~)
    std::size_t mean_compatibility_violations = 0;  ///< points with h(T,x) > mean_q Phi(x, X_T^q)
    double worst_compatibility_gap = 0.0;           ///< max (h - Phi)^+
    bool monotone_in_ytilde_ok = true;
    std::vector<std::string> failures;

    bool ok() const noexcept { return failures.empty(); }
};

namespace detail {

struct ArgSample {
    double t;
    std::vector<double> x, xt, z, zt;
    double y, yt;
};

inline double sum_abs_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    return s;
}

inline double eval_state(const MeanFieldCoefficient<StateView>& c, const ArgSample& a, std::vector<double>& out) {
    out.assign(c.out_dim, 0.0);
    c.pairwise(StateView{a.t, a.x}, StateView{a.t, a.xt}, out);
    double m = 0.0;
    for (double v : out) m = std::max(m, std::abs(v));
    return m;
}

inline double eval_driver(const MeanFieldCoefficient<AgentView>& c, const ArgSample& a) {
    double out = 0.0;
    c.pairwise(AgentView{a.t, a.x, a.y, a.z}, AgentView{a.t, a.xt, a.yt, a.zt}, std::span<double>(&out, 1));
    return out;
}

}  // namespace detail

/**
 * @param problem  problem to check
 * @param samples  noise used to simulate the law ensemble that supplies state samples
 * @param seed     stream for the synthetic BSDE values and perturbations
 */
inline ValidationReport validate(const MfProblem& problem, const NoiseEnsemble& samples,
                                 RngSeed seed = {0x5EED, 7}) {
    ValidationReport rep;
    const PathEnsemble X = simulate_law_ensemble(problem, samples.grid(), samples);
    const std::size_t P = X.particles();
    const std::size_t M = X.grid().steps();
    const std::size_t n = problem.state_dim;
    const std::size_t d = problem.noise_dim;
    const CounterNormal gen(seed);
    const std::size_t count = std::min<std::size_t>(P, 10000);
    rep.samples = count;

    auto draw = [&](std::size_t s, std::uint32_t salt, double scale, bool terminal) {
        detail::ArgSample a;
        const std::size_t node =
            terminal ? M : std::min<std::size_t>(M, static_cast<std::size_t>(gen.uniform(s, salt, 0) * (M + 1)));
        const std::size_t p = s % P;
        const std::size_t q = (s * 7919 + 13) % P;
        a.t = X.grid().time(node);
        a.x.resize(n);
        a.xt.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            a.x[k] = scale * X.state(node, p, k);
            a.xt[k] = scale * X.state(node, q, k);
        }
        a.y = gen.normal(s, salt, 2);
        a.yt = gen.normal(s, salt, 3);
        a.z.resize(d);
        a.zt.resize(d);
        for (std::size_t l = 0; l < d; ++l) {
            a.z[l] = 0.5 * gen.normal(s, salt, static_cast<std::uint32_t>(4 + 2 * l));
            a.zt[l] = 0.5 * gen.normal(s, salt, static_cast<std::uint32_t>(5 + 2 * l));
        }
        return a;
    };
    // Perturb every argument of a by independent offsets of size ~eps.
    auto perturb = [&](const detail::ArgSample& a, std::size_t s, double eps) {
        detail::ArgSample b = a;
        std::uint32_t c = 32;
        for (auto& v : b.x) v += eps * gen.normal(s, 99, c++);
        for (auto& v : b.xt) v += eps * gen.normal(s, 99, c++);
        for (auto& v : b.z) v += eps * gen.normal(s, 99, c++);
        for (auto& v : b.zt) v += eps * gen.normal(s, 99, c++);
        b.y += eps * gen.normal(s, 99, c++);
        b.yt += eps * gen.normal(s, 99, c++);
        return b;
    };

    struct Quotients {
        double lip = 0.0, moderate = 0.0, extreme = 0.0;
    };
    auto state_quotient = [&](const MeanFieldCoefficient<StateView>& c, bool terminal) {
        Quotients qt;
        std::vector<double> fa, fb;
        for (std::size_t s = 0; s < count; ++s) {
            const auto a = draw(s, 1, 1.0, terminal);
            qt.moderate = std::max(qt.moderate, detail::eval_state(c, a, fa));
            for (double eps : {1e-4, 1.0}) {
                const auto b = perturb(a, s + (eps < 0.5 ? 0 : count), eps);
                detail::eval_state(c, b, fb);
                const double den = detail::sum_abs_diff(a.x, b.x) + detail::sum_abs_diff(a.xt, b.xt);
                double num = 0.0;
                for (std::size_t k = 0; k < fa.size(); ++k) num = std::max(num, std::abs(fa[k] - fb[k]));
                if (den > 0.0) qt.lip = std::max(qt.lip, num / den);
            }
            const auto e = draw(s, 2, 1e3, terminal);
            qt.extreme = std::max(qt.extreme, detail::eval_state(c, e, fb));
        }
        return qt;
    };
    auto driver_quotient = [&]() {
        Quotients qt;
        for (std::size_t s = 0; s < count; ++s) {
            const auto a = draw(s, 3, 1.0, false);
            const double ga = detail::eval_driver(problem.driver, a);
            qt.moderate = std::max(qt.moderate, std::abs(ga));
            for (double eps : {1e-4, 1.0}) {
                const auto b = perturb(a, s + (eps < 0.5 ? 0 : count), eps);
                const double den = detail::sum_abs_diff(a.x, b.x) + detail::sum_abs_diff(a.xt, b.xt) +
                                   std::abs(a.y - b.y) + std::abs(a.yt - b.yt) + detail::sum_abs_diff(a.z, b.z) +
                                   detail::sum_abs_diff(a.zt, b.zt);
                if (den > 0.0) qt.lip = std::max(qt.lip, std::abs(ga - detail::eval_driver(problem.driver, b)) / den);
            }
            const auto e = draw(s, 4, 1e3, false);
            qt.extreme = std::max(qt.extreme, std::abs(detail::eval_driver(problem.driver, e)));
            if (problem.flags.g_nondecreasing_in_ytilde) {
                auto up = a;
                up.yt += 0.1 + std::abs(gen.normal(s, 5, 0));
                if (detail::eval_driver(problem.driver, up) < ga - 1e-12) rep.monotone_in_ytilde_ok = false;
            }
        }
        return qt;
    };

    const auto& L = problem.flags.lipschitz;
    auto record = [&](const std::string& name, double declared, const Quotients& qt, bool bounded_claim) {
        CoefficientCheck c{name, declared, qt.lip, qt.lip <= declared * (1.0 + 1e-6) + 1e-9, qt.moderate, qt.extreme};
        if (!c.lipschitz_ok) {
            rep.failures.push_back(name + ": empirical Lipschitz quotient " + std::to_string(qt.lip) +
                                   " exceeds declared " + std::to_string(declared));
        }
        if (bounded_claim && problem.flags.bounded_coefficients && qt.extreme > 10.0 * qt.moderate + 1.0) {
            rep.bounded_ok = false;
            rep.failures.push_back(name + ": declared bounded but |value| reaches " + std::to_string(qt.extreme));
        }
        rep.coefficients.push_back(c);
    };
    record("drift", L.drift, state_quotient(problem.drift, false), false);
    record("diffusion", L.diffusion, state_quotient(problem.diffusion, false), false);
    record("driver", L.driver, driver_quotient(), true);
    record("terminal", L.terminal, state_quotient(problem.terminal, true), true);
    if (!rep.monotone_in_ytilde_ok) rep.failures.push_back("driver: declared nondecreasing in y~ but decreases");

    if (problem.has_obstacle()) {
        const ObstacleFn& h = *problem.obstacle;
        Quotients qt;
        for (std::size_t s = 0; s < count; ++s) {
            const auto a = draw(s, 6, 1.0, false);
            const double ha = h(a.t, a.x);
            qt.moderate = std::max(qt.moderate, std::abs(ha));
            const auto b = perturb(a, s, 1e-4);
            const double den = detail::sum_abs_diff(a.x, b.x);
            if (den > 0.0) qt.lip = std::max(qt.lip, std::abs(ha - h(a.t, b.x)) / den);
            qt.extreme = std::max(qt.extreme, std::abs(h(a.t, draw(s, 7, 1e3, false).x)));
        }
        record("obstacle", L.obstacle, qt, true);

        const double T = X.grid().horizon();
        std::vector<double> phi;
        for (std::size_t s = 0; s < count; ++s) {
            const auto a = draw(s, 8, 1.0, true);
            detail::eval_state(problem.terminal, a, phi);
            const double gap = h(T, a.x) - phi[0];
            if (gap > 1e-12) {
                ++rep.compatibility_violations;
                rep.worst_compatibility_gap = std::max(rep.worst_compatibility_gap, gap);
            }
        }
        auto other = [&](std::size_t q) { return StateView{T, X.point(M, q)}; };
        const EmpiricalField<StateView> terminal_mean(problem.terminal, P, other);
        for (std::size_t p = 0; p < std::min<std::size_t>(P, 1000); ++p) {
            const auto x = X.point(M, p);
            const double gap = h(T, x) - terminal_mean.scalar(StateView{T, x});
            if (gap > 1e-12) {
                ++rep.mean_compatibility_violations;
                rep.worst_compatibility_gap = std::max(rep.worst_compatibility_gap, gap);
            }
        }
        if (rep.compatibility_violations > 0) {
            rep.failures.push_back("obstacle above terminal function on " +
                                   std::to_string(rep.compatibility_violations) + " sampled pairs");
        }
        if (rep.mean_compatibility_violations > 0) {
            rep.failures.push_back("obstacle above averaged terminal value on " +
                                   std::to_string(rep.mean_compatibility_violations) + " points");
        }
    }
    return rep;
}

}  // namespace rmf

#endif  // RMFBSDE_VALIDATE_HPP
