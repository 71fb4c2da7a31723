#ifndef RMFBSDE_BINOMIAL_HPP
#define RMFBSDE_BINOMIAL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rmf::oracle {

struct PutParams {
    double strike = 100.0;
    double rate = 0.05;
    double vol = 0.2;
    double spot = 100.0;
    double maturity = 1.0;
    std::size_t steps = 2000;
};

/**
 * Cox-Ross-Rubinstein American put with early exercise at every tree node.
 * vol = 0 collapses to a deterministic path (exercise at the best node).
 */
inline double binomial_american_put(const PutParams& p) {
    if (!(p.strike >= 0.0) || !(p.vol >= 0.0) || !(p.spot > 0.0) || !(p.maturity > 0.0) || !std::isfinite(p.rate)) {
        throw std::invalid_argument("binomial_american_put: invalid parameters");
    }
    if (p.steps < 1) throw std::invalid_argument("binomial_american_put: steps must be >= 1");
    const double dt = p.maturity / static_cast<double>(p.steps);
    const double disc = std::exp(-p.rate * dt);
    if (p.vol == 0.0) {
        double best = 0.0;
        for (std::size_t i = 0; i <= p.steps; ++i) {
            const double t = dt * static_cast<double>(i);
            best = std::max(best, std::exp(-p.rate * t) * std::max(p.strike - p.spot * std::exp(p.rate * t), 0.0));
        }
        return best;
    }
    const double u = std::exp(p.vol * std::sqrt(dt));
    const double d = 1.0 / u;
    const double q = (std::exp(p.rate * dt) - d) / (u - d);
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("binomial_american_put: arbitrage in tree (increase steps)");
    const std::size_t n = p.steps;
    std::vector<double> v(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const double s = p.spot * std::pow(u, static_cast<double>(2 * j) - static_cast<double>(n));
        v[j] = std::max(p.strike - s, 0.0);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double s = p.spot * std::pow(u, static_cast<double>(2 * j) - static_cast<double>(i));
            const double cont = disc * (q * v[j + 1] + (1.0 - q) * v[j]);
            v[j] = std::max(cont, p.strike - s);
        }
    }
    return v[0];
}

}  // namespace rmf::oracle

#endif  // RMFBSDE_BINOMIAL_HPP
