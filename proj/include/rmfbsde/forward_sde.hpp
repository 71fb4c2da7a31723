/**
 * @file forward_sde.hpp
 * @brief Euler-Maruyama particle simulation of the McKean-Vlasov forward equation.
 *
 * Two stages: the self-interacting law ensemble X^{0,x0} (mean-field terms from
 * the ensemble's own empirical measure at the current step), and flows X^{t,x}
 * driven by the per-node empirical measure of a frozen law ensemble.
 */

#ifndef RMFBSDE_FORWARD_SDE_HPP
#define RMFBSDE_FORWARD_SDE_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmfbsde/errors.hpp"
#include "rmfbsde/mean_field.hpp"
#include "rmfbsde/parallel.hpp"
#include "rmfbsde/problem.hpp"
#include "rmfbsde/random.hpp"
#include "rmfbsde/time_grid.hpp"

namespace rmf {

/// P particle paths of an n-dimensional state on a TimeGrid, stored time-major.
class PathEnsemble {
public:
    PathEnsemble(TimeGrid grid, std::size_t particles, std::size_t dim, std::size_t start_index = 0,
                 bool law_frozen = false)
        : grid_(grid), particles_(particles), dim_(dim), start_(start_index), law_frozen_(law_frozen),
          data_(grid.nodes() * particles * dim, 0.0) {
        if (particles == 0 || dim == 0) throw std::invalid_argument("PathEnsemble: empty shape");
        if (start_index > grid.steps()) throw std::invalid_argument("PathEnsemble: start index beyond horizon");
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t particles() const noexcept { return particles_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t start_index() const noexcept { return start_; }
    bool law_frozen() const noexcept { return law_frozen_; }

    double state(std::size_t node, std::size_t p, std::size_t k = 0) const noexcept {
        return data_[(node * particles_ + p) * dim_ + k];
    }
    std::span<const double> point(std::size_t node, std::size_t p) const noexcept {
        return {data_.data() + (node * particles_ + p) * dim_, dim_};
    }
    std::span<double> point(std::size_t node, std::size_t p) noexcept {
        return {data_.data() + (node * particles_ + p) * dim_, dim_};
    }
    /// All particles at one node, particle-major within the slice (P*n values).
    std::span<const double> slice(std::size_t node) const noexcept {
        return {data_.data() + node * particles_ * dim_, particles_ * dim_};
    }
    std::span<double> slice(std::size_t node) noexcept {
        return {data_.data() + node * particles_ * dim_, particles_ * dim_};
    }

    double mean(std::size_t node, std::size_t k = 0) const noexcept {
        double s = 0.0;
        for (std::size_t p = 0; p < particles_; ++p) s += state(node, p, k);
        return s / static_cast<double>(particles_);
    }

private:
    TimeGrid grid_;
    std::size_t particles_;
    std::size_t dim_;
    std::size_t start_;
    bool law_frozen_;
    std::vector<double> data_;
};

namespace detail {

inline void check_noise(const MfProblem& problem, const TimeGrid& grid, const NoiseEnsemble& noise) {
    if (noise.dim() != problem.noise_dim) {
        throw std::invalid_argument("forward_sde: noise dimension " + std::to_string(noise.dim()) +
                                    " != problem noise dimension " + std::to_string(problem.noise_dim));
    }
    if (!(noise.grid() == grid)) throw std::invalid_argument("forward_sde: noise grid differs from time grid");
}

/// One Euler step for particles [begin, end) using frozen empirical fields.
inline void euler_step(const MfProblem& problem, const PathEnsemble& in, PathEnsemble& out, std::size_t step,
                       const EmpiricalField<StateView>& drift, const EmpiricalField<StateView>& diffusion,
                       const NoiseEnsemble& noise, std::size_t begin, std::size_t end) {
    const std::size_t n = problem.state_dim;
    const std::size_t d = problem.noise_dim;
    const double t = in.grid().time(step);
    const double dt = in.grid().dt();
    std::vector<double> b(n), s(n * d);
    for (std::size_t p = begin; p < end; ++p) {
        const auto x = in.point(step, p);
        const StateView own{t, x};
        drift.evaluate(own, b);
        diffusion.evaluate(own, s);
        const auto dw = noise.increments(step, p);
        auto next = out.point(step + 1, p);
        for (std::size_t k = 0; k < n; ++k) {
            double v = x[k] + b[k] * dt;
            for (std::size_t l = 0; l < d; ++l) v += s[k * d + l] * dw[l];
            if (!std::isfinite(v)) {
                throw numerical_blowup("forward_sde: non-finite state for particle " + std::to_string(p), step + 1);
            }
            next[k] = v;
        }
    }
}

}  // namespace detail

/**
 * Self-interacting ensemble: X_{i+1}^p = X_i^p + b_bar(t_i, X_i^p) dt + sigma_bar(t_i, X_i^p) dW_i^p,
 * where b_bar(t, x) = (1/P) sum_q b(t, x, X_i^q) and likewise for sigma.
 */
inline PathEnsemble simulate_law_ensemble(const MfProblem& problem, const TimeGrid& grid,
                                          const NoiseEnsemble& noise, std::size_t threads = 1) {
    detail::check_noise(problem, grid, noise);
    const std::size_t P = noise.particles();
    const std::size_t n = problem.state_dim;
    if (problem.x0.size() != n) throw std::invalid_argument("simulate_law_ensemble: x0 has wrong dimension");
    PathEnsemble X(grid, P, n, 0, false);
    for (std::size_t p = 0; p < P; ++p) {
        auto x = X.point(0, p);
        std::copy(problem.x0.begin(), problem.x0.end(), x.begin());
    }
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        const double t = grid.time(i);
        auto other = [&](std::size_t q) { return StateView{t, X.point(i, q)}; };
        const EmpiricalField<StateView> drift(problem.drift, P, other);
        const EmpiricalField<StateView> diffusion(problem.diffusion, P, other);
        parallel_for(P, threads, [&](std::size_t b, std::size_t e) {
            detail::euler_step(problem, X, X, i, drift, diffusion, noise, b, e);
        });
    }
    return X;
}

/**
 * Paths of X^{t,x}: start at x at node start_index, coefficients averaged against
 * the frozen law's empirical measure at each node. Nodes before start_index hold x.
 */
inline PathEnsemble simulate_flow(const MfProblem& problem, const TimeGrid& grid, std::size_t start_index,
                                  std::span<const double> x, const PathEnsemble& frozen_law,
                                  const NoiseEnsemble& noise, std::size_t threads = 1) {
    detail::check_noise(problem, grid, noise);
    if (!(frozen_law.grid() == grid)) throw std::invalid_argument("simulate_flow: frozen law on a different grid");
    if (start_index > grid.steps()) throw std::invalid_argument("simulate_flow: start index beyond horizon");
    if (x.size() != problem.state_dim) throw std::invalid_argument("simulate_flow: start state has wrong dimension");
    const std::size_t P = noise.particles();
    PathEnsemble X(grid, P, problem.state_dim, start_index, true);
    for (std::size_t i = 0; i <= start_index; ++i) {
        for (std::size_t p = 0; p < P; ++p) {
            auto pt = X.point(i, p);
            std::copy(x.begin(), x.end(), pt.begin());
        }
    }
    for (std::size_t i = start_index; i < grid.steps(); ++i) {
        const double t = grid.time(i);
        auto other = [&](std::size_t q) { return StateView{t, frozen_law.point(i, q)}; };
        const EmpiricalField<StateView> drift(problem.drift, frozen_law.particles(), other);
        const EmpiricalField<StateView> diffusion(problem.diffusion, frozen_law.particles(), other);
        parallel_for(P, threads, [&](std::size_t b, std::size_t e) {
            detail::euler_step(problem, X, X, i, drift, diffusion, noise, b, e);
        });
    }
    return X;
}

}  // namespace rmf

#endif  // RMFBSDE_FORWARD_SDE_HPP
