#ifndef RMFBSDE_TIME_GRID_HPP
#define RMFBSDE_TIME_GRID_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmf {

/**
 * Uniform partition 0 = t_0 < t_1 < ... < t_M = T.
 *
 * Nodes follow the construction rule t_i = i*T/M, except t_M which is set
 * to T exactly so the horizon is never perturbed by rounding.
 */
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw std::invalid_argument("TimeGrid: horizon must be positive, got " +
                                        std::to_string(horizon));
        }
        if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be >= 1");
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t nodes() const noexcept { return steps_ + 1; }
    double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }

    double time(std::size_t i) const noexcept {
        if (i >= steps_) return horizon_;
        return static_cast<double>(i) * horizon_ / static_cast<double>(steps_);
    }

    std::vector<double> times() const {
        std::vector<double> out(nodes());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = time(i);
        return out;
    }

    /// Index of the node equal to t (within 1e-9*dt); throws when t is off-grid.
    std::size_t index_of(double t) const {
        const double pos = t / dt();
        const double rounded = std::round(pos);
        if (rounded < 0.0 || rounded > static_cast<double>(steps_) ||
            std::abs(pos - rounded) > 1e-9) {
            throw std::invalid_argument("TimeGrid: time " + std::to_string(t) +
                                        " is not a grid node");
        }
        return static_cast<std::size_t>(rounded);
    }

    bool operator==(const TimeGrid& other) const noexcept {
        return horizon_ == other.horizon_ && steps_ == other.steps_;
    }

private:
    double horizon_;
    std::size_t steps_;
};

/// Validating factory; accepts signed step counts so negative input is reported, not wrapped.
inline TimeGrid make_grid(double horizon, long long steps) {
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("make_grid: T must be > 0, got " + std::to_string(horizon));
    }
    if (steps < 1) {
        throw std::invalid_argument("make_grid: M must be >= 1, got " + std::to_string(steps));
    }
    return TimeGrid(horizon, static_cast<std::size_t>(steps));
}

}  // namespace rmf

#endif  // RMFBSDE_TIME_GRID_HPP
