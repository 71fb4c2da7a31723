#ifndef RMFBSDE_ERRORS_HPP
#define RMFBSDE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmf {

/// A simulated state or backward value became NaN/Inf.
class numerical_blowup : public std::runtime_error {
public:
    numerical_blowup(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Picard iteration did not reach its tolerance; carries the gap history.
class convergence_failure : public std::runtime_error {
public:
    convergence_failure(const std::string& what, std::vector<double> gaps)
        : std::runtime_error(what), gaps_(std::move(gaps)) {}

    const std::vector<double>& gaps() const noexcept { return gaps_; }

private:
    std::vector<double> gaps_;
};

}  // namespace rmf

#endif  // RMFBSDE_ERRORS_HPP
