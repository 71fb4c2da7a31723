/**
 * @file regression.hpp
 * @brief Least-squares projection onto state-dependent basis functions.
 *
 * Realizes E[target | X_{t_i}] as a function of the current state. Two basis
 * families: global polynomials of bounded total degree in the standardized
 * state, and piecewise polynomials on quantile bins of the first coordinate
 * (each bin mapped to [-1, 1] so local monomials stay well conditioned).
 */

#ifndef RMFBSDE_REGRESSION_HPP
#define RMFBSDE_REGRESSION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rmf {

struct RegressionBasis {
    enum class Family { polynomial, piecewise_polynomial };

    Family family = Family::polynomial;
    unsigned degree = 3;
    std::size_t bins = 1;

    static RegressionBasis polynomial(unsigned degree) { return {Family::polynomial, degree, 1}; }
    static RegressionBasis piecewise(unsigned degree, std::size_t bins) {
        if (bins == 0) throw std::invalid_argument("RegressionBasis: bins must be >= 1");
        return {Family::piecewise_polynomial, degree, bins};
    }

    /// Number of monomials of total degree <= degree in n variables.
    std::size_t local_size(std::size_t n) const {
        // C(n + degree, degree)
        std::size_t c = 1;
        for (std::size_t k = 1; k <= degree; ++k) c = c * (n + k) / k;
        return c;
    }
    std::size_t bin_count() const noexcept { return family == Family::polynomial ? 1 : bins; }
    std::size_t size(std::size_t n) const { return local_size(n) * bin_count(); }

    std::string describe() const {
        if (family == Family::polynomial) return "polynomial(degree=" + std::to_string(degree) + ")";
        return "piecewise(degree=" + std::to_string(degree) + ",bins=" + std::to_string(bins) + ")";
    }
};

/// Outcome of projecting one target vector.
struct FitResult {
    std::vector<double> fitted;
    double residual_variance = 0.0;
    /// Typical standard error of a fitted value: sqrt(residual_variance * rank / P).
    double standard_error = 0.0;
    std::vector<double> coefficients;  ///< bin-major, local_size per bin
};

/**
 * Design matrix and per-bin normal equations for one set of states; reusable for
 * any number of targets. Rank-deficient bins (smallest Gram eigenvalue below
 * 1e-10 of the largest) get ridge 1e-8 * trace(G) / k on the non-constant terms,
 * never a pseudo-inverse.
 */
class LeastSquares {
public:
    LeastSquares(std::span<const double> states, std::size_t dim, const RegressionBasis& basis)
        : basis_(basis), dim_(dim) {
        if (dim == 0 || states.size() % dim != 0) throw std::invalid_argument("LeastSquares: bad state shape");
        count_ = states.size() / dim;
        local_ = basis.local_size(dim);
        if (count_ < basis.size(dim)) {
            throw std::invalid_argument("LeastSquares: " + std::to_string(count_) +
                                        " samples for a basis of size " + std::to_string(basis.size(dim)));
        }
        build_exponents();
        standardize(states);
        assign_bins(states);
        design_.resize(count_ * local_);
        for (std::size_t p = 0; p < count_; ++p) {
            evaluate_local(states.subspan(p * dim_, dim_), bin_[p], {design_.data() + p * local_, local_});
        }
        factorize();
    }

    std::size_t samples() const noexcept { return count_; }
    std::size_t basis_size() const noexcept { return local_ * basis_.bin_count(); }
    std::size_t effective_rank() const noexcept { return rank_; }
    bool ridge_applied() const noexcept { return ridge_; }

    FitResult fit(std::span<const double> target) const {
        if (target.size() != count_) throw std::invalid_argument("LeastSquares::fit: target size mismatch");
        const std::size_t nb = basis_.bin_count();
        std::vector<Eigen::VectorXd> rhs(nb, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(local_)));
        for (std::size_t p = 0; p < count_; ++p) {
            const double* phi = design_.data() + p * local_;
            auto& r = rhs[bin_[p]];
            for (std::size_t k = 0; k < local_; ++k) r[static_cast<Eigen::Index>(k)] += phi[k] * target[p];
        }
        FitResult out;
        out.coefficients.resize(nb * local_);
        for (std::size_t b = 0; b < nb; ++b) {
            const Eigen::VectorXd beta = solvers_[b].solve(rhs[b]);
            for (std::size_t k = 0; k < local_; ++k) out.coefficients[b * local_ + k] = beta[static_cast<Eigen::Index>(k)];
        }
        out.fitted.resize(count_);
        double rss = 0.0;
        for (std::size_t p = 0; p < count_; ++p) {
            const double* phi = design_.data() + p * local_;
            const double* beta = out.coefficients.data() + bin_[p] * local_;
            double v = 0.0;
            for (std::size_t k = 0; k < local_; ++k) v += phi[k] * beta[k];
            out.fitted[p] = v;
            rss += (target[p] - v) * (target[p] - v);
        }
        const double dof = static_cast<double>(count_ > rank_ ? count_ - rank_ : 1);
        out.residual_variance = rss / dof;
        out.standard_error = std::sqrt(out.residual_variance * static_cast<double>(rank_) / static_cast<double>(count_));
        return out;
    }

    /// Evaluates a previous fit at new states (same dimension).
    std::vector<double> predict(const FitResult& fit, std::span<const double> states) const {
        if (states.size() % dim_ != 0) throw std::invalid_argument("LeastSquares::predict: bad state shape");
        const std::size_t m = states.size() / dim_;
        std::vector<double> out(m), phi(local_);
        for (std::size_t p = 0; p < m; ++p) {
            const auto x = states.subspan(p * dim_, dim_);
            const std::size_t b = bin_of(x[0]);
            evaluate_local(x, b, phi);
            double v = 0.0;
            for (std::size_t k = 0; k < local_; ++k) v += phi[k] * fit.coefficients[b * local_ + k];
            out[p] = v;
        }
        return out;
    }

private:
    RegressionBasis basis_;
    std::size_t dim_;
    std::size_t count_ = 0;
    std::size_t local_ = 0;
    std::vector<std::vector<unsigned>> exponents_;
    std::vector<double> center_, scale_;          // global standardization per coordinate
    std::vector<double> edges_;                   // interior quantile edges of coordinate 0
    std::vector<double> bin_center_, bin_scale_;  // per-bin affine map of coordinate 0 to [-1, 1]
    std::vector<std::size_t> bin_;
    std::vector<double> design_;
    std::vector<Eigen::LDLT<Eigen::MatrixXd>> solvers_;
    std::size_t rank_ = 0;
    bool ridge_ = false;

    void build_exponents() {
        std::vector<unsigned> e(dim_, 0);
        for (unsigned total = 0; total <= basis_.degree; ++total) enumerate(e, 0, total);
    }
    void enumerate(std::vector<unsigned>& e, std::size_t k, unsigned remaining) {
        if (k + 1 == dim_) {
            e[k] = remaining;
            exponents_.push_back(e);
            return;
        }
        for (unsigned v = remaining + 1; v-- > 0;) {
            e[k] = v;
            enumerate(e, k + 1, remaining - v);
        }
    }

    void standardize(std::span<const double> states) {
        center_.assign(dim_, 0.0);
        scale_.assign(dim_, 0.0);
        for (std::size_t k = 0; k < dim_; ++k) {
            double m = 0.0;
            for (std::size_t p = 0; p < count_; ++p) m += states[p * dim_ + k];
            m /= static_cast<double>(count_);
            double v = 0.0;
            for (std::size_t p = 0; p < count_; ++p) {
                const double dx = states[p * dim_ + k] - m;
                v += dx * dx;
            }
            const double sd = std::sqrt(v / static_cast<double>(count_));
            center_[k] = m;
            scale_[k] = sd > 1e-12 * (1.0 + std::abs(m)) ? 1.0 / sd : 0.0;  // degenerate coordinate -> constant
        }
    }

    void assign_bins(std::span<const double> states) {
        const std::size_t nb = basis_.bin_count();
        bin_.assign(count_, 0);
        bin_center_.assign(nb, center_[0]);
        bin_scale_.assign(nb, scale_[0]);
        if (nb == 1) return;
        std::vector<double> first(count_);
        for (std::size_t p = 0; p < count_; ++p) first[p] = states[p * dim_];
        std::vector<double> sorted = first;
        std::sort(sorted.begin(), sorted.end());
        edges_.resize(nb - 1);
        for (std::size_t j = 1; j < nb; ++j) edges_[j - 1] = sorted[j * count_ / nb];
        std::vector<double> lo(nb, INFINITY), hi(nb, -INFINITY);
        for (std::size_t p = 0; p < count_; ++p) {
            const std::size_t b = bin_of(first[p]);
            bin_[p] = b;
            lo[b] = std::min(lo[b], first[p]);
            hi[b] = std::max(hi[b], first[p]);
        }
        for (std::size_t b = 0; b < nb; ++b) {
            if (!(hi[b] >= lo[b])) continue;  // empty bin
            const double half = 0.5 * (hi[b] - lo[b]);
            bin_center_[b] = 0.5 * (hi[b] + lo[b]);
            bin_scale_[b] = half > 1e-12 * (1.0 + std::abs(bin_center_[b])) ? 1.0 / half : 0.0;
        }
    }

    std::size_t bin_of(double v) const {
        if (edges_.empty()) return 0;
        return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), v) - edges_.begin());
    }

    void evaluate_local(std::span<const double> x, std::size_t bin, std::span<double> phi) const {
        double z[8];
        double* zp = dim_ <= 8 ? z : nullptr;
        std::vector<double> zbuf;
        if (!zp) {
            zbuf.resize(dim_);
            zp = zbuf.data();
        }
        for (std::size_t k = 0; k < dim_; ++k) zp[k] = (x[k] - center_[k]) * scale_[k];
        zp[0] = (x[0] - bin_center_[bin]) * bin_scale_[bin];
        for (std::size_t j = 0; j < exponents_.size(); ++j) {
            double v = 1.0;
            for (std::size_t k = 0; k < dim_; ++k) {
                for (unsigned e = 0; e < exponents_[j][k]; ++e) v *= zp[k];
            }
            phi[j] = v;
        }
    }

    void factorize() {
        const std::size_t nb = basis_.bin_count();
        const auto k = static_cast<Eigen::Index>(local_);
        std::vector<Eigen::MatrixXd> gram(nb, Eigen::MatrixXd::Zero(k, k));
        for (std::size_t p = 0; p < count_; ++p) {
            const Eigen::Map<const Eigen::VectorXd> phi(design_.data() + p * local_, k);
            gram[bin_[p]].selfadjointView<Eigen::Lower>().rankUpdate(phi);
        }
        solvers_.resize(nb);
        rank_ = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            Eigen::MatrixXd g = gram[b].selfadjointView<Eigen::Lower>();
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
            const double lmax = eig.eigenvalues().maxCoeff();
            const double lmin = eig.eigenvalues().minCoeff();
            for (Eigen::Index j = 0; j < k; ++j) {
                if (eig.eigenvalues()[j] > 1e-10 * std::max(lmax, 1e-300)) ++rank_;
            }
            if (!(lmin > 1e-10 * lmax)) {
                ridge_ = true;
                const double lambda = std::max(1e-8 * g.trace() / static_cast<double>(k), 1e-300);
                // The constant stays unpenalized so residuals keep mean zero; an empty bin
                // has a zero constant column and needs the full ridge.
                if (g(0, 0) > 0.0) g.diagonal().tail(k - 1).array() += lambda;
                else g.diagonal().array() += lambda;
            }
            solvers_[b].compute(g);
        }
        rank_ = std::max<std::size_t>(rank_, 1);
    }
};

/// Fitted values of the projection of targets onto basis(states).
inline std::vector<double> estimate_conditional_expectation(std::span<const double> targets,
                                                            std::span<const double> states, std::size_t dim,
                                                            const RegressionBasis& basis) {
    if (targets.size() * dim != states.size()) {
        throw std::invalid_argument("estimate_conditional_expectation: particle count mismatch");
    }
    return LeastSquares(states, dim, basis).fit(targets).fitted;
}

}  // namespace rmf

#endif  // RMFBSDE_REGRESSION_HPP
