/**
 * @file mean_field.hpp
 * @brief Coefficients that depend on a second "copy" argument, averaged against an empirical measure.
 *
 * A MeanFieldCoefficient F(own, other) is always usable pairwise. When it also
 * carries a separable representation
 *
 *     F(own, other) = combine(own, features(other)),  combine affine in features,
 *
 * the empirical mean (1/Q) sum_q F(own, other_q) collapses to
 * combine(own, mean_q features(other_q)) and costs O(Q) once per measure
 * instead of O(Q) per evaluation point.
 */

#ifndef RMFBSDE_MEAN_FIELD_HPP
#define RMFBSDE_MEAN_FIELD_HPP

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rmf {

/// (t, x) argument of forward coefficients, terminal functions and obstacles.
struct StateView {
    double t = 0.0;
    std::span<const double> x;
};

/// (t, x, y, z) argument of BSDE drivers; the "other" copy carries (x~, y~, z~).
struct AgentView {
    double t = 0.0;
    std::span<const double> x;
    double y = 0.0;
    std::span<const double> z;
};

template <class View>
struct MeanFieldCoefficient {
    using Pairwise = std::function<void(const View& own, const View& other, std::span<double> out)>;
    using Features = std::function<void(const View& other, std::span<double> features)>;
    using Combine = std::function<void(const View& own, std::span<const double> feature_mean,
                                       std::span<double> out)>;

    std::size_t out_dim = 1;
    Pairwise pairwise;
    std::size_t feature_dim = 0;
    Features features;
    Combine combine;

    /// True when the fast path is available (features may be empty for purely local coefficients).
    bool separable() const noexcept { return static_cast<bool>(combine); }
};

/**
 * Coefficient that ignores the copy argument entirely.
 * fn(own, out) writes out_dim values.
 */
template <class View, class Fn>
MeanFieldCoefficient<View> local_coefficient(std::size_t out_dim, Fn fn) {
    MeanFieldCoefficient<View> c;
    c.out_dim = out_dim;
    c.pairwise = [fn](const View& own, const View&, std::span<double> out) { fn(own, out); };
    c.combine = [fn](const View& own, std::span<const double>, std::span<double> out) { fn(own, out); };
    return c;
}

/// Scalar-valued pairwise-only coefficient from fn(own, other) -> double.
template <class View, class Fn>
MeanFieldCoefficient<View> pairwise_scalar(Fn fn) {
    MeanFieldCoefficient<View> c;
    c.out_dim = 1;
    c.pairwise = [fn](const View& own, const View& other, std::span<double> out) {
        out[0] = fn(own, other);
    };
    return c;
}

/// Scalar separable coefficient: features(other, feat) and combine(own, mean) -> double.
template <class View, class FeatFn, class CombFn>
MeanFieldCoefficient<View> separable_scalar(std::size_t feature_dim, FeatFn feat, CombFn comb) {
    if (feature_dim > 16) throw std::invalid_argument("separable_scalar: at most 16 features");
    MeanFieldCoefficient<View> c;
    c.out_dim = 1;
    c.feature_dim = feature_dim;
    c.features = [feat](const View& other, std::span<double> f) { feat(other, f); };
    c.combine = [comb](const View& own, std::span<const double> m, std::span<double> out) {
        out[0] = comb(own, m);
    };
    c.pairwise = [feat, comb, feature_dim](const View& own, const View& other, std::span<double> out) {
        double buf[16];
        std::span<double> f(buf, feature_dim);
        feat(other, f);
        out[0] = comb(own, std::span<const double>(buf, feature_dim));
    };
    return c;
}

/**
 * A coefficient frozen against an empirical measure {other_q}.
 *
 * The views passed to the constructor must stay valid for the lifetime of the
 * object only in the pairwise case; the separable case keeps just the feature means.
 */
template <class View>
class EmpiricalField {
public:
    template <class OtherFn>
    EmpiricalField(const MeanFieldCoefficient<View>& coef, std::size_t count, OtherFn&& other,
                   bool force_pairwise = false)
        : coef_(&coef), use_features_(coef.separable() && !force_pairwise) {
        if (count == 0) throw std::invalid_argument("EmpiricalField: empty measure");
        if (use_features_) {
            means_.assign(coef.feature_dim, 0.0);
            if (coef.feature_dim > 0) {
                std::vector<double> buf(coef.feature_dim);
                for (std::size_t q = 0; q < count; ++q) {
                    coef.features(other(q), buf);
                    for (std::size_t k = 0; k < buf.size(); ++k) means_[k] += buf[k];
                }
                for (double& m : means_) m /= static_cast<double>(count);
            }
        } else {
            if (!coef.pairwise) throw std::invalid_argument("EmpiricalField: coefficient has no pairwise form");
            others_.reserve(count);
            for (std::size_t q = 0; q < count; ++q) others_.push_back(other(q));
        }
    }

    void evaluate(const View& own, std::span<double> out) const {
        if (use_features_) {
            coef_->combine(own, means_, out);
            return;
        }
        std::fill(out.begin(), out.end(), 0.0);
        std::vector<double> buf(coef_->out_dim);
        for (const View& o : others_) {
            coef_->pairwise(own, o, buf);
            for (std::size_t k = 0; k < buf.size(); ++k) out[k] += buf[k];
        }
        const double inv = 1.0 / static_cast<double>(others_.size());
        for (double& v : out) v *= inv;
    }

    double scalar(const View& own) const {
        double v = 0.0;
        evaluate(own, std::span<double>(&v, 1));
        return v;
    }

    std::span<const double> feature_means() const noexcept { return means_; }
    bool uses_features() const noexcept { return use_features_; }

private:
    const MeanFieldCoefficient<View>* coef_;
    bool use_features_;
    std::vector<double> means_;
    std::vector<View> others_;
};

}  // namespace rmf

#endif  // RMFBSDE_MEAN_FIELD_HPP
