/**
 * @file random.hpp
 * @brief Counter-based random numbers and Brownian-increment ensembles.
 *
 * Every draw is a pure function of (seed, stream_id, counter), so particle p
 * at step i always sees the same increment regardless of evaluation order or
 * thread count. The generator is Philox4x32-10; Gaussians are obtained by
 * inverse-CDF transform of a 53-bit uniform on the open interval (0,1).
 */

#ifndef RMFBSDE_RANDOM_HPP
#define RMFBSDE_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "rmfbsde/parallel.hpp"
#include "rmfbsde/time_grid.hpp"

namespace rmf {

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
                static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
                static_cast<std::uint32_t>(p0)};
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed plus sub-stream selector; equal values always reproduce the same draws.
struct RngSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    bool operator==(const RngSeed&) const = default;
};

/// Uniform in (0,1) from the top 52 bits; (k + 0.5) 2^-52 is exact, so never 0 or 1.
inline double to_open_uniform(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile, via the complementary error function inverse.
inline double normal_quantile(double u) {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

/**
 * Stateless Gaussian source keyed by an RngSeed.
 *
 * normal(a, b, c) returns the same value for the same (a, b, c); each Philox
 * call yields two normals, which are addressed by the low bit of c.
 */
class CounterNormal {
public:
    explicit CounterNormal(RngSeed seed) {
        const std::uint64_t k =
            splitmix64(seed.seed ^ splitmix64(seed.stream_id + 0x632BE59BD9B4E019ull));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    /// Two uniforms for counter (a, b, block).
    std::array<double, 2> uniforms(std::uint64_t a, std::uint64_t b, std::uint32_t block) const noexcept {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                      static_cast<std::uint32_t>(b >> 32),
                                      block ^ (static_cast<std::uint32_t>(a >> 32) << 16)};
        const auto out = Philox4x32::generate(ctr, key_);
        const std::uint64_t w0 = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        const std::uint64_t w1 = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
        return {to_open_uniform(w0), to_open_uniform(w1)};
    }

    double normal(std::uint64_t a, std::uint64_t b, std::uint32_t c) const {
        const auto u = uniforms(a, b, c >> 1);
        return normal_quantile(u[c & 1u]);
    }

    double uniform(std::uint64_t a, std::uint64_t b, std::uint32_t c) const noexcept {
        return uniforms(a, b, c >> 1)[c & 1u];
    }

private:
    Philox4x32::Key key_{};
};

/**
 * Brownian increments for P particles x M steps x d dimensions.
 *
 * Storage is time-major: increment(i, p, k) lives at ((i*P)+p)*d + k so a whole
 * time slice is one contiguous span.
 */
class NoiseEnsemble {
public:
    NoiseEnsemble(TimeGrid grid, std::size_t particles, std::size_t dim, RngSeed seed,
                  std::vector<double> increments)
        : grid_(grid), particles_(particles), dim_(dim), seed_(seed), data_(std::move(increments)) {
        if (data_.size() != grid_.steps() * particles_ * dim_) {
            throw std::invalid_argument("NoiseEnsemble: increment array has wrong shape");
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t particles() const noexcept { return particles_; }
    std::size_t dim() const noexcept { return dim_; }
    const RngSeed& seed() const noexcept { return seed_; }

    double increment(std::size_t step, std::size_t p, std::size_t k) const noexcept {
        return data_[(step * particles_ + p) * dim_ + k];
    }
    std::span<const double> increments(std::size_t step, std::size_t p) const noexcept {
        return {data_.data() + (step * particles_ + p) * dim_, dim_};
    }
    std::span<const double> slice(std::size_t step) const noexcept {
        return {data_.data() + step * particles_ * dim_, particles_ * dim_};
    }
    std::span<const double> raw() const noexcept { return data_; }

    /// W_{t_i} for particle p, coordinate k (cumulative sum of increments).
    double brownian(std::size_t node, std::size_t p, std::size_t k) const noexcept {
        double w = 0.0;
        for (std::size_t i = 0; i < node; ++i) w += increment(i, p, k);
        return w;
    }

private:
    TimeGrid grid_;
    std::size_t particles_;
    std::size_t dim_;
    RngSeed seed_;
    std::vector<double> data_;
};

/**
 * i.i.d. Normal(0, dt) increments; particle p at step i dimension k uses
 * counter (i, p, k) under the key derived from seed.
 */
inline NoiseEnsemble sample_brownian(const TimeGrid& grid, std::size_t particles, std::size_t dim,
                                     RngSeed seed, std::size_t threads = 1) {
    if (particles == 0) throw std::invalid_argument("sample_brownian: P must be >= 1");
    if (dim == 0) throw std::invalid_argument("sample_brownian: d must be >= 1");
    const CounterNormal gen(seed);
    const double scale = std::sqrt(grid.dt());
    const std::size_t steps = grid.steps();
    std::vector<double> data(steps * particles * dim);
    parallel_for(particles, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t i = 0; i < steps; ++i) {
                for (std::size_t k = 0; k < dim; k += 2) {
                    const auto u = gen.uniforms(i, p, static_cast<std::uint32_t>(k >> 1));
                    data[(i * particles + p) * dim + k] = scale * normal_quantile(u[0]);
                    if (k + 1 < dim) data[(i * particles + p) * dim + k + 1] = scale * normal_quantile(u[1]);
                }
            }
        }
    });
    return NoiseEnsemble(grid, particles, dim, seed, std::move(data));
}

/// Concatenates ensembles on the same grid and dimension along the particle axis.
inline NoiseEnsemble concatenate(std::span<const NoiseEnsemble> parts) {
    if (parts.empty()) throw std::invalid_argument("concatenate: no ensembles");
    const TimeGrid grid = parts.front().grid();
    const std::size_t dim = parts.front().dim();
    std::size_t total = 0;
    for (const auto& part : parts) {
        if (!(part.grid() == grid) || part.dim() != dim) {
            throw std::invalid_argument("concatenate: grid or dimension mismatch");
        }
        total += part.particles();
    }
    std::vector<double> data(grid.steps() * total * dim);
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        std::size_t offset = 0;
        for (const auto& part : parts) {
            const auto src = part.slice(i);
            std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>((i * total + offset) * dim));
            offset += part.particles();
        }
    }
    return NoiseEnsemble(grid, total, dim, parts.front().seed(), std::move(data));
}

}  // namespace rmf

#endif  // RMFBSDE_RANDOM_HPP
