#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rmfbsde/random.hpp"
#include "rmfbsde/time_grid.hpp"

namespace rmf {
namespace {

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswerZero) {
    const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
    const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                          {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPiDigits) {
    const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                          {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(CounterNormal, SameCounterSameValue) {
    const CounterNormal a(RngSeed{42, 3});
    const CounterNormal b(RngSeed{42, 3});
    EXPECT_EQ(a.normal(7, 11, 1), b.normal(7, 11, 1));
    EXPECT_NE(a.normal(7, 11, 0), a.normal(7, 11, 1));
    const CounterNormal c(RngSeed{42, 4});
    EXPECT_NE(a.normal(7, 11, 1), c.normal(7, 11, 1));
}

TEST(CounterNormal, UniformsStayInsideOpenInterval) {
    EXPECT_GT(to_open_uniform(0), 0.0);
    EXPECT_LT(to_open_uniform(~0ull), 1.0);
    EXPECT_TRUE(std::isfinite(normal_quantile(to_open_uniform(~0ull))));
    EXPECT_TRUE(std::isfinite(normal_quantile(to_open_uniform(0))));
}

TEST(SampleBrownian, IncrementMomentsMatchDt) {
    const TimeGrid grid(1.0, 4);
    const auto noise = sample_brownian(grid, 50000, 1, RngSeed{1, 0});
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        double m = 0.0, v = 0.0, k4 = 0.0;
        for (double w : noise.slice(i)) m += w;
        m /= 50000.0;
        for (double w : noise.slice(i)) {
            v += (w - m) * (w - m);
            k4 += std::pow(w, 4);
        }
        v /= 49999.0;
        k4 /= 50000.0;
        EXPECT_NEAR(m, 0.0, 4.0 * std::sqrt(grid.dt() / 50000.0));
        EXPECT_NEAR(v / grid.dt(), 1.0, 0.03);
        EXPECT_NEAR(k4 / (grid.dt() * grid.dt()), 3.0, 0.15);
    }
}

TEST(SampleBrownian, ThreadCountDoesNotChangeDraws) {
    const TimeGrid grid(1.0, 10);
    const auto one = sample_brownian(grid, 1001, 3, RngSeed{9, 2}, 1);
    const auto four = sample_brownian(grid, 1001, 3, RngSeed{9, 2}, 4);
    ASSERT_EQ(one.raw().size(), four.raw().size());
    EXPECT_TRUE(std::equal(one.raw().begin(), one.raw().end(), four.raw().begin()));
}

TEST(SampleBrownian, PrefixOfLargerEnsembleIsIdentical) {
    const TimeGrid grid(1.0, 5);
    const auto small = sample_brownian(grid, 10, 2, RngSeed{3, 0});
    const auto big = sample_brownian(grid, 100, 2, RngSeed{3, 0});
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        for (std::size_t p = 0; p < 10; ++p) {
            for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(small.increment(i, p, k), big.increment(i, p, k));
        }
    }
}

TEST(SampleBrownian, BrownianIsCumulativeSum) {
    const TimeGrid grid(2.0, 8);
    const auto noise = sample_brownian(grid, 3, 1, RngSeed{5, 0});
    double w = 0.0;
    EXPECT_EQ(noise.brownian(0, 1, 0), 0.0);
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        w += noise.increment(i, 1, 0);
        EXPECT_NEAR(noise.brownian(i + 1, 1, 0), w, 1e-15);
    }
}

TEST(SampleBrownian, RejectsEmptyShapes) {
    const TimeGrid grid(1.0, 5);
    EXPECT_THROW(sample_brownian(grid, 0, 1, {}), std::invalid_argument);
    EXPECT_THROW(sample_brownian(grid, 5, 0, {}), std::invalid_argument);
}

TEST(Concatenate, StacksParticlesPerSlice) {
    const TimeGrid grid(1.0, 3);
    const std::vector<NoiseEnsemble> parts{sample_brownian(grid, 2, 1, {1, 0}), sample_brownian(grid, 3, 1, {1, 1})};
    const auto all = concatenate(parts);
    EXPECT_EQ(all.particles(), 5u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(all.increment(i, 1, 0), parts[0].increment(i, 1, 0));
        EXPECT_EQ(all.increment(i, 4, 0), parts[1].increment(i, 2, 0));
    }
    const std::vector<NoiseEnsemble> bad{sample_brownian(grid, 2, 1, {1, 0}),
                                         sample_brownian(TimeGrid(1.0, 4), 2, 1, {1, 0})};
    EXPECT_THROW(concatenate(bad), std::invalid_argument);
}

TEST(TimeGrid, NodesAndHorizon) {
    const TimeGrid grid(2.0, 3);
    EXPECT_EQ(grid.nodes(), 4u);
    EXPECT_EQ(grid.time(3), 2.0);
    EXPECT_DOUBLE_EQ(grid.time(1), 2.0 / 3.0);
    EXPECT_EQ(grid.index_of(2.0 / 3.0), 1u);
    EXPECT_THROW(grid.index_of(0.5), std::invalid_argument);
}

TEST(TimeGrid, RejectsBadInput) {
    EXPECT_THROW(make_grid(1.0, -1), std::invalid_argument);
    EXPECT_THROW(make_grid(1.0, 0), std::invalid_argument);
    EXPECT_THROW(make_grid(0.0, 10), std::invalid_argument);
    EXPECT_THROW(make_grid(-1.0, 10), std::invalid_argument);
}

}  // namespace
}  // namespace rmf
