#include "dmatch/densities.hpp"
#include "dmatch/quadrature.hpp"
#include "support.hpp"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

using namespace dmatch;

TEST(TrapezoidGrid, ThreePoints)
{
    const auto g = trapezoid_grid(0.0, 1.0, 3);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_DOUBLE_EQ(g.node(0), 0.0);
    EXPECT_DOUBLE_EQ(g.node(1), 0.5);
    EXPECT_DOUBLE_EQ(g.node(2), 1.0);
    EXPECT_DOUBLE_EQ(g.weight(0), 0.25);
    EXPECT_DOUBLE_EQ(g.weight(1), 0.5);
    EXPECT_DOUBLE_EQ(g.weight(2), 0.25);
}

TEST(TrapezoidGrid, TwoPoints)
{
    const auto g = trapezoid_grid(0.0, 1.0, 2);
    EXPECT_DOUBLE_EQ(g.weight(0), 0.5);
    EXPECT_DOUBLE_EQ(g.weight(1), 0.5);
}

TEST(TrapezoidGrid, AirfoilWeightSum)
{
    const auto g = trapezoid_grid(-100.0, 150.0, 2500);
    const double sum = std::accumulate(g.weights().begin(), g.weights().end(), 0.0);
    EXPECT_NEAR(sum, 250.0, 1e-10);
    EXPECT_DOUBLE_EQ(g.node(0), -100.0);
    EXPECT_DOUBLE_EQ(g.node(2499), 150.0);
}

TEST(TrapezoidGrid, RejectsBadInput)
{
    EXPECT_THROW(trapezoid_grid(0.0, 1.0, 1), std::invalid_argument);
    EXPECT_THROW(trapezoid_grid(0.0, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(trapezoid_grid(1.0, 0.0, 10), std::invalid_argument);
    EXPECT_THROW(trapezoid_grid(1.0, 1.0, 10), std::invalid_argument);
}

TEST(Integrate, HandSum)
{
    const auto g = trapezoid_grid(0.0, 1.0, 3);
    const std::vector<double> v{0.0, 1.0, 0.0};
    EXPECT_DOUBLE_EQ(integrate(g, v), 0.5);
}

TEST(Integrate, LengthMismatch)
{
    const auto g = trapezoid_grid(0.0, 1.0, 3);
    const std::vector<double> v{0.0, 1.0};
    EXPECT_THROW(integrate(g, v), std::invalid_argument);
}

TEST(Integrate, UniformPdfOnWideGrid)
{
    const auto g = trapezoid_grid(0.0, 10.0, 100000);
    const auto u = Distribution::uniform(3.0, 4.0);
    EXPECT_NEAR(integrate(g, tabulate(g, [&](double x) { return u.pdf(x); })), 1.0, 1e-4);
}

TEST(Integrate, TargetsOnAirfoilGrid)
{
    const auto g = trapezoid_grid(-100.0, 150.0, 2500);
    for (const auto& d : {Distribution::uniform(75.0, 80.0), Distribution::gaussian(50.0, 10.0),
                          Distribution::scaled_beta(1.5, 3.5, 50.0, 80.0)}) {
        EXPECT_NEAR(integrate(g, tabulate(g, [&](double x) { return d.pdf(x); })), 1.0, 1e-3) << d.describe();
    }
}

// On [3.4, 3.8] the endpoint derivatives of the pdf differ, so the leading
// Euler-Maclaurin term is live and the error ratio per doubling tends to 4.
TEST(Integrate, SecondOrderConvergence)
{
    const double sd = 0.12;
    const auto d = Distribution::gaussian(3.5, sd * sd);
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - 3.5) / (sd * std::sqrt(2.0))); };
    const double exact = cdf(3.8) - cdf(3.4);
    auto err = [&](std::size_t intervals) {
        const auto g = trapezoid_grid(3.4, 3.8, intervals + 1);
        return std::abs(integrate(g, tabulate(g, [&](double x) { return d.pdf(x); })) - exact);
    };
    double prev = err(50);
    for (std::size_t intervals = 100; intervals <= 800; intervals *= 2) {
        const double cur = err(intervals);
        const double ratio = prev / cur;
        EXPECT_GE(ratio, 3.5) << intervals;
        EXPECT_LE(ratio, 4.5) << intervals;
        prev = cur;
    }
}

// Over the whole of [0, 7] the pdf and its derivatives vanish at both ends and
// the rule converges faster than any power; record that behaviour.
TEST(Integrate, VanishingEndpointsConvergeSpectrally)
{
    const double sd = 0.12;
    const auto d = Distribution::gaussian(3.5, sd * sd);
    auto err = [&](std::size_t intervals) {
        const auto g = trapezoid_grid(0.0, 7.0, intervals + 1);
        return std::abs(integrate(g, tabulate(g, [&](double x) { return d.pdf(x); })) - 1.0);
    };
    EXPECT_GT(err(32) / err(64), 1e6);
    EXPECT_LT(err(128), 1e-14);
}

TEST(Property, ConstantIntegratesToLength)
{
    prop::for_all(100, 5, [](CounterRng& rng, std::size_t) {
        const double lo = rng.uniform(-1e3, 1e3);
        const double hi = lo + rng.uniform(1e-3, 1e3);
        const auto n = static_cast<std::size_t>(2 + rng.below(5000));
        const auto g = trapezoid_grid(lo, hi, n);
        const std::vector<double> ones(n, 1.0);
        EXPECT_NEAR(integrate(g, ones), hi - lo, 1e-10 * (hi - lo));
        for (std::size_t i = 1; i < n; ++i) {
            ASSERT_GT(g.node(i), g.node(i - 1));
        }
        EXPECT_EQ(g.node(0), lo);
        EXPECT_EQ(g.node(n - 1), hi);
    });
}
