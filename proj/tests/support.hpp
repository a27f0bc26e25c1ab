#pragma once

#include "dmatch/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace dmatch::prop {

// Hand-rolled property runner: each case gets its own generator stream so a
// failure report names a reproducible (seed, case) pair.
inline void for_all(std::size_t cases, std::uint64_t seed, const std::function<void(CounterRng&, std::size_t)>& body)
{
    for (std::size_t c = 0; c < cases; ++c) {
        CounterRng rng(seed, c);
        SCOPED_TRACE("property case " + std::to_string(c) + " seed " + std::to_string(seed));
        body(rng, c);
        if (::testing::Test::HasFatalFailure()) {
            return;
        }
    }
}

inline std::vector<double> uniform_vector(CounterRng& rng, std::size_t n, double lo, double hi)
{
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(lo, hi);
    }
    return v;
}

inline std::vector<double> normal_vector(CounterRng& rng, std::size_t n, double mean, double sd)
{
    std::vector<double> v(n);
    for (auto& x : v) {
        x = mean + sd * rng.normal();
    }
    return v;
}

inline double rel_err(double a, double b, double floor = 1e-12)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace dmatch::prop
