#pragma once

#include <cstdint>
#include <numbers>
#include <cmath>

namespace dmatch {

// Counter-based generator: draw k of stream j under seed s is a pure function
// of (s, j, k), so samples can be produced in any order or in parallel and
// still reproduce exactly.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ 0x243F6A8885A308D3ULL)), stream_(stream) {}

    [[nodiscard]] std::uint64_t next_u64() noexcept
    {
        std::uint64_t x = key_ + stream_ * 0xD1B54A32D192ED03ULL;
        x = mix(x ^ mix(counter_++ + 0x9E3779B97F4A7C15ULL));
        return x;
    }

    // Uniform on the open interval (0, 1).
    [[nodiscard]] double uniform() noexcept
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    [[nodiscard]] double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Box-Muller, cosine branch only; costs two draws.
    [[nodiscard]] double normal() noexcept
    {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Marsaglia-Tsang.
    [[nodiscard]] double gamma(double shape) noexcept
    {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) {
                return d * v;
            }
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
                return d * v;
            }
        }
    }

    [[nodiscard]] double beta(double a, double b) noexcept
    {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    [[nodiscard]] std::uint64_t below(std::uint64_t n) noexcept { return next_u64() % n; }

    [[nodiscard]] std::uint64_t draws() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

} // namespace dmatch
