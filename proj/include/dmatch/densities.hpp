#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace dmatch {

struct Uniform {
    double lower;
    double upper;
};

struct Gaussian {
    double mean;
    double variance;
};

// Beta(alpha, beta) carried onto [lower, upper] by the affine map.
struct ScaledBeta {
    double alpha;
    double beta;
    double lower;
    double upper;
};

// Piecewise-linear density through (nodes, values), zero outside the nodes.
// Values are renormalized so that the trapezoid integral is one.
struct Tabulated {
    std::vector<double> nodes;
    std::vector<double> values;
    std::vector<double> cumulative; // trapezoid CDF at each node
};

struct Moments {
    double mean;
    double variance;
};

/// Univariate probability law used both as a target density and as the law
/// of the uncertain parameter. Parameters are validated at construction;
/// evaluation never throws.
class Distribution {
public:
    using Kind = std::variant<Uniform, Gaussian, ScaledBeta, Tabulated>;

    static Distribution uniform(double lower, double upper);
    static Distribution gaussian(double mean, double variance);
    static Distribution scaled_beta(double alpha, double beta, double lower, double upper);
    static Distribution tabulated(std::vector<double> nodes, std::vector<double> values);

    [[nodiscard]] double pdf(double x) const noexcept;

    /// Closed-form mean and variance; empty for tabulated laws.
    [[nodiscard]] std::optional<Moments> moments() const noexcept;

    /// Third standardized moment; empty for tabulated laws.
    [[nodiscard]] std::optional<double> skewness() const noexcept;

    /// Support interval; infinite endpoints for the Gaussian.
    [[nodiscard]] std::pair<double, double> support() const noexcept;
    [[nodiscard]] bool bounded() const noexcept;

    /// One draw. The generator is consumed; callers give each draw its own stream.
    template <class Rng>
    [[nodiscard]] double draw(Rng& rng) const noexcept;

    [[nodiscard]] std::string describe() const;
    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

private:
    explicit Distribution(Kind k);

    double tabulated_quantile(double u) const noexcept;

    Kind kind_;
    double log_norm_ = 0.0; // beta normalizer, cached
};

struct SampleSet {
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::string source;
};

/// M i.i.d. draws; draw j depends only on (seed, j).
SampleSet sample(const Distribution& dist, std::uint64_t seed, std::size_t count);

/// Closed-form mean and variance; throws std::domain_error for tabulated laws.
Moments analytic_moments(const Distribution& dist);

// ---------------------------------------------------------------------------

template <class Rng>
double Distribution::draw(Rng& rng) const noexcept
{
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return rng.uniform(d.lower, d.upper);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return d.mean + std::sqrt(d.variance) * rng.normal();
            } else if constexpr (std::is_same_v<T, ScaledBeta>) {
                return d.lower + (d.upper - d.lower) * rng.beta(d.alpha, d.beta);
            } else {
                return tabulated_quantile(rng.uniform());
            }
        },
        kind_);
}

} // namespace dmatch
