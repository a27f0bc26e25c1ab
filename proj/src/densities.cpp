#include "dmatch/densities.hpp"

#include "dmatch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw std::invalid_argument(what);
    }
}

} // namespace

Distribution::Distribution(Kind k) : kind_(std::move(k))
{
    if (const auto* b = std::get_if<ScaledBeta>(&kind_)) {
        log_norm_ = std::lgamma(b->alpha + b->beta) - std::lgamma(b->alpha) - std::lgamma(b->beta)
                    - std::log(b->upper - b->lower);
    }
}

Distribution Distribution::uniform(double lower, double upper)
{
    require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
            fmt::format("uniform requires lower < upper (got {}, {})", lower, upper));
    return Distribution(Uniform{lower, upper});
}

Distribution Distribution::gaussian(double mean, double variance)
{
    require(std::isfinite(mean) && std::isfinite(variance) && variance > 0.0,
            fmt::format("gaussian requires variance > 0 (got {})", variance));
    return Distribution(Gaussian{mean, variance});
}

Distribution Distribution::scaled_beta(double alpha, double beta, double lower, double upper)
{
    require(alpha > 0.0 && beta > 0.0, fmt::format("beta requires alpha, beta > 0 (got {}, {})", alpha, beta));
    require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
            fmt::format("beta requires lower < upper (got {}, {})", lower, upper));
    return Distribution(ScaledBeta{alpha, beta, lower, upper});
}

Distribution Distribution::tabulated(std::vector<double> nodes, std::vector<double> values)
{
    require(nodes.size() >= 2, "tabulated density needs at least 2 nodes");
    require(nodes.size() == values.size(), "tabulated density: nodes and values differ in length");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        require(std::isfinite(nodes[i]) && std::isfinite(values[i]), "tabulated density: non-finite entry");
        require(values[i] >= 0.0, "tabulated density: negative value");
        if (i > 0) {
            require(nodes[i] > nodes[i - 1], "tabulated density: nodes must be strictly increasing");
        }
    }
    std::vector<double> cum(nodes.size(), 0.0);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        cum[i] = cum[i - 1] + 0.5 * (values[i] + values[i - 1]) * (nodes[i] - nodes[i - 1]);
    }
    const double total = cum.back();
    require(total > 0.0, "tabulated density integrates to zero");
    for (auto& v : values) {
        v /= total;
    }
    for (auto& c : cum) {
        c /= total;
    }
    return Distribution(Tabulated{std::move(nodes), std::move(values), std::move(cum)});
}

double Distribution::pdf(double x) const noexcept
{
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return (x >= d.lower && x <= d.upper) ? 1.0 / (d.upper - d.lower) : 0.0;
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                const double z = x - d.mean;
                return std::exp(-0.5 * z * z / d.variance) / std::sqrt(2.0 * std::numbers::pi * d.variance);
            } else if constexpr (std::is_same_v<T, ScaledBeta>) {
                if (x < d.lower || x > d.upper) {
                    return 0.0;
                }
                const double y = (x - d.lower) / (d.upper - d.lower);
                if ((y == 0.0 && d.alpha < 1.0) || (y == 1.0 && d.beta < 1.0)) {
                    return std::numeric_limits<double>::infinity();
                }
                if ((y == 0.0 && d.alpha > 1.0) || (y == 1.0 && d.beta > 1.0)) {
                    return 0.0;
                }
                return std::exp(log_norm_ + (d.alpha - 1.0) * std::log(y) + (d.beta - 1.0) * std::log1p(-y));
            } else {
                const auto& n = d.nodes;
                if (x < n.front() || x > n.back()) {
                    return 0.0;
                }
                auto it = std::upper_bound(n.begin(), n.end(), x);
                if (it == n.end()) {
                    return d.values.back();
                }
                const auto k = static_cast<std::size_t>(it - n.begin()) - 1;
                const double t = (x - n[k]) / (n[k + 1] - n[k]);
                return d.values[k] + t * (d.values[k + 1] - d.values[k]);
            }
        },
        kind_);
}

double Distribution::tabulated_quantile(double u) const noexcept
{
    const auto& d = std::get<Tabulated>(kind_);
    const auto& c = d.cumulative;
    auto it = std::upper_bound(c.begin(), c.end(), u);
    if (it == c.begin()) {
        return d.nodes.front();
    }
    if (it == c.end()) {
        return d.nodes.back();
    }
    const auto k = static_cast<std::size_t>(it - c.begin()) - 1;
    // Density is linear on the segment, so the CDF is quadratic in the offset.
    const double width = d.nodes[k + 1] - d.nodes[k];
    const double v0 = d.values[k];
    const double slope = (d.values[k + 1] - v0) / width;
    const double need = u - c[k];
    double t;
    if (std::abs(slope) < 1e-14 * std::max(1.0, v0)) {
        t = v0 > 0.0 ? need / v0 : 0.0;
    } else {
        const double disc = std::max(0.0, v0 * v0 + 2.0 * slope * need);
        t = 2.0 * need / (v0 + std::sqrt(disc));
    }
    return d.nodes[k] + std::clamp(t, 0.0, width);
}

std::optional<Moments> Distribution::moments() const noexcept
{
    return std::visit(
        [](const auto& d) -> std::optional<Moments> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                const double w = d.upper - d.lower;
                return Moments{0.5 * (d.lower + d.upper), w * w / 12.0};
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return Moments{d.mean, d.variance};
            } else if constexpr (std::is_same_v<T, ScaledBeta>) {
                const double w = d.upper - d.lower;
                const double s = d.alpha + d.beta;
                return Moments{d.lower + w * d.alpha / s, w * w * d.alpha * d.beta / (s * s * (s + 1.0))};
            } else {
                return std::nullopt;
            }
        },
        kind_);
}

std::optional<double> Distribution::skewness() const noexcept
{
    return std::visit(
        [](const auto& d) -> std::optional<double> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Uniform> || std::is_same_v<T, Gaussian>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, ScaledBeta>) {
                const double s = d.alpha + d.beta;
                return 2.0 * (d.beta - d.alpha) * std::sqrt(s + 1.0) / ((s + 2.0) * std::sqrt(d.alpha * d.beta));
            } else {
                return std::nullopt;
            }
        },
        kind_);
}

std::pair<double, double> Distribution::support() const noexcept
{
    return std::visit(
        [](const auto& d) -> std::pair<double, double> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                return {d.nodes.front(), d.nodes.back()};
            } else {
                return {d.lower, d.upper};
            }
        },
        kind_);
}

bool Distribution::bounded() const noexcept
{
    return !std::holds_alternative<Gaussian>(kind_);
}

std::string Distribution::describe() const
{
    return std::visit(
        [](const auto& d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return fmt::format("uniform({}, {})", d.lower, d.upper);
            } else if constexpr (std::is_same_v<T, Gaussian>) {
                return fmt::format("gaussian({}, {})", d.mean, d.variance);
            } else if constexpr (std::is_same_v<T, ScaledBeta>) {
                return fmt::format("beta({}, {}, {}, {})", d.alpha, d.beta, d.lower, d.upper);
            } else {
                return fmt::format("tabulated({} nodes on [{}, {}])", d.nodes.size(), d.nodes.front(), d.nodes.back());
            }
        },
        kind_);
}

SampleSet sample(const Distribution& dist, std::uint64_t seed, std::size_t count)
{
    if (count < 1) {
        throw std::invalid_argument("sample: count must be >= 1");
    }
    SampleSet out;
    out.values.resize(count);
    out.seed = seed;
    out.source = dist.describe();
    const auto m = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < m; ++j) {
        CounterRng rng(seed, static_cast<std::uint64_t>(j));
        out.values[static_cast<std::size_t>(j)] = dist.draw(rng);
    }
    return out;
}

Moments analytic_moments(const Distribution& dist)
{
    if (auto m = dist.moments()) {
        return *m;
    }
    throw std::domain_error("analytic moments are unsupported for " + dist.describe() + "; use sample moments");
}

} // namespace dmatch
