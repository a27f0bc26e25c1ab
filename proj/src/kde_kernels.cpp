#include "dmatch/kde_kernels.hpp"

#include "dmatch/kde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dmatch::kernels {

namespace {

constexpr std::size_t kReanchor = 64;

struct Window {
    std::size_t first = 0;
    std::size_t last = 0;
    bool empty = true;
};

Window window_for(double f, double radius, const QuadratureGrid& grid)
{
    const double top = static_cast<double>(grid.size() - 1);
    const double lo = (f - radius - grid.lower()) / grid.spacing();
    const double hi = (f + radius - grid.lower()) / grid.spacing();
    if (!(hi >= 0.0) || !(lo <= top)) {
        return {};
    }
    Window w;
    w.first = lo <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(lo));
    w.last = hi >= top ? grid.size() - 1 : static_cast<std::size_t>(std::floor(hi));
    w.empty = w.first > w.last;
    return w;
}

// Calls visit(i, u, exp(-u^2/2)) for every node in the window, u = (gamma_i - f)/h.
// Successive Gaussians on a uniform grid differ by a factor that itself changes
// geometrically, so two multiplies replace the exp. Re-anchored every
// kReanchor nodes to keep the rounding drift at the 1e-13 level.
template <class Visit>
void walk(double f, double h, const QuadratureGrid& grid, Window w, Visit&& visit)
{
    if (w.empty) {
        return;
    }
    const double delta = grid.spacing() / h;
    if (delta >= 0.5) {
        for (std::size_t i = w.first; i <= w.last; ++i) {
            const double u = (grid.node(i) - f) / h;
            visit(i, u, std::exp(-0.5 * u * u));
        }
        return;
    }
    const double step_ratio = std::exp(-delta * delta);
    std::size_t i = w.first;
    while (i <= w.last) {
        double u = (grid.node(i) - f) / h;
        double e = std::exp(-0.5 * u * u);
        double rho = std::exp(-u * delta - 0.5 * delta * delta);
        const std::size_t stop = std::min(w.last, i + kReanchor - 1);
        for (; i <= stop; ++i) {
            visit(i, u, e);
            e *= rho;
            rho *= step_ratio;
            u += delta;
        }
    }
}

void check_inputs(std::span<const double> samples, double h)
{
    if (samples.empty()) {
        throw std::invalid_argument("kernel sums need at least one sample");
    }
    if (!(h > 0.0)) {
        throw std::invalid_argument("bandwidth must be positive");
    }
}

} // namespace

void density_reference(std::span<const double> samples, double h, const QuadratureGrid& grid,
                       std::span<double> out)
{
    check_inputs(samples, h);
    const double inv_m = 1.0 / static_cast<double>(samples.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double sum = 0.0;
        for (double f : samples) {
            sum += kernel_eval(grid.node(i) - f, h).value;
        }
        out[i] = sum * inv_m;
    }
}

void density_parallel(std::span<const double> samples, double h, const QuadratureGrid& grid,
                      std::span<double> out)
{
    check_inputs(samples, h);
    const std::size_t m = samples.size();
    const std::size_t n = grid.size();
    const double radius = kCutoff * h;
    // Block count depends only on M, so the summation order is fixed.
    const std::size_t blocks = std::clamp<std::size_t>(m / 2048, 1, 64);
    std::vector<double> partial(blocks * n, 0.0);

    const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < nb; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        double* acc = partial.data() + ub * n;
        const std::size_t j0 = ub * m / blocks;
        const std::size_t j1 = (ub + 1) * m / blocks;
        for (std::size_t j = j0; j < j1; ++j) {
            const double f = samples[j];
            walk(f, h, grid, window_for(f, radius, grid), [acc](std::size_t i, double, double e) { acc[i] += e; });
        }
    }

    const double scale = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(m));
    const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < nn; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double sum = 0.0;
        for (std::size_t b = 0; b < blocks; ++b) {
            sum += partial[b * n + i];
        }
        out[i] = sum * scale;
    }
}

double contract_reference(std::span<const double> samples, double h, const QuadratureGrid& grid,
                          std::span<const double> coeff, std::span<double> per_sample)
{
    check_inputs(samples, h);
    const double inv_m = 1.0 / static_cast<double>(samples.size());
    double dh = 0.0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double r = grid.node(i) - samples[j];
            const auto k = kernel_eval(r, h);
            const double u = r / h;
            acc += coeff[i] * k.derivative;
            dh += coeff[i] * k.value * (u * u - 1.0) / h;
        }
        per_sample[j] = acc * inv_m;
    }
    return dh * inv_m;
}

double contract_parallel(std::span<const double> samples, double h, const QuadratureGrid& grid,
                         std::span<const double> coeff, std::span<double> per_sample)
{
    check_inputs(samples, h);
    const std::size_t m = samples.size();
    const double radius = kCutoff * h;
    const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<double> dh_part(m, 0.0);

    const auto mm = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t jj = 0; jj < mm; ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        const double f = samples[j];
        double slope = 0.0;
        double width = 0.0;
        walk(f, h, grid, window_for(f, radius, grid), [&](std::size_t i, double u, double e) {
            const double ce = coeff[i] * e;
            slope -= ce * u;
            width += ce * (u * u - 1.0);
        });
        per_sample[j] = slope * norm * inv_m / h;
        dh_part[j] = width;
    }

    double dh = 0.0;
    for (double v : dh_part) {
        dh += v;
    }
    return dh * norm * inv_m / h;
}

} // namespace dmatch::kernels
