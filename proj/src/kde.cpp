#include "dmatch/kde.hpp"

#include "dmatch/kde_kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

KernelValue kernel_eval(double r, double h)
{
    if (!(h > 0.0)) {
        throw std::invalid_argument(fmt::format("kernel bandwidth must be positive (got {})", h));
    }
    const double u = r / h;
    const double value = std::exp(-0.5 * u * u) / (h * std::sqrt(2.0 * std::numbers::pi));
    return {value, -value * u / h};
}

double scott_bandwidth(std::size_t m, double sigma)
{
    if (m < 1) {
        throw std::invalid_argument("scott_bandwidth: sample count must be >= 1");
    }
    if (!(sigma > 0.0)) {
        throw std::domain_error(fmt::format("scott_bandwidth: sigma must be positive (got {})", sigma));
    }
    return std::pow(4.0 / (3.0 * static_cast<double>(m)), 0.2) * sigma;
}

double sample_std(std::span<const double> samples)
{
    if (samples.size() < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : samples) {
        mean += v;
    }
    mean /= static_cast<double>(samples.size());
    double ss = 0.0;
    for (double v : samples) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(samples.size() - 1));
}

double scott_bandwidth(std::span<const double> samples)
{
    const double sigma = sample_std(samples);
    if (!(sigma > 0.0)) {
        throw std::domain_error("scott_bandwidth: samples have zero variance");
    }
    return scott_bandwidth(samples.size(), sigma);
}

KernelMatrices build_matrices(std::span<const double> samples, double h, const QuadratureGrid& grid)
{
    if (samples.empty()) {
        throw std::invalid_argument("build_matrices: need at least one sample");
    }
    const auto n = static_cast<Eigen::Index>(grid.size());
    const auto m = static_cast<Eigen::Index>(samples.size());
    KernelMatrices km;
    km.K.resize(n, m);
    km.Kprime.resize(n, m);
    km.bandwidth = h;
    km.sample_values.assign(samples.begin(), samples.end());
    const double inv_m = 1.0 / static_cast<double>(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = kernel_eval(grid.node(static_cast<std::size_t>(i)) - samples[static_cast<std::size_t>(j)], h);
            km.K(i, j) = k.value * inv_m;
            km.Kprime(i, j) = k.derivative * inv_m;
        }
    }
    return km;
}

std::vector<double> estimate_on_grid(std::span<const double> samples, double h, const QuadratureGrid& grid)
{
    if (!(h > 0.0)) {
        throw std::invalid_argument(fmt::format("kernel bandwidth must be positive (got {})", h));
    }
    std::vector<double> out(grid.size());
    kernels::density_parallel(samples, h, grid, out);
    return out;
}

} // namespace dmatch
