#include "dmatch/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

QuadratureGrid::QuadratureGrid(double lower, double upper, std::size_t n_points)
    : lower_(lower), upper_(upper), spacing_(0.0)
{
    if (n_points < 2) {
        throw std::invalid_argument(fmt::format("quadrature grid needs at least 2 points (got {})", n_points));
    }
    if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
        throw std::invalid_argument(fmt::format("quadrature grid needs lower < upper (got {}, {})", lower, upper));
    }
    const auto intervals = static_cast<double>(n_points - 1);
    spacing_ = (upper - lower) / intervals;
    nodes_.resize(n_points);
    weights_.assign(n_points, spacing_);
    for (std::size_t i = 0; i < n_points; ++i) {
        nodes_[i] = lower + (upper - lower) * (static_cast<double>(i) / intervals);
    }
    nodes_.back() = upper;
    weights_.front() = 0.5 * spacing_;
    weights_.back() = 0.5 * spacing_;
}

QuadratureGrid trapezoid_grid(double lower, double upper, std::size_t n_points)
{
    return QuadratureGrid(lower, upper, n_points);
}

double integrate(const QuadratureGrid& grid, std::span<const double> values)
{
    if (values.size() != grid.size()) {
        throw std::invalid_argument(
            fmt::format("integrate: {} values for a {}-point grid", values.size(), grid.size()));
    }
    double sum = 0.0;
    const auto w = grid.weights();
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i] * w[i];
    }
    return sum;
}

} // namespace dmatch
