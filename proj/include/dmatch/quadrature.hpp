#pragma once

#include <span>
#include <vector>

namespace dmatch {

/// Uniformly spaced trapezoid rule on [lower, upper]. Nodes include both
/// endpoints; the weights are the diagonal of W.
class QuadratureGrid {
public:
    QuadratureGrid(double lower, double upper, std::size_t n_points);

    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] double upper() const noexcept { return upper_; }
    [[nodiscard]] double spacing() const noexcept { return spacing_; }
    [[nodiscard]] double length() const noexcept { return upper_ - lower_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] double node(std::size_t i) const noexcept { return nodes_[i]; }
    [[nodiscard]] double weight(std::size_t i) const noexcept { return weights_[i]; }

private:
    double lower_;
    double upper_;
    double spacing_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

QuadratureGrid trapezoid_grid(double lower, double upper, std::size_t n_points);

/// sum_i values_i * w_i
double integrate(const QuadratureGrid& grid, std::span<const double> values);

/// Tabulate a callable at the grid nodes.
template <class F>
std::vector<double> tabulate(const QuadratureGrid& grid, F&& f)
{
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[i] = f(grid.node(i));
    }
    return out;
}

} // namespace dmatch
