#pragma once

#include "dmatch/quadrature.hpp"

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dmatch {

struct KernelValue {
    double value;
    double derivative; // with respect to the argument r
};

/// Normalized Gaussian kernel of width h and its derivative in r.
KernelValue kernel_eval(double r, double h);

/// Scott's rule, (4 / 3M)^(1/5) * sigma.
double scott_bandwidth(std::size_t m, double sigma);

/// Scott's rule with sigma taken as the sample standard deviation.
/// Throws std::domain_error for zero-variance samples.
double scott_bandwidth(std::span<const double> samples);

/// Sample standard deviation (divide by M - 1; zero for a single value).
double sample_std(std::span<const double> samples);

/// Dense N x M kernel matrices at one design. Intended for small problems and
/// as the reference against which the fused kernels are checked.
struct KernelMatrices {
    Eigen::MatrixXd K;      // K(i, j) = kernel(gamma_i - f_j) / M
    Eigen::MatrixXd Kprime; // derivative of the kernel in its argument, / M
    double bandwidth = 0.0;
    std::vector<double> sample_values;

    /// q_hat at the nodes, K e.
    [[nodiscard]] Eigen::VectorXd estimate() const { return K.rowwise().sum(); }
};

KernelMatrices build_matrices(std::span<const double> samples, double h, const QuadratureGrid& grid);

/// q_hat at the grid nodes without forming the matrices.
std::vector<double> estimate_on_grid(std::span<const double> samples, double h, const QuadratureGrid& grid);

} // namespace dmatch
