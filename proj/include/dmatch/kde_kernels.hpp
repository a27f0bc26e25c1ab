#pragma once

// Low-level kernel sums behind the density estimate and its gradient.
//
// Every routine exists twice: a serial reference that visits all N x M
// (node, sample) pairs with a direct exp, and an OpenMP version that only
// visits nodes within kCutoff bandwidths of each sample and walks the uniform
// grid with a multiplicative recurrence. Results of the parallel versions do
// not depend on the thread count.

#include "dmatch/quadrature.hpp"

#include <span>

namespace dmatch::kernels {

/// Half-width of the visited window, in bandwidths. exp(-50) ~ 2e-22 relative
/// to the kernel peak.
inline constexpr double kCutoff = 10.0;

/// out_i = (1/M) sum_j K(gamma_i - f_j)
void density_reference(std::span<const double> samples, double h, const QuadratureGrid& grid,
                       std::span<double> out);
void density_parallel(std::span<const double> samples, double h, const QuadratureGrid& grid,
                      std::span<double> out);

/// Contract per-node coefficients c against the kernel derivatives:
///   per_sample_j = (1/M) sum_i c_i K'(gamma_i - f_j)
///   returns      (1/M) sum_ij c_i dK(gamma_i - f_j)/dh
double contract_reference(std::span<const double> samples, double h, const QuadratureGrid& grid,
                          std::span<const double> coeff, std::span<double> per_sample);
double contract_parallel(std::span<const double> samples, double h, const QuadratureGrid& grid,
                         std::span<const double> coeff, std::span<double> per_sample);

} // namespace dmatch::kernels
