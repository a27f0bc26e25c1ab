#pragma once

#include "dmatch/densities.hpp"
#include "dmatch/kde.hpp"
#include "dmatch/models.hpp"
#include "dmatch/quadrature.hpp"

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dmatch {

/// Partial derivatives of the sampled responses: row j is grad_s f(s, omega_j).
struct SensitivityMatrix {
    Eigen::MatrixXd fprime; // M x n
};

struct ObjectiveEvaluation {
    double value = 0.0;      // sum_i (t_i - q_i)^2 w_i
    double normalized = 0.0; // value / (f_upper - f_lower)
    std::vector<double> gradient;
    std::vector<double> target_trace;
    std::vector<double> response_trace;
    double bandwidth = 0.0; // zero on the closed-form path
    /// Cosine of the angle between t and q in the W inner product; zero
    /// means the estimate has no mass on the target's support.
    double overlap = 0.0;
};

/// Discretized squared L2 distance between two traces on the grid.
double distance_hat(std::span<const double> target, std::span<const double> response, const QuadratureGrid& grid);

/// Dense assembly 2 (t - K e)^T W K' F'. Because K' is the kernel derivative
/// in its argument and d(gamma - f_j)/ds = -df_j/ds, the two sign flips of the
/// chain rule cancel and no extra minus sign appears.
std::vector<double> gradient_hat(std::span<const double> target, const KernelMatrices& mats,
                                 const QuadratureGrid& grid, const SensitivityMatrix& sens);

SensitivityMatrix design_sensitivities(const ResponseModel& model, std::span<const double> s,
                                       std::span<const double> omegas);

struct BandwidthPolicy {
    enum class Mode { fixed, scott };
    Mode mode = Mode::scott;
    double value = 0.0;

    static BandwidthPolicy fixed(double h);
    static BandwidthPolicy scott() { return {}; }
};

enum class KernelBackend { parallel, reference };

/// d_hat(s) with the response density replaced by its Gaussian kernel
/// estimate over a frozen set of uncertainty samples. Under the Scott policy
/// the bandwidth follows the design, h(s) = scott(M, std(f(s))), and the
/// gradient carries the d h / d s term.
class DensityObjective {
public:
    DensityObjective(std::shared_ptr<const ResponseModel> model, const Distribution& target, QuadratureGrid grid,
                     std::vector<double> omegas, BandwidthPolicy bandwidth,
                     KernelBackend backend = KernelBackend::parallel);

    [[nodiscard]] ObjectiveEvaluation evaluate(std::span<const double> s, bool with_gradient) const;

    [[nodiscard]] const QuadratureGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::span<const double> target_trace() const noexcept { return target_; }
    [[nodiscard]] std::span<const double> omegas() const noexcept { return omegas_; }
    [[nodiscard]] const ResponseModel& model() const noexcept { return *model_; }
    [[nodiscard]] const BandwidthPolicy& bandwidth() const noexcept { return bandwidth_; }

    void set_bandwidth(BandwidthPolicy policy);

    /// Bandwidth the policy would pick at this design.
    [[nodiscard]] double bandwidth_at(std::span<const double> s) const;

private:
    std::shared_ptr<const ResponseModel> model_;
    QuadratureGrid grid_;
    std::vector<double> target_;
    std::vector<double> omegas_;
    BandwidthPolicy bandwidth_;
    KernelBackend backend_;
};

/// d_hat(s) with the closed-form response density of the model.
class AnalyticObjective {
public:
    AnalyticObjective(std::shared_ptr<const ResponseModel> model, const Distribution& target, QuadratureGrid grid);

    [[nodiscard]] ObjectiveEvaluation evaluate(std::span<const double> s, bool with_gradient) const;
    [[nodiscard]] const QuadratureGrid& grid() const noexcept { return grid_; }

private:
    std::shared_ptr<const ResponseModel> model_;
    QuadratureGrid grid_;
    std::vector<double> target_;
};

} // namespace dmatch
