#pragma once

#include "dmatch/densities.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dmatch {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    [[nodiscard]] std::size_t size() const noexcept { return lower.size(); }
    [[nodiscard]] bool contains(std::span<const double> s, double rel_tol = 1e-12) const noexcept;
};

/// Responses and design sensitivities for a batch of uncertainty samples.
struct ResponseBatch {
    std::vector<double> values;  // f(s, omega_j)
    Eigen::MatrixXd sensitivity; // M x n, d f(s, omega_j) / d s_k
};

/// Non-intrusive response interface: f(s, omega) and its design gradient.
/// Implementations are immutable and safe to evaluate from many threads.
class ResponseModel {
public:
    virtual ~ResponseModel() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual const Box& box() const = 0;
    [[nodiscard]] virtual const Distribution& uncertainty() const = 0;
    /// Declared response bounds [f_lower, f_upper] over the box and the support.
    [[nodiscard]] virtual std::pair<double, double> response_bounds() const = 0;

    /// Unchecked evaluation. Callers validate with check_design/check_omega.
    [[nodiscard]] virtual double value(std::span<const double> s, double omega) const = 0;
    virtual void gradient(std::span<const double> s, double omega, std::span<double> out) const = 0;

    /// Evaluate all samples at one design. The default loops value/gradient.
    [[nodiscard]] virtual ResponseBatch evaluate_batch(std::span<const double> s, std::span<const double> omegas,
                                                       bool with_sensitivity) const;

    /// Closed-form response density q_s(x) and its design gradient, when known.
    [[nodiscard]] virtual bool has_analytic_density() const { return false; }
    virtual double analytic_density(std::span<const double> s, double x, std::span<double> dq_ds) const;

    [[nodiscard]] std::size_t dimension() const { return box().size(); }

    void check_design(std::span<const double> s) const;
    virtual void check_omega(double omega) const;
};

/// f = s * omega + 3.5, omega ~ N(0, 1); the response is N(3.5, s^2).
class LinearShiftModel final : public ResponseModel {
public:
    explicit LinearShiftModel(double s_lower = 0.01, double s_upper = 2.0);

    std::string name() const override { return "linear-shift"; }
    const Box& box() const override { return box_; }
    const Distribution& uncertainty() const override { return law_; }
    std::pair<double, double> response_bounds() const override { return {0.0, 7.0}; }
    double value(std::span<const double> s, double omega) const override { return s[0] * omega + 3.5; }
    void gradient(std::span<const double>, double omega, std::span<double> out) const override { out[0] = omega; }
    bool has_analytic_density() const override { return true; }
    double analytic_density(std::span<const double> s, double x, std::span<double> dq_ds) const override;
    void check_omega(double) const override {}

private:
    Box box_;
    Distribution law_;
};

/// f = s + omega, omega ~ U[0, 1], s in [0, 2].
class ExampleShiftModel final : public ResponseModel {
public:
    ExampleShiftModel();

    std::string name() const override { return "example-shift"; }
    const Box& box() const override { return box_; }
    const Distribution& uncertainty() const override { return law_; }
    std::pair<double, double> response_bounds() const override { return {0.0, 3.0}; }
    double value(std::span<const double> s, double omega) const override { return s[0] + omega; }
    void gradient(std::span<const double>, double, std::span<double> out) const override { out[0] = 1.0; }

private:
    Box box_;
    Distribution law_;
};

/// f = constant, for any design dimension.
class ConstantModel final : public ResponseModel {
public:
    ConstantModel(double constant, Box box, Distribution law);

    std::string name() const override { return "constant"; }
    const Box& box() const override { return box_; }
    const Distribution& uncertainty() const override { return law_; }
    std::pair<double, double> response_bounds() const override { return {constant_ - 1.0, constant_ + 1.0}; }
    double value(std::span<const double>, double) const override { return constant_; }
    void gradient(std::span<const double>, double, std::span<double> out) const override;

private:
    double constant_;
    Box box_;
    Distribution law_;
};

/// Analytic stand-in for the lift-to-drag response of a 16-bump airfoil with
/// an uncertain Mach number ~ Beta(2, 2) on [0.66, 0.69].
///
/// With z_k = s_k / a_k the normalized bump height and m = (omega - 0.675) / 0.015,
///
///   f = kappa(omega) * (c(z) + m * b(z) + m^2 * q(z))
///   c = 27.2356 + cz . z - z . z / 2
///   b = b0 + bz . z
///   q = q0 + qz . z
///
/// where kappa is the Prandtl-Glauert ratio sqrt((1 - 0.675^2) / (1 - omega^2)).
/// Bounded in [-100, 150] on the box, smooth, and with a mean/variance/skewness
/// trade-off. Not a model of any real airfoil.
class SyntheticAirfoilModel final : public ResponseModel {
public:
    SyntheticAirfoilModel();

    std::string name() const override { return "synthetic-airfoil"; }
    const Box& box() const override { return box_; }
    const Distribution& uncertainty() const override { return law_; }
    std::pair<double, double> response_bounds() const override { return {-100.0, 150.0}; }
    double value(std::span<const double> s, double omega) const override;
    void gradient(std::span<const double> s, double omega, std::span<double> out) const override;

    static constexpr std::size_t kDesigns = 16;
    /// Bump amplitude per design variable (upper surface then lower surface).
    static std::vector<double> amplitudes();

private:
    struct Coefficients {
        double c, b, q;
    };
    Coefficients coefficients(std::span<const double> s, Eigen::Matrix<double, 3, Eigen::Dynamic>* dz) const;

    Box box_;
    Distribution law_;
    std::vector<double> amp_;
};

// ---------------------------------------------------------------------------
// Polynomial response surfaces in omega

/// Least-squares polynomial on a fit domain; evaluated in the variable
/// x = (2 omega - lo - hi) / (hi - lo), which lives in [-1, 1].
struct PolySurrogate {
    std::size_t degree = 0;
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> coefficients; // monomials in x, ascending
    double residual = 0.0;            // root-mean-square fit residual

    [[nodiscard]] double operator()(double omega) const;
    [[nodiscard]] bool in_domain(double omega) const noexcept;
};

PolySurrogate fit_surrogate(std::span<const double> omegas, std::span<const double> values, std::size_t degree);

/// Fit several quantities sampled at the same omegas with one factorization.
/// Column q of `values` (P x Q) yields surrogate q.
std::vector<PolySurrogate> fit_surrogates(std::span<const double> omegas, const Eigen::MatrixXd& values,
                                          std::size_t degree);

void write_surrogates(std::ostream& out, std::span<const PolySurrogate> fits);
std::vector<PolySurrogate> read_surrogates(std::istream& in);

/// Response surface of a base model in omega at one fixed design: one
/// polynomial for f and one per design derivative.
class SurrogateModel final : public ResponseModel {
public:
    SurrogateModel(std::shared_ptr<const ResponseModel> base, std::vector<double> design, std::size_t points,
                   std::size_t degree);

    std::string name() const override { return "surrogate(" + base_->name() + ")"; }
    const Box& box() const override { return base_->box(); }
    const Distribution& uncertainty() const override { return base_->uncertainty(); }
    std::pair<double, double> response_bounds() const override { return base_->response_bounds(); }
    double value(std::span<const double> s, double omega) const override;
    void gradient(std::span<const double> s, double omega, std::span<double> out) const override;
    void check_omega(double omega) const override;

    [[nodiscard]] const std::vector<double>& design() const noexcept { return design_; }
    [[nodiscard]] const PolySurrogate& value_fit() const noexcept { return fits_.front(); }
    [[nodiscard]] std::span<const PolySurrogate> fits() const noexcept { return fits_; }
    /// Largest residual over all fitted quantities.
    [[nodiscard]] double max_residual() const noexcept;

private:
    void check_same_design(std::span<const double> s) const;

    std::shared_ptr<const ResponseModel> base_;
    std::vector<double> design_;
    std::vector<PolySurrogate> fits_;
};

/// A model that refits a SurrogateModel at every design it is asked about;
/// this is what an expensive simulator sits behind.
class SurrogateBackedModel final : public ResponseModel {
public:
    SurrogateBackedModel(std::shared_ptr<const ResponseModel> base, std::size_t points, std::size_t degree);

    std::string name() const override { return "surrogate-backed(" + base_->name() + ")"; }
    const Box& box() const override { return base_->box(); }
    const Distribution& uncertainty() const override { return base_->uncertainty(); }
    std::pair<double, double> response_bounds() const override { return base_->response_bounds(); }
    double value(std::span<const double> s, double omega) const override;
    void gradient(std::span<const double> s, double omega, std::span<double> out) const override;
    ResponseBatch evaluate_batch(std::span<const double> s, std::span<const double> omegas,
                                 bool with_sensitivity) const override;
    void check_omega(double omega) const override;

    [[nodiscard]] std::size_t points() const noexcept { return points_; }
    [[nodiscard]] std::size_t degree() const noexcept { return degree_; }

private:
    std::shared_ptr<const ResponseModel> base_;
    std::size_t points_;
    std::size_t degree_;
};

/// Fit domain half-width for Gaussian laws, in standard deviations.
inline constexpr double kGaussianFitHalfWidth = 6.0;

/// Uniformly spaced fit locations over the law's support; mean +- 6 sd for
/// a Gaussian.
std::vector<double> fit_locations(const Distribution& law, std::size_t points);

struct SurrogateValidation {
    double residual = 0.0;       // max RMS fit residual over quantities
    double held_out_error = 0.0; // max relative held-out error over quantities
    std::vector<double> held_out_omegas;
};

/// Fit at a design and compare against the base model at held-out points
/// (midpoints between fit locations). Relative error per quantity is
/// max |fit - base| / max |base| over the held-out points.
SurrogateValidation validate_surrogate(const std::shared_ptr<const ResponseModel>& base, std::span<const double> s,
                                       std::size_t points, std::size_t degree, std::size_t held_out = 5);

// Checked single-point evaluation.
double eval_response(const ResponseModel& model, std::span<const double> s, double omega);
std::vector<double> grad_response(const ResponseModel& model, std::span<const double> s, double omega);

} // namespace dmatch
