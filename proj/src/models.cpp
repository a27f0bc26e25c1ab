#include "dmatch/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

bool Box::contains(std::span<const double> s, double rel_tol) const noexcept
{
    if (s.size() != lower.size()) {
        return false;
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double slack = rel_tol * std::max(1.0, upper[k] - lower[k]);
        if (!(s[k] >= lower[k] - slack && s[k] <= upper[k] + slack)) {
            return false;
        }
    }
    return true;
}

void ResponseModel::check_design(std::span<const double> s) const
{
    const Box& b = box();
    if (s.size() != b.size()) {
        throw std::invalid_argument(
            fmt::format("{}: design has {} components, model expects {}", name(), s.size(), b.size()));
    }
    if (!b.contains(s)) {
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (!(s[k] >= b.lower[k] && s[k] <= b.upper[k])) {
                throw std::out_of_range(fmt::format("{}: design component {} = {} outside [{}, {}]", name(), k, s[k],
                                                    b.lower[k], b.upper[k]));
            }
        }
    }
}

void ResponseModel::check_omega(double omega) const
{
    const auto [lo, hi] = uncertainty().support();
    if (!(omega >= lo && omega <= hi)) {
        throw std::out_of_range(fmt::format("{}: omega = {} outside the support [{}, {}]", name(), omega, lo, hi));
    }
}

double ResponseModel::analytic_density(std::span<const double>, double, std::span<double>) const
{
    throw std::logic_error(name() + " has no closed-form response density");
}

ResponseBatch ResponseModel::evaluate_batch(std::span<const double> s, std::span<const double> omegas,
                                            bool with_sensitivity) const
{
    const std::size_t m = omegas.size();
    const std::size_t n = dimension();
    ResponseBatch out;
    out.values.resize(m);
    if (with_sensitivity) {
        out.sensitivity.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    }
    const auto mm = static_cast<std::int64_t>(m);
#pragma omp parallel
    {
        std::vector<double> g(n);
#pragma omp for schedule(static)
        for (std::int64_t jj = 0; jj < mm; ++jj) {
            const auto j = static_cast<std::size_t>(jj);
            out.values[j] = value(s, omegas[j]);
            if (with_sensitivity) {
                gradient(s, omegas[j], g);
                for (std::size_t k = 0; k < n; ++k) {
                    out.sensitivity(jj, static_cast<Eigen::Index>(k)) = g[k];
                }
            }
        }
    }
    return out;
}

double eval_response(const ResponseModel& model, std::span<const double> s, double omega)
{
    model.check_design(s);
    model.check_omega(omega);
    return model.value(s, omega);
}

std::vector<double> grad_response(const ResponseModel& model, std::span<const double> s, double omega)
{
    model.check_design(s);
    model.check_omega(omega);
    std::vector<double> g(model.dimension());
    model.gradient(s, omega, g);
    return g;
}

// --- built-in models -------------------------------------------------------

LinearShiftModel::LinearShiftModel(double s_lower, double s_upper)
    : box_{{s_lower}, {s_upper}}, law_(Distribution::gaussian(0.0, 1.0))
{
    if (!(s_lower > 0.0 && s_lower < s_upper)) {
        throw std::invalid_argument("linear-shift: design box must satisfy 0 < lower < upper");
    }
}

double LinearShiftModel::analytic_density(std::span<const double> s, double x, std::span<double> dq_ds) const
{
    const double sd = s[0];
    const double z = (x - 3.5) / sd;
    const double q = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
    dq_ds[0] = q * (z * z - 1.0) / sd;
    return q;
}

ExampleShiftModel::ExampleShiftModel() : box_{{0.0}, {2.0}}, law_(Distribution::uniform(0.0, 1.0)) {}

ConstantModel::ConstantModel(double constant, Box box, Distribution law)
    : constant_(constant), box_(std::move(box)), law_(std::move(law))
{
}

void ConstantModel::gradient(std::span<const double>, double, std::span<double> out) const
{
    std::fill(out.begin(), out.end(), 0.0);
}

namespace {

// Upper-surface bumps then lower-surface bumps, chord stations
// 0.05 0.15 0.30 0.40 0.55 0.65 0.75 0.90.
constexpr std::array<double, 8> kBumpAmplitude{0.0007, 0.0030, 0.0090, 0.0090, 0.0090, 0.0060, 0.0030, 0.0007};

constexpr double kNominalLift = 27.2356;
constexpr double kSlope0 = 5.393;
constexpr double kCurvature0 = -6.0;

// Mid-chord bumps (upper 3-5, lower 11-13) raise lift and lift slope and
// lower the curvature in Mach; aft bumps buy curvature with lift; leading and
// trailing edge bumps flatten the slope at a small lift cost.
constexpr std::array<double, 16> kLiftGain{-1.6, -1.6, 9.6, 12.0, 10.8, -2.0, -2.0, -1.6,
                                           -1.6, -1.6, 8.4, 10.8, 8.4,  -2.0, -2.0, -1.6};
constexpr double kLiftPenalty = 0.5;
constexpr std::array<double, 16> kSlopeGain{-1.0, -1.0, 2.112, 2.64,  2.376, 0.0, 0.0, -1.0,
                                            -1.0, -1.0, 1.848, 2.376, 1.848, 0.0, 0.0, -1.0};
constexpr std::array<double, 16> kCurvatureGain{0.0, 0.0, -0.48, -0.6,  -0.54, 5.0, 5.0, 0.0,
                                                0.0, 0.0, -0.42, -0.54, -0.42, 5.0, 5.0, 0.0};

constexpr double kMachCentre = 0.675;
constexpr double kMachHalfWidth = 0.015;

// Prandtl-Glauert factor relative to the centre Mach number.
double compressibility(double mach)
{
    return std::sqrt((1.0 - kMachCentre * kMachCentre) / (1.0 - mach * mach));
}

} // namespace

std::vector<double> SyntheticAirfoilModel::amplitudes()
{
    std::vector<double> a(kDesigns);
    for (std::size_t k = 0; k < kDesigns; ++k) {
        a[k] = kBumpAmplitude[k % 8];
    }
    return a;
}

SyntheticAirfoilModel::SyntheticAirfoilModel()
    : law_(Distribution::scaled_beta(2.0, 2.0, 0.66, 0.69)), amp_(amplitudes())
{
    box_.lower.resize(kDesigns);
    box_.upper.resize(kDesigns);
    for (std::size_t k = 0; k < kDesigns; ++k) {
        box_.lower[k] = -amp_[k];
        box_.upper[k] = amp_[k];
    }
}

SyntheticAirfoilModel::Coefficients
SyntheticAirfoilModel::coefficients(std::span<const double> s, Eigen::Matrix<double, 3, Eigen::Dynamic>* dz) const
{
    Coefficients co{kNominalLift, kSlope0, kCurvature0};
    for (std::size_t k = 0; k < kDesigns; ++k) {
        const double z = s[k] / amp_[k];
        co.c += kLiftGain[k] * z - kLiftPenalty * z * z;
        co.b += kSlopeGain[k] * z;
        co.q += kCurvatureGain[k] * z;
        if (dz != nullptr) {
            const auto col = static_cast<Eigen::Index>(k);
            (*dz)(0, col) = (kLiftGain[k] - 2.0 * kLiftPenalty * z) / amp_[k];
            (*dz)(1, col) = kSlopeGain[k] / amp_[k];
            (*dz)(2, col) = kCurvatureGain[k] / amp_[k];
        }
    }
    return co;
}

double SyntheticAirfoilModel::value(std::span<const double> s, double omega) const
{
    const auto co = coefficients(s, nullptr);
    const double m = (omega - kMachCentre) / kMachHalfWidth;
    return compressibility(omega) * (co.c + m * co.b + m * m * co.q);
}

void SyntheticAirfoilModel::gradient(std::span<const double> s, double omega, std::span<double> out) const
{
    Eigen::Matrix<double, 3, Eigen::Dynamic> dz(3, static_cast<Eigen::Index>(kDesigns));
    coefficients(s, &dz);
    const double m = (omega - kMachCentre) / kMachHalfWidth;
    const double kappa = compressibility(omega);
    for (std::size_t k = 0; k < kDesigns; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        out[k] = kappa * (dz(0, col) + m * dz(1, col) + m * m * dz(2, col));
    }
}

// --- polynomial surrogates -------------------------------------------------

namespace {

double to_unit(double omega, double lo, double hi)
{
    return (2.0 * omega - lo - hi) / (hi - lo);
}

Eigen::MatrixXd vandermonde(std::span<const double> omegas, std::size_t degree, double lo, double hi)
{
    const auto p = static_cast<Eigen::Index>(omegas.size());
    const auto cols = static_cast<Eigen::Index>(degree + 1);
    Eigen::MatrixXd v(p, cols);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double x = to_unit(omegas[static_cast<std::size_t>(i)], lo, hi);
        double power = 1.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            v(i, c) = power;
            power *= x;
        }
    }
    return v;
}

constexpr double kDomainSlack = 1e-12;

} // namespace

double PolySurrogate::operator()(double omega) const
{
    const double x = to_unit(omega, lo, hi);
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) {
        acc = acc * x + *it;
    }
    return acc;
}

bool PolySurrogate::in_domain(double omega) const noexcept
{
    const double slack = kDomainSlack * (hi - lo);
    return omega >= lo - slack && omega <= hi + slack;
}

std::vector<PolySurrogate> fit_surrogates(std::span<const double> omegas, const Eigen::MatrixXd& values,
                                          std::size_t degree)
{
    const std::size_t p = omegas.size();
    if (p <= degree) {
        throw std::invalid_argument(fmt::format("fit_surrogate: {} points cannot fit degree {}", p, degree));
    }
    if (static_cast<std::size_t>(values.rows()) != p) {
        throw std::invalid_argument("fit_surrogate: value rows do not match the number of points");
    }
    const auto [min_it, max_it] = std::minmax_element(omegas.begin(), omegas.end());
    const double lo = *min_it;
    const double hi = *max_it;
    if (!(hi > lo)) {
        throw std::invalid_argument("fit_surrogate: fit points must span a nonempty interval");
    }
    const Eigen::MatrixXd v = vandermonde(omegas, degree, lo, hi);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    qr.setThreshold(1e-12);
    if (qr.rank() < static_cast<Eigen::Index>(degree + 1)) {
        throw std::invalid_argument(fmt::format(
            "fit_surrogate: rank-deficient design ({} of {}); are there duplicate omegas?", qr.rank(), degree + 1));
    }
    const Eigen::MatrixXd coef = qr.solve(values);
    const Eigen::MatrixXd resid = v * coef - values;

    std::vector<PolySurrogate> fits(static_cast<std::size_t>(values.cols()));
    for (Eigen::Index q = 0; q < values.cols(); ++q) {
        auto& f = fits[static_cast<std::size_t>(q)];
        f.degree = degree;
        f.lo = lo;
        f.hi = hi;
        f.coefficients.assign(coef.col(q).data(), coef.col(q).data() + coef.rows());
        f.residual = std::sqrt(resid.col(q).squaredNorm() / static_cast<double>(p));
    }
    return fits;
}

PolySurrogate fit_surrogate(std::span<const double> omegas, std::span<const double> values, std::size_t degree)
{
    if (values.size() != omegas.size()) {
        throw std::invalid_argument("fit_surrogate: omegas and values differ in length");
    }
    Eigen::MatrixXd y(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        y(static_cast<Eigen::Index>(i), 0) = values[i];
    }
    return fit_surrogates(omegas, y, degree).front();
}

void write_surrogates(std::ostream& out, std::span<const PolySurrogate> fits)
{
    out << "# quantity degree lo hi residual coefficients...\n";
    for (std::size_t q = 0; q < fits.size(); ++q) {
        const auto& f = fits[q];
        out << fmt::format("{} {} {:.17g} {:.17g} {:.17g}", q, f.degree, f.lo, f.hi, f.residual);
        for (double c : f.coefficients) {
            out << fmt::format(" {:.17g}", c);
        }
        out << '\n';
    }
}

std::vector<PolySurrogate> read_surrogates(std::istream& in)
{
    std::vector<PolySurrogate> fits;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::istringstream row(line);
        std::size_t q = 0;
        PolySurrogate f;
        if (!(row >> q >> f.degree >> f.lo >> f.hi >> f.residual)) {
            throw std::runtime_error("read_surrogates: malformed row: " + line);
        }
        if (q != fits.size()) {
            throw std::runtime_error("read_surrogates: quantities out of order");
        }
        f.coefficients.resize(f.degree + 1);
        for (auto& c : f.coefficients) {
            if (!(row >> c)) {
                throw std::runtime_error("read_surrogates: too few coefficients: " + line);
            }
        }
        fits.push_back(std::move(f));
    }
    return fits;
}

std::vector<double> fit_locations(const Distribution& law, std::size_t points)
{
    if (points < 2) {
        throw std::invalid_argument("surrogate fits need at least 2 points");
    }
    auto [lo, hi] = law.support();
    if (!law.bounded()) {
        // Gaussian: mean +- 6 sd holds all but ~2e-9 of the mass.
        const auto m = law.moments();
        if (!m) {
            throw std::invalid_argument("surrogate fits need a bounded uncertainty law, got " + law.describe());
        }
        const double sd = std::sqrt(m->variance);
        lo = m->mean - kGaussianFitHalfWidth * sd;
        hi = m->mean + kGaussianFitHalfWidth * sd;
    }
    std::vector<double> w(points);
    for (std::size_t i = 0; i < points; ++i) {
        w[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    w.back() = hi;
    return w;
}

SurrogateModel::SurrogateModel(std::shared_ptr<const ResponseModel> base, std::vector<double> design,
                               std::size_t points, std::size_t degree)
    : base_(std::move(base)), design_(std::move(design))
{
    base_->check_design(design_);
    const auto omegas = fit_locations(base_->uncertainty(), points);
    // Column 0 is f, column 1 + k is df/ds_k. The same least-squares operator
    // maps both, so the gradient fit is the exact design derivative of the value fit.
    const ResponseBatch batch = base_->evaluate_batch(design_, omegas, true);
    const auto n = static_cast<Eigen::Index>(base_->dimension());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(points), n + 1);
    for (std::size_t i = 0; i < points; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        y(r, 0) = batch.values[i];
        y.row(r).tail(n) = batch.sensitivity.row(r);
    }
    fits_ = fit_surrogates(omegas, y, degree);
}

void SurrogateModel::check_same_design(std::span<const double> s) const
{
    if (!std::equal(s.begin(), s.end(), design_.begin(), design_.end())) {
        throw std::invalid_argument("surrogate was fitted at a different design; refit first");
    }
}

void SurrogateModel::check_omega(double omega) const
{
    const auto& f = fits_.front();
    if (!f.in_domain(omega)) {
        throw std::out_of_range(fmt::format(
            "surrogate: omega = {} outside the fit domain [{}, {}]; extrapolated values are not validated", omega,
            f.lo, f.hi));
    }
}

double SurrogateModel::value(std::span<const double> s, double omega) const
{
    check_same_design(s);
    return fits_.front()(omega);
}

void SurrogateModel::gradient(std::span<const double> s, double omega, std::span<double> out) const
{
    check_same_design(s);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = fits_[k + 1](omega);
    }
}

double SurrogateModel::max_residual() const noexcept
{
    double r = 0.0;
    for (const auto& f : fits_) {
        r = std::max(r, f.residual);
    }
    return r;
}

SurrogateBackedModel::SurrogateBackedModel(std::shared_ptr<const ResponseModel> base, std::size_t points,
                                           std::size_t degree)
    : base_(std::move(base)), points_(points), degree_(degree)
{
    if (points_ <= degree_) {
        throw std::invalid_argument(fmt::format("surrogate: {} points cannot fit degree {}", points_, degree_));
    }
    (void)fit_locations(base_->uncertainty(), points_);
}

void SurrogateBackedModel::check_omega(double omega) const
{
    const auto fit = fit_locations(base_->uncertainty(), 2);
    const double lo = fit.front();
    const double hi = fit.back();
    const double slack = kDomainSlack * (hi - lo);
    if (!(omega >= lo - slack && omega <= hi + slack)) {
        throw std::out_of_range(
            fmt::format("surrogate: omega = {} outside the fit domain [{}, {}]", omega, lo, hi));
    }
}

double SurrogateBackedModel::value(std::span<const double> s, double omega) const
{
    SurrogateModel fit(base_, {s.begin(), s.end()}, points_, degree_);
    return fit.value(s, omega);
}

void SurrogateBackedModel::gradient(std::span<const double> s, double omega, std::span<double> out) const
{
    SurrogateModel fit(base_, {s.begin(), s.end()}, points_, degree_);
    fit.gradient(s, omega, out);
}

ResponseBatch SurrogateBackedModel::evaluate_batch(std::span<const double> s, std::span<const double> omegas,
                                                   bool with_sensitivity) const
{
    const SurrogateModel fit(base_, {s.begin(), s.end()}, points_, degree_);
    return fit.evaluate_batch(s, omegas, with_sensitivity);
}

SurrogateValidation validate_surrogate(const std::shared_ptr<const ResponseModel>& base, std::span<const double> s,
                                       std::size_t points, std::size_t degree, std::size_t held_out)
{
    const SurrogateModel fit(base, {s.begin(), s.end()}, points, degree);
    SurrogateValidation out;
    out.residual = fit.max_residual();

    const auto [lo, hi] = base->uncertainty().support();
    const double cell = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t h = 0; h < held_out; ++h) {
        // Midpoint of a fit interval, spread evenly across the domain.
        const std::size_t cell_index = (2 * h + 1) * (points - 1) / (2 * held_out);
        out.held_out_omegas.push_back(lo + (static_cast<double>(cell_index) + 0.5) * cell);
    }
    const ResponseBatch exact = base->evaluate_batch(s, out.held_out_omegas, true);
    const ResponseBatch approx = fit.evaluate_batch(s, out.held_out_omegas, true);

    const auto n = static_cast<Eigen::Index>(base->dimension());
    for (Eigen::Index q = -1; q < n; ++q) {
        double err = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < held_out; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double e = q < 0 ? exact.values[i] : exact.sensitivity(r, q);
            const double a = q < 0 ? approx.values[i] : approx.sensitivity(r, q);
            err = std::max(err, std::abs(a - e));
            scale = std::max(scale, std::abs(e));
        }
        const double rel = scale > 0.0 ? err / scale : err;
        out.held_out_error = std::max(out.held_out_error, rel);
    }
    return out;
}

} // namespace dmatch
