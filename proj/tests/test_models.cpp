#include "dmatch/models.hpp"
#include "support.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

using namespace dmatch;

namespace {

std::vector<double> design_in(CounterRng& rng, const Box& box)
{
    std::vector<double> s(box.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = rng.uniform(box.lower[k], box.upper[k]);
    }
    return s;
}

} // namespace

// --- built-in models ---------------------------------------------------------

TEST(LinearShift, Examples)
{
    const LinearShiftModel m;
    EXPECT_EQ(eval_response(m, std::vector{0.3467}, 0.0), 3.5);
    EXPECT_EQ(eval_response(m, std::vector{2.0}, 1.0), 5.5);
    EXPECT_EQ(grad_response(m, std::vector{1.3}, -0.7), std::vector{-0.7});
}

TEST(LinearShift, RejectsOutOfBoxDesign)
{
    const LinearShiftModel m;
    EXPECT_THROW((void)eval_response(m, std::vector{2.5}, 0.0), std::out_of_range);
    EXPECT_THROW((void)eval_response(m, std::vector{0.5, 0.5}, 0.0), std::invalid_argument);
    EXPECT_THROW(LinearShiftModel(0.0, 1.0), std::invalid_argument);
}

TEST(LinearShift, AnalyticDensityIsGaussian)
{
    const LinearShiftModel m;
    prop::for_all(30, 3, [&](CounterRng& rng, std::size_t) {
        const double s = rng.uniform(0.05, 2.0);
        const double x = rng.uniform(0.0, 7.0);
        std::vector<double> dq(1);
        const double q = m.analytic_density(std::vector{s}, x, dq);
        const double z = (x - 3.5) / s;
        EXPECT_NEAR(q, std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi)), 1e-14);
        const double eps = 1e-6 * s;
        std::vector<double> unused(1);
        const double fd = (m.analytic_density(std::vector{s + eps}, x, unused) -
                           m.analytic_density(std::vector{s - eps}, x, unused)) /
                          (2.0 * eps);
        EXPECT_NEAR(dq[0], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    });
}

TEST(ExampleShift, ResponseIsUniformOnShiftedInterval)
{
    const ExampleShiftModel m;
    const auto omegas = sample(m.uncertainty(), 1, 10000).values;
    const std::vector<double> s{2.0};
    const auto batch = m.evaluate_batch(s, omegas, true);
    for (std::size_t j = 0; j < omegas.size(); ++j) {
        ASSERT_GE(batch.values[j], 2.0);
        ASSERT_LE(batch.values[j], 3.0);
        ASSERT_EQ(batch.sensitivity(static_cast<Eigen::Index>(j), 0), 1.0);
    }
    EXPECT_EQ(grad_response(m, s, 0.3), std::vector{1.0});
    EXPECT_THROW((void)eval_response(m, s, 1.5), std::out_of_range);
}

TEST(Airfoil, ShapeAndBox)
{
    const SyntheticAirfoilModel m;
    EXPECT_EQ(m.dimension(), 16U);
    const auto amp = SyntheticAirfoilModel::amplitudes();
    for (std::size_t k = 0; k < 16; ++k) {
        EXPECT_GT(amp[k], 0.0);
        EXPECT_EQ(m.box().lower[k], -amp[k]);
        EXPECT_EQ(m.box().upper[k], amp[k]);
    }
    const auto law = m.uncertainty().moments();
    ASSERT_TRUE(law.has_value());
    EXPECT_NEAR(law->mean, 0.675, 1e-15);
}

TEST(Airfoil, NominalValueAtCentreMach)
{
    const SyntheticAirfoilModel m;
    EXPECT_NEAR(eval_response(m, std::vector<double>(16, 0.0), 0.675), 27.2356, 1e-12);
}

TEST(Airfoil, StaysInsideDeclaredBounds)
{
    const SyntheticAirfoilModel m;
    const auto [lo, hi] = m.response_bounds();
    prop::for_all(2000, 4, [&](CounterRng& rng, std::size_t c) {
        auto s = design_in(rng, m.box());
        if (c % 4 == 0) {
            for (std::size_t k = 0; k < s.size(); ++k) {
                s[k] = rng.below(2) == 0 ? m.box().lower[k] : m.box().upper[k];
            }
        }
        const double omega = c % 3 == 0 ? (rng.below(2) == 0 ? 0.66 : 0.69) : rng.uniform(0.66, 0.69);
        const double f = eval_response(m, s, omega);
        ASSERT_TRUE(std::isfinite(f));
        ASSERT_GE(f, lo);
        ASSERT_LE(f, hi);
    });
}

TEST(Airfoil, GradientMatchesCentralDifferences)
{
    const SyntheticAirfoilModel m;
    prop::for_all(20, 5, [&](CounterRng& rng, std::size_t) {
        auto s = design_in(rng, m.box());
        for (std::size_t k = 0; k < s.size(); ++k) {
            s[k] *= 0.99;
        }
        const double omega = rng.uniform(0.66, 0.69);
        const auto g = grad_response(m, s, omega);
        double scale = 0.0;
        for (double v : g) {
            scale = std::max(scale, std::abs(v));
        }
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double step = 1e-6 * (m.box().upper[k] - m.box().lower[k]);
            auto p = s;
            auto q = s;
            p[k] += step;
            q[k] -= step;
            const double fd = (m.value(p, omega) - m.value(q, omega)) / (2.0 * step);
            ASSERT_NEAR(g[k], fd, 1e-6 * scale) << "component " << k;
        }
    });
}

TEST(Airfoil, EvaluationIsPure)
{
    const SyntheticAirfoilModel m;
    CounterRng rng(6);
    const auto s = design_in(rng, m.box());
    EXPECT_EQ(m.value(s, 0.671), m.value(s, 0.671));
    const auto omegas = sample(m.uncertainty(), 2, 100).values;
    const auto a = m.evaluate_batch(s, omegas, true);
    const auto b = m.evaluate_batch(s, omegas, true);
    EXPECT_EQ(a.values, b.values);
    EXPECT_TRUE(a.sensitivity == b.sensitivity);
}

TEST(ConstantModel, ZeroGradient)
{
    const ConstantModel m(5.0, Box{{0.0, 0.0}, {1.0, 1.0}}, Distribution::uniform(0.0, 1.0));
    EXPECT_EQ(eval_response(m, std::vector{0.2, 0.8}, 0.5), 5.0);
    EXPECT_EQ(grad_response(m, std::vector{0.2, 0.8}, 0.5), (std::vector{0.0, 0.0}));
}

// --- polynomial fits -----------------------------------------------------------

TEST(FitSurrogate, RecoversQuadratic)
{
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 7; ++i) {
        x.push_back(0.1 * i);
        y.push_back(1.0 - 2.0 * x.back() + 3.0 * x.back() * x.back());
    }
    const auto fit = fit_surrogate(x, y, 2);
    EXPECT_LT(fit.residual, 1e-10);
    for (double w : {0.0, 0.13, 0.37, 0.6}) {
        EXPECT_NEAR(fit(w), 1.0 - 2.0 * w + 3.0 * w * w, 1e-12);
    }
    // Coefficients live in x' = (2w - lo - hi) / (hi - lo) = (w - 0.3) / 0.3.
    // y = 1 - 2(0.3 + 0.3x') + 3(0.3 + 0.3x')^2 = 0.67 - 0.06x' + 0.27x'^2.
    ASSERT_EQ(fit.coefficients.size(), 3U);
    EXPECT_NEAR(fit.coefficients[0], 0.67, 1e-12);
    EXPECT_NEAR(fit.coefficients[1], -0.06, 1e-12);
    EXPECT_NEAR(fit.coefficients[2], 0.27, 1e-12);
}

TEST(FitSurrogate, DegreeFiveFromTwentyOnePoints)
{
    const auto poly = [](double w) { return 2.0 - w + 0.5 * std::pow(w, 3) - 4.0 * std::pow(w, 5); };
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 21; ++i) {
        x.push_back(-1.0 + 0.1 * i);
        y.push_back(poly(x.back()));
    }
    const auto fit = fit_surrogate(x, y, 5);
    for (double w = -1.0; w <= 1.0; w += 0.037) {
        EXPECT_NEAR(fit(w), poly(w), 1e-8);
    }
}

TEST(FitSurrogate, NoisyResidualTracksNoise)
{
    CounterRng rng(7);
    std::vector<double> x;
    std::vector<double> y;
    for (int i = 0; i < 400; ++i) {
        x.push_back(i / 399.0);
        y.push_back(std::sin(3.0 * x.back()) + 0.1 * rng.normal());
    }
    const auto fit = fit_surrogate(x, y, 5);
    EXPECT_GT(fit.residual, 0.08);
    EXPECT_LT(fit.residual, 0.12);
}

TEST(FitSurrogate, Rejections)
{
    const std::vector<double> dup{0.5, 0.5, 0.5, 0.5};
    const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    EXPECT_THROW((void)fit_surrogate(dup, y, 1), std::invalid_argument);
    const std::vector<double> pairs{0.0, 0.0, 1.0, 1.0};
    EXPECT_THROW((void)fit_surrogate(pairs, y, 2), std::invalid_argument);
    const std::vector<double> three{0.0, 0.5, 1.0};
    EXPECT_THROW((void)fit_surrogate(three, std::vector{1.0, 2.0, 3.0}, 3), std::invalid_argument);
    EXPECT_THROW((void)fit_surrogate(three, y, 1), std::invalid_argument);
}

TEST(FitSurrogate, DomainFlag)
{
    const std::vector<double> x{0.0, 0.5, 1.0};
    const auto fit = fit_surrogate(x, std::vector{1.0, 1.0, 1.0}, 1);
    EXPECT_TRUE(fit.in_domain(0.0));
    EXPECT_TRUE(fit.in_domain(1.0));
    EXPECT_FALSE(fit.in_domain(1.01));
}

TEST(FitSurrogate, TextRoundTrip)
{
    CounterRng rng(8);
    std::vector<double> x;
    Eigen::MatrixXd v(15, 3);
    for (int i = 0; i < 15; ++i) {
        x.push_back(0.66 + 0.03 * i / 14.0);
        for (int q = 0; q < 3; ++q) {
            v(i, q) = rng.normal();
        }
    }
    const auto fits = fit_surrogates(x, v, 4);
    std::stringstream io;
    write_surrogates(io, fits);
    const auto back = read_surrogates(io);
    ASSERT_EQ(back.size(), fits.size());
    for (std::size_t q = 0; q < fits.size(); ++q) {
        EXPECT_EQ(back[q].degree, fits[q].degree);
        EXPECT_EQ(back[q].lo, fits[q].lo);
        EXPECT_EQ(back[q].hi, fits[q].hi);
        EXPECT_EQ(back[q].coefficients, fits[q].coefficients);
        EXPECT_EQ(back[q].residual, fits[q].residual);
    }
    std::stringstream bad("garbage row\n");
    EXPECT_THROW((void)read_surrogates(bad), std::runtime_error);
}

// --- surrogate-backed models -----------------------------------------------------

TEST(SurrogateModel, FitLocationsSpanSupport)
{
    const auto loc = fit_locations(Distribution::scaled_beta(2.0, 2.0, 0.66, 0.69), 21);
    ASSERT_EQ(loc.size(), 21U);
    EXPECT_DOUBLE_EQ(loc.front(), 0.66);
    EXPECT_DOUBLE_EQ(loc.back(), 0.69);
    const auto g = fit_locations(Distribution::gaussian(1.0, 4.0), 21);
    EXPECT_DOUBLE_EQ(g.front(), -11.0);
    EXPECT_DOUBLE_EQ(g.back(), 13.0);
    EXPECT_THROW((void)fit_locations(Distribution::uniform(0.0, 1.0), 1), std::invalid_argument);
}

TEST(SurrogateModel, ExactForLinearBase)
{
    auto base = std::make_shared<ExampleShiftModel>();
    const std::vector<double> s{1.2};
    const SurrogateModel sur(base, s, 21, 5);
    for (double w = 0.0; w <= 1.0; w += 0.01) {
        EXPECT_NEAR(sur.value(s, w), 1.2 + w, 1e-10);
        std::vector<double> g(1);
        sur.gradient(s, w, g);
        EXPECT_NEAR(g[0], 1.0, 1e-10);
    }
    EXPECT_THROW((void)eval_response(sur, s, 1.2), std::out_of_range);
    EXPECT_THROW((void)sur.value(std::vector{0.3}, 0.5), std::invalid_argument);
}

TEST(SurrogateModel, AirfoilHeldOutValidation)
{
    const auto base = std::make_shared<SyntheticAirfoilModel>();
    prop::for_all(5, 9, [&](CounterRng& rng, std::size_t) {
        const auto s = design_in(rng, base->box());
        const auto v = validate_surrogate(base, s, 21, 5, 5);
        EXPECT_EQ(v.held_out_omegas.size(), 5U);
        EXPECT_LT(v.held_out_error, 1e-3);
    });
}

TEST(SurrogateModel, HeldOutErrorFallsWithDegree)
{
    const auto base = std::make_shared<SyntheticAirfoilModel>();
    CounterRng rng(10);
    const auto s = design_in(rng, base->box());
    const double e1 = validate_surrogate(base, s, 21, 1).held_out_error;
    const double e3 = validate_surrogate(base, s, 21, 3).held_out_error;
    const double e5 = validate_surrogate(base, s, 21, 5).held_out_error;
    EXPECT_GT(e1, e3);
    EXPECT_GT(e3, e5);
}

TEST(SurrogateBacked, MatchesBaseWithinTolerance)
{
    const auto base = std::make_shared<SyntheticAirfoilModel>();
    const SurrogateBackedModel backed(base, 21, 5);
    CounterRng rng(11);
    const auto s = design_in(rng, base->box());
    const auto omegas = sample(base->uncertainty(), 5, 300).values;
    const auto a = base->evaluate_batch(s, omegas, true);
    const auto b = backed.evaluate_batch(s, omegas, true);
    for (std::size_t j = 0; j < omegas.size(); ++j) {
        EXPECT_NEAR(b.values[j], a.values[j], 1e-3 * std::abs(a.values[j]));
    }
    EXPECT_NEAR(backed.value(s, 0.67), base->value(s, 0.67), 1e-3 * std::abs(base->value(s, 0.67)));
    EXPECT_THROW(SurrogateBackedModel(base, 4, 5), std::invalid_argument);
}
