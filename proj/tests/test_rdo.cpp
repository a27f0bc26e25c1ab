#include "dmatch/models.hpp"
#include "dmatch/rdo.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <gtest/gtest.h>

using namespace dmatch;

namespace {

RdoEvaluation toy(std::span<const double> s)
{
    RdoEvaluation ev;
    ev.objectives = {s[0] * s[0], (s[0] - 2.0) * (s[0] - 2.0)};
    return ev;
}

Box toy_box(std::size_t n)
{
    return Box{std::vector(n, 0.0), std::vector(n, 2.0)};
}

// Rank of every point by repeated peeling with an all-pairs dominance check.
std::vector<std::size_t> brute_force_ranks(const std::vector<Objectives>& pts)
{
    std::vector<std::size_t> rank(pts.size(), std::numeric_limits<std::size_t>::max());
    std::size_t assigned = 0;
    for (std::size_t level = 0; assigned < pts.size(); ++level) {
        std::vector<std::size_t> this_level;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rank[i] < level) {
                continue;
            }
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
                dominated = rank[j] >= level && dominates(pts[j], pts[i]);
            }
            if (!dominated) {
                this_level.push_back(i);
            }
        }
        for (std::size_t i : this_level) {
            rank[i] = level;
        }
        assigned += this_level.size();
    }
    return rank;
}

} // namespace

// --- moments and objectives ----------------------------------------------------

TEST(Moments, Examples)
{
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto m = sample_moments(v);
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_DOUBLE_EQ(m.variance, 1.25);
    EXPECT_NEAR(m.skewness, 0.0, 1e-15);
    EXPECT_EQ(m.count, 4U);

    const std::vector<double> skewed{0.0, 0.0, 0.0, 1.0};
    // mean 1/4, variance 3/16, third central moment 3/32, skewness (3/32) / (3/16)^1.5
    EXPECT_NEAR(sample_moments(skewed).skewness, (3.0 / 32.0) / std::pow(3.0 / 16.0, 1.5), 1e-14);

    const std::vector<double> flat{2.0, 2.0};
    EXPECT_EQ(sample_moments(flat).variance, 0.0);
    EXPECT_EQ(sample_moments(flat).skewness, 0.0);
    EXPECT_THROW((void)sample_moments(std::vector<double>{}), std::invalid_argument);
}

TEST(RdoObjectives, LinearShift)
{
    const LinearShiftModel m;
    const auto omegas = sample(m.uncertainty(), 3, 200000).values;
    const auto ev = rdo_objectives(m, std::vector{0.3}, omegas);
    EXPECT_FALSE(ev.penalized);
    EXPECT_NEAR(ev.objectives[0], 1.0 / 3.5, 1e-3);
    EXPECT_NEAR(ev.objectives[1], 0.09, 2e-3);
    EXPECT_EQ(ev.objectives[0], 1.0 / ev.moments.mean);
    EXPECT_EQ(ev.objectives[1], ev.moments.variance);
}

TEST(RdoObjectives, Constant)
{
    const ConstantModel m(5.0, Box{{0.0}, {1.0}}, Distribution::uniform(0.0, 1.0));
    const auto omegas = sample(m.uncertainty(), 4, 100).values;
    const auto ev = rdo_objectives(m, std::vector{0.5}, omegas);
    EXPECT_DOUBLE_EQ(ev.objectives[0], 0.2);
    EXPECT_EQ(ev.objectives[1], 0.0);
}

TEST(RdoObjectives, NonpositiveMeanIsPenalized)
{
    const ConstantModel m(-1.0, Box{{0.0}, {1.0}}, Distribution::uniform(0.0, 1.0));
    const std::vector<double> omegas{0.1, 0.2};
    const auto ev = rdo_objectives(m, std::vector{0.5}, omegas, 123.0);
    EXPECT_TRUE(ev.penalized);
    EXPECT_EQ(ev.objectives[0], 123.0);
    EXPECT_EQ(ev.objectives[1], 123.0);
    EXPECT_EQ(rdo_objectives(m, std::vector{0.5}, omegas).objectives[0], kDefaultPenalty);
}

TEST(RdoObjectives, AirfoilZeroDesign)
{
    const SyntheticAirfoilModel m;
    const auto omegas = sample(m.uncertainty(), 5, 100000).values;
    const auto ev = rdo_objectives(m, std::vector<double>(16, 0.0), omegas);
    EXPECT_NEAR(ev.moments.mean, 26.06, 0.05);
    EXPECT_NEAR(ev.moments.variance, 8.44, 0.1);
}

// --- sorting ----------------------------------------------------------------------

TEST(Dominance, Examples)
{
    EXPECT_TRUE(dominates({1.0, 1.0}, {2.0, 2.0}));
    EXPECT_TRUE(dominates({1.0, 2.0}, {1.0, 3.0}));
    EXPECT_FALSE(dominates({1.0, 1.0}, {1.0, 1.0}));
    EXPECT_FALSE(dominates({1.0, 3.0}, {2.0, 2.0}));
}

TEST(NondominatedSort, Example)
{
    const std::vector<Objectives> pts{{1.0, 5.0}, {2.0, 2.0}, {3.0, 3.0}, {5.0, 1.0}, {4.0, 4.0}, {2.0, 2.0}};
    const auto fronts = nondominated_sort(pts);
    ASSERT_EQ(fronts.size(), 3U);
    EXPECT_EQ(fronts[0], (std::vector<std::size_t>{0, 1, 3, 5}));
    EXPECT_EQ(fronts[1], (std::vector<std::size_t>{2}));
    EXPECT_EQ(fronts[2], (std::vector<std::size_t>{4}));
}

TEST(NondominatedSort, RejectsNonFinite)
{
    const std::vector<Objectives> pts{{1.0, std::nan("")}};
    EXPECT_THROW((void)nondominated_sort(pts), std::invalid_argument);
    EXPECT_TRUE(nondominated_sort(std::vector<Objectives>{}).empty());
}

TEST(Property, SortMatchesBruteForce)
{
    prop::for_all(100, 6, [](CounterRng& rng, std::size_t c) {
        const std::size_t n = 1 + rng.below(120);
        std::vector<Objectives> pts(n);
        for (auto& p : pts) {
            // Coarse values on some cases so ties are common.
            if (c % 2 == 0) {
                p = {static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6))};
            } else {
                p = {rng.uniform(), rng.uniform()};
            }
        }
        const auto expected = brute_force_ranks(pts);
        const auto fronts = nondominated_sort(pts);
        std::size_t covered = 0;
        for (std::size_t r = 0; r < fronts.size(); ++r) {
            ASSERT_FALSE(fronts[r].empty());
            ASSERT_TRUE(std::is_sorted(fronts[r].begin(), fronts[r].end()));
            for (std::size_t i : fronts[r]) {
                ASSERT_EQ(expected[i], r) << "point " << i;
            }
            covered += fronts[r].size();
        }
        ASSERT_EQ(covered, n);
    });
}

TEST(Crowding, Examples)
{
    const std::vector<Objectives> pts{{0.0, 4.0}, {1.0, 2.0}, {2.0, 1.0}, {4.0, 0.0}};
    const std::vector<std::size_t> front{0, 1, 2, 3};
    const auto d = crowding_distance(pts, front);
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(d[0], inf);
    EXPECT_EQ(d[3], inf);
    // Point 1: (2 - 0) / 4 + (4 - 1) / 4; point 2: (4 - 1) / 4 + (2 - 0) / 4.
    EXPECT_DOUBLE_EQ(d[1], 1.25);
    EXPECT_DOUBLE_EQ(d[2], 1.25);

    const std::vector<std::size_t> pair{1, 2};
    for (double v : crowding_distance(pts, pair)) {
        EXPECT_EQ(v, inf);
    }
}

// --- NSGA-II ---------------------------------------------------------------------

TEST(Nsga2Config, DefaultsAndValidation)
{
    const Nsga2Config cfg;
    EXPECT_EQ(cfg.population, 100U);
    EXPECT_EQ(cfg.generations, 35U);
    EXPECT_EQ(cfg.crossover_probability, 0.9);
    EXPECT_EQ(cfg.crossover_index, 20.0);
    EXPECT_EQ(cfg.mutation_index, 20.0);
    EXPECT_DOUBLE_EQ(cfg.mutation_rate(16), 0.0625);
    Nsga2Config fixed;
    fixed.mutation_probability = 0.2;
    EXPECT_EQ(fixed.mutation_rate(16), 0.2);

    Nsga2Config bad;
    bad.population = 7;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = Nsga2Config{};
    bad.crossover_probability = 1.5;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = Nsga2Config{};
    bad.generations = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Nsga2, ToyFrontCoverage)
{
    Nsga2Config cfg;
    cfg.seed = 3;
    const auto a = nsga2(toy, toy_box(4), cfg);
    EXPECT_EQ(a.evaluations, 3500U);
    EXPECT_EQ(a.generation, 35U);
    ASSERT_GE(a.members.size(), 2U);
    double lo = 2.0;
    double hi = 0.0;
    for (const auto& m : a.members) {
        lo = std::min(lo, m.design[0]);
        hi = std::max(hi, m.design[0]);
        for (const auto& o : a.members) {
            EXPECT_FALSE(dominates(o.objectives, m.objectives));
        }
    }
    EXPECT_GE(hi - lo, 0.9 * 2.0);
    EXPECT_TRUE(std::is_sorted(a.members.begin(), a.members.end(),
                               [](const auto& x, const auto& y) { return x.objectives < y.objectives; }));
}

TEST(Nsga2, BitIdenticalReruns)
{
    Nsga2Config cfg;
    cfg.seed = 17;
    cfg.generations = 10;
    const auto a = nsga2(toy, toy_box(3), cfg);
    const auto b = nsga2(toy, toy_box(3), cfg);
    ASSERT_EQ(a.members.size(), b.members.size());
    for (std::size_t i = 0; i < a.members.size(); ++i) {
        EXPECT_EQ(a.members[i].design, b.members[i].design);
        EXPECT_EQ(a.members[i].objectives, b.members[i].objectives);
    }
    cfg.seed = 18;
    const auto c = nsga2(toy, toy_box(3), cfg);
    EXPECT_NE(a.members.front().design, c.members.front().design);
}

TEST(Nsga2, Elitism)
{
    prop::for_all(5, 8, [](CounterRng& rng, std::size_t) {
        Nsga2Config cfg;
        cfg.seed = rng.next_u64();
        cfg.generations = 15;
        cfg.population = 20;
        const auto a = nsga2(
            [](std::span<const double> s) {
                RdoEvaluation ev;
                ev.objectives = {std::pow(s[0] - 0.3, 2) + s[1], std::pow(s[0] - 1.7, 2) + std::sin(5.0 * s[1]) + 1.0};
                return ev;
            },
            toy_box(2), cfg);
        ASSERT_EQ(a.best_per_generation.size(), cfg.generations);
        for (std::size_t g = 1; g < a.best_per_generation.size(); ++g) {
            EXPECT_LE(a.best_per_generation[g][0], a.best_per_generation[g - 1][0]);
            EXPECT_LE(a.best_per_generation[g][1], a.best_per_generation[g - 1][1]);
        }
    });
}

TEST(Nsga2, DesignsStayInBox)
{
    Nsga2Config cfg;
    cfg.seed = 4;
    cfg.generations = 8;
    const Box box{{-1.0, 10.0, 0.0}, {1.0, 10.5, 1e-3}};
    const auto a = nsga2(
        [&](std::span<const double> s) {
            EXPECT_TRUE(box.contains(s));
            RdoEvaluation ev;
            ev.objectives = {s[0] + s[2], -s[0] + s[1]};
            return ev;
        },
        box, cfg);
    for (const auto& m : a.members) {
        EXPECT_TRUE(box.contains(m.design));
    }
}

TEST(Nsga2, FitnessFailurePropagates)
{
    Nsga2Config cfg;
    cfg.generations = 2;
    EXPECT_THROW((void)nsga2([](std::span<const double>) -> RdoEvaluation { throw std::runtime_error("boom"); },
                             toy_box(2), cfg),
                 std::runtime_error);
}

TEST(Nsga2Run, AirfoilSmall)
{
    const auto model = std::make_shared<SyntheticAirfoilModel>();
    const auto omegas = sample(model->uncertainty(), 9, 2000).values;
    Nsga2Config cfg;
    cfg.seed = 2;
    cfg.population = 20;
    cfg.generations = 5;
    const auto a = nsga2_run(model, omegas, cfg);
    ASSERT_FALSE(a.members.empty());
    for (const auto& m : a.members) {
        EXPECT_EQ(m.design.size(), 16U);
        EXPECT_FALSE(m.penalized);
        EXPECT_NEAR(m.objectives[0], 1.0 / m.moments.mean, 1e-15);
        EXPECT_EQ(m.objectives[1], m.moments.variance);
    }
    EXPECT_THROW((void)nsga2_run(model, std::vector<double>{}, cfg), std::invalid_argument);
}

TEST(RdoObjectives, SurrogateBackedAgrees)
{
    const auto model = std::make_shared<SyntheticAirfoilModel>();
    const SurrogateBackedModel backed(model, 21, 5);
    const auto omegas = sample(model->uncertainty(), 10, 2000).values;
    prop::for_all(5, 12, [&](CounterRng& rng, std::size_t) {
        std::vector<double> s(16);
        for (std::size_t k = 0; k < 16; ++k) {
            s[k] = rng.uniform(model->box().lower[k], model->box().upper[k]);
        }
        const auto exact = rdo_objectives(*model, s, omegas);
        const auto fitted = rdo_objectives(backed, s, omegas);
        EXPECT_NEAR(fitted.moments.mean, exact.moments.mean, 1e-4 * std::abs(exact.moments.mean));
        EXPECT_NEAR(fitted.moments.variance, exact.moments.variance, 1e-3 * exact.moments.variance);
    });
}
