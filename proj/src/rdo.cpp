#include "dmatch/rdo.hpp"

#include "dmatch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

MomentSummary sample_moments(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("sample_moments: no values");
    }
    const double m = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= m;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= m;
    m3 /= m;
    MomentSummary out;
    out.mean = mean;
    out.variance = m2;
    out.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    out.count = values.size();
    return out;
}

RdoEvaluation rdo_objectives(const ResponseModel& model, std::span<const double> s, std::span<const double> omegas,
                             double penalty)
{
    model.check_design(s);
    const auto batch = model.evaluate_batch(s, omegas, false);
    RdoEvaluation ev;
    ev.moments = sample_moments(batch.values);
    if (!(ev.moments.mean > 0.0)) {
        ev.penalized = true;
        ev.objectives = {penalty, penalty};
    } else {
        ev.objectives = {1.0 / ev.moments.mean, ev.moments.variance};
    }
    return ev;
}

bool dominates(const Objectives& a, const Objectives& b) noexcept
{
    return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const Objectives> points)
{
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> counter(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        if (!std::isfinite(points[p][0]) || !std::isfinite(points[p][1])) {
            throw std::invalid_argument("nondominated_sort: objective values must be finite");
        }
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(points[p], points[q])) {
                dominated[p].push_back(q);
                ++counter[q];
            } else if (dominates(points[q], points[p])) {
                dominated[q].push_back(p);
                ++counter[p];
            }
        }
    }
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p) {
        if (counter[p] == 0) {
            current.push_back(p);
        }
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t p : current) {
            for (std::size_t q : dominated[p]) {
                if (--counter[q] == 0) {
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(std::span<const Objectives> points, std::span<const std::size_t> front)
{
    const std::size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        return dist;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < 2; ++k) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return points[front[a]][k] < points[front[b]][k]; });
        const double lo = points[front[order.front()]][k];
        const double hi = points[front[order.back()]][k];
        dist[order.front()] = std::numeric_limits<double>::infinity();
        dist[order.back()] = std::numeric_limits<double>::infinity();
        if (!(hi > lo)) {
            continue;
        }
        for (std::size_t r = 1; r + 1 < n; ++r) {
            dist[order[r]] += (points[front[order[r + 1]]][k] - points[front[order[r - 1]]][k]) / (hi - lo);
        }
    }
    return dist;
}

void Nsga2Config::validate() const
{
    if (population < 4 || population % 2 != 0) {
        throw std::invalid_argument(fmt::format("nsga2: population must be even and at least 4 (got {})", population));
    }
    if (generations < 1) {
        throw std::invalid_argument("nsga2: generations must be at least 1");
    }
    if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0)) {
        throw std::invalid_argument("nsga2: crossover probability must lie in [0, 1]");
    }
    if (mutation_probability && !(*mutation_probability >= 0.0 && *mutation_probability <= 1.0)) {
        throw std::invalid_argument("nsga2: mutation probability must lie in [0, 1]");
    }
    if (!(crossover_index >= 0.0) || !(mutation_index >= 0.0)) {
        throw std::invalid_argument("nsga2: distribution indices must be nonnegative");
    }
}

double Nsga2Config::mutation_rate(std::size_t n) const
{
    return mutation_probability.value_or(1.0 / static_cast<double>(n));
}

namespace {

struct Individual {
    std::vector<double> design;
    RdoEvaluation eval;
    std::size_t rank = 0;
    double crowding = 0.0;
};

// Simulated binary crossover with bounds, per variable with probability 1/2.
void sbx(std::vector<double>& a, std::vector<double>& b, const Box& box, double eta, CounterRng& rng)
{
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (rng.uniform() > 0.5) {
            continue;
        }
        if (std::abs(a[k] - b[k]) <= 1e-14) {
            continue;
        }
        const double lo = box.lower[k];
        const double hi = box.upper[k];
        const double y1 = std::min(a[k], b[k]);
        const double y2 = std::max(a[k], b[k]);
        const double u = rng.uniform();
        auto spread = [&](double beta) {
            const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
            return u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1.0))
                                    : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
        };
        const double bq1 = spread(1.0 + 2.0 * (y1 - lo) / (y2 - y1));
        const double c1 = 0.5 * ((y1 + y2) - bq1 * (y2 - y1));
        const double bq2 = spread(1.0 + 2.0 * (hi - y2) / (y2 - y1));
        const double c2 = 0.5 * ((y1 + y2) + bq2 * (y2 - y1));
        double x1 = std::clamp(c1, lo, hi);
        double x2 = std::clamp(c2, lo, hi);
        if (rng.uniform() <= 0.5) {
            std::swap(x1, x2);
        }
        a[k] = x1;
        b[k] = x2;
    }
}

// Polynomial mutation with bounds.
void mutate(std::vector<double>& x, const Box& box, double rate, double eta, CounterRng& rng)
{
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (rng.uniform() > rate) {
            continue;
        }
        const double lo = box.lower[k];
        const double hi = box.upper[k];
        if (!(hi > lo)) {
            continue;
        }
        const double d1 = (x[k] - lo) / (hi - lo);
        const double d2 = (hi - x[k]) / (hi - lo);
        const double u = rng.uniform();
        const double p = 1.0 / (eta + 1.0);
        double dq;
        if (u < 0.5) {
            const double v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
            dq = std::pow(v, p) - 1.0;
        } else {
            const double v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
            dq = 1.0 - std::pow(v, p);
        }
        x[k] = std::clamp(x[k] + dq * (hi - lo), lo, hi);
    }
}

void evaluate_all(std::vector<Individual>& pop, std::size_t from, const FitnessFn& fitness)
{
    const auto n = static_cast<std::ptrdiff_t>(pop.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(from); i < n; ++i) {
        try {
            pop[static_cast<std::size_t>(i)].eval = fitness(pop[static_cast<std::size_t>(i)].design);
        } catch (...) {
#pragma omp critical(dmatch_nsga2_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

// Rank and crowding for every member; returns the fronts.
std::vector<std::vector<std::size_t>> assign_rank(std::vector<Individual>& pop)
{
    std::vector<Objectives> pts(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        pts[i] = pop[i].eval.objectives;
    }
    auto fronts = nondominated_sort(pts);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        const auto cd = crowding_distance(pts, fronts[r]);
        for (std::size_t k = 0; k < fronts[r].size(); ++k) {
            pop[fronts[r][k]].rank = r;
            pop[fronts[r][k]].crowding = cd[k];
        }
    }
    return fronts;
}

bool better(const Individual& a, const Individual& b)
{
    if (a.rank != b.rank) {
        return a.rank < b.rank;
    }
    return a.crowding > b.crowding;
}

Objectives best_of(const std::vector<Individual>& pop)
{
    Objectives best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& ind : pop) {
        best[0] = std::min(best[0], ind.eval.objectives[0]);
        best[1] = std::min(best[1], ind.eval.objectives[1]);
    }
    return best;
}

} // namespace

ParetoArchive nsga2(const FitnessFn& fitness, const Box& box, const Nsga2Config& cfg)
{
    cfg.validate();
    const std::size_t n = box.size();
    if (n == 0) {
        throw std::invalid_argument("nsga2: empty design box");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(box.lower[k]) || !std::isfinite(box.upper[k]) || box.upper[k] < box.lower[k]) {
            throw std::invalid_argument(fmt::format("nsga2: design bound {} is not a finite interval", k));
        }
    }
    const double rate = cfg.mutation_rate(n);
    CounterRng rng(cfg.seed, 0);

    std::vector<Individual> pop(cfg.population);
    for (auto& ind : pop) {
        ind.design.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            ind.design[k] = rng.uniform(box.lower[k], box.upper[k]);
        }
    }
    evaluate_all(pop, 0, fitness);
    assign_rank(pop);

    ParetoArchive archive;
    archive.evaluations = pop.size();
    archive.best_per_generation.push_back(best_of(pop));

    auto tournament = [&]() -> const Individual& {
        const auto& a = pop[rng.below(pop.size())];
        const auto& b = pop[rng.below(pop.size())];
        return better(b, a) ? b : a;
    };

    for (std::size_t gen = 1; gen < cfg.generations; ++gen) {
        std::vector<Individual> merged = pop;
        while (merged.size() < 2 * cfg.population) {
            std::vector<double> c1 = tournament().design;
            std::vector<double> c2 = tournament().design;
            if (rng.uniform() <= cfg.crossover_probability) {
                sbx(c1, c2, box, cfg.crossover_index, rng);
            }
            mutate(c1, box, rate, cfg.mutation_index, rng);
            mutate(c2, box, rate, cfg.mutation_index, rng);
            merged.push_back(Individual{std::move(c1), {}, 0, 0.0});
            merged.push_back(Individual{std::move(c2), {}, 0, 0.0});
        }
        evaluate_all(merged, cfg.population, fitness);
        archive.evaluations += cfg.population;

        const auto fronts = assign_rank(merged);
        std::vector<Individual> next;
        next.reserve(cfg.population);
        for (const auto& front : fronts) {
            if (next.size() + front.size() <= cfg.population) {
                for (std::size_t i : front) {
                    next.push_back(merged[i]);
                }
                continue;
            }
            std::vector<std::size_t> order(front.begin(), front.end());
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return merged[a].crowding > merged[b].crowding; });
            for (std::size_t r = 0; next.size() < cfg.population; ++r) {
                next.push_back(merged[order[r]]);
            }
            break;
        }
        pop = std::move(next);
        assign_rank(pop);
        archive.best_per_generation.push_back(best_of(pop));
    }

    archive.generation = cfg.generations;
    for (const auto& ind : pop) {
        if (ind.rank != 0) {
            continue;
        }
        const bool dominated = std::any_of(pop.begin(), pop.end(), [&](const Individual& other) {
            return dominates(other.eval.objectives, ind.eval.objectives);
        });
        if (!dominated) {
            archive.members.push_back(
                ArchiveMember{ind.design, ind.eval.objectives, ind.eval.moments, ind.eval.penalized});
        }
    }
    std::stable_sort(archive.members.begin(), archive.members.end(),
                     [](const ArchiveMember& a, const ArchiveMember& b) { return a.objectives < b.objectives; });
    return archive;
}

ParetoArchive nsga2_run(const std::shared_ptr<const ResponseModel>& model, std::span<const double> omegas,
                        const Nsga2Config& cfg, std::optional<SurrogateOptions> surrogate, double penalty)
{
    if (!model) {
        throw std::invalid_argument("nsga2_run: no model");
    }
    if (omegas.empty()) {
        throw std::invalid_argument("nsga2_run: no uncertainty samples");
    }
    std::shared_ptr<const ResponseModel> evaluator = model;
    if (surrogate) {
        evaluator = std::make_shared<SurrogateBackedModel>(model, surrogate->points, surrogate->degree);
    }
    for (double w : omegas) {
        evaluator->check_omega(w);
    }
    const std::vector<double> frozen(omegas.begin(), omegas.end());
    FitnessFn fn = [&](std::span<const double> s) { return rdo_objectives(*evaluator, s, frozen, penalty); };
    return nsga2(fn, model->box(), cfg);
}

} // namespace dmatch
