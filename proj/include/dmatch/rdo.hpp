#pragma once

#include "dmatch/models.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dmatch {

/// Population moments (divide by M).
struct MomentSummary {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0; // 0 when the variance is 0
    std::size_t count = 0;
};

MomentSummary sample_moments(std::span<const double> values);

using Objectives = std::array<double, 2>;

struct RdoEvaluation {
    Objectives objectives{}; // (1 / mean, variance)
    MomentSummary moments;
    bool penalized = false; // nonpositive mean; both objectives set to the penalty
};

inline constexpr double kDefaultPenalty = 1e6;

RdoEvaluation rdo_objectives(const ResponseModel& model, std::span<const double> s, std::span<const double> omegas,
                             double penalty = kDefaultPenalty);

/// a dominates b: no worse in both objectives and strictly better in one.
bool dominates(const Objectives& a, const Objectives& b) noexcept;

/// Fronts of indices into `points`, first front first; indices ascending
/// within each front.
std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const Objectives> points);

/// Crowding distance of each member of `front`, in the order given. The
/// extremes of each objective get +infinity.
std::vector<double> crowding_distance(std::span<const Objectives> points, std::span<const std::size_t> front);

struct Nsga2Config {
    std::size_t population = 100;
    std::size_t generations = 35; // including the initial population
    double crossover_probability = 0.9;
    std::optional<double> mutation_probability; // per variable; default 1 / n
    double crossover_index = 20.0;
    double mutation_index = 20.0;
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] double mutation_rate(std::size_t n) const;
};

struct ArchiveMember {
    std::vector<double> design;
    Objectives objectives{};
    MomentSummary moments;
    bool penalized = false;
};

struct ParetoArchive {
    std::vector<ArchiveMember> members;
    std::size_t generation = 0;
    std::size_t evaluations = 0;
    /// Best value of each objective in the population, per generation.
    std::vector<Objectives> best_per_generation;
};

using FitnessFn = std::function<RdoEvaluation(std::span<const double> s)>;

/// NSGA-II on a box. Fitness evaluations of one generation run in parallel;
/// selection and variation draw from one random stream.
ParetoArchive nsga2(const FitnessFn& fitness, const Box& box, const Nsga2Config& cfg);

struct SurrogateOptions {
    std::size_t points = 21;
    std::size_t degree = 5;
};

/// Mean-variance robust design: minimize (1 / E f, Var f) over the model's box
/// with the moments estimated on a frozen sample set. With a surrogate, every
/// fitness call fits a response surface in omega at that design and samples it.
ParetoArchive nsga2_run(const std::shared_ptr<const ResponseModel>& model, std::span<const double> omegas,
                        const Nsga2Config& cfg, std::optional<SurrogateOptions> surrogate = std::nullopt,
                        double penalty = kDefaultPenalty);

} // namespace dmatch
