#pragma once

#include "dmatch/densities.hpp"
#include "dmatch/models.hpp"
#include "dmatch/objective.hpp"
#include "dmatch/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmatch {

struct OptimizerConfig {
    std::size_t max_iterations = 200;
    double gradient_tolerance = 1e-9; // on the projected gradient, unit-box coordinates
    double step_tolerance = 1e-12;    // on the accepted move, unit-box coordinates
    double armijo = 1e-4;
    double backtrack = 0.5;
    double initial_step = 0.1; // first trial move, as a fraction of the box
    std::size_t max_backtracks = 50;

    void validate() const;
};

enum class Termination { gradient_tolerance, step_tolerance, max_iterations, line_search_stall };

std::string to_string(Termination t);

struct IterationRecord {
    std::size_t iteration = 0; // within its stage; 0 is the starting point
    std::string stage;
    std::vector<double> design;
    double objective = 0.0;
    double normalized = 0.0;
    double gradient_norm = 0.0; // Euclidean norm of the raw gradient
    double step = 0.0;          // Euclidean length of the accepted move
    double bandwidth = 0.0;
};

/// What the minimizer needs from an objective at one design.
struct Probe {
    double value = 0.0;
    std::vector<double> gradient;
    double normalized = 0.0;
    double bandwidth = 0.0;
};

using ObjectiveFn = std::function<Probe(std::span<const double> s, bool with_gradient)>;

/// An objective evaluation failed mid-run. Carries the records accepted
/// before the failure so callers can flush a partial history.
class OptimizationError : public std::runtime_error {
public:
    OptimizationError(std::string stage, std::size_t iteration, const std::string& cause,
                      std::vector<IterationRecord> records);

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }
    [[nodiscard]] const std::vector<IterationRecord>& records() const noexcept { return records_; }
    void prepend(const std::vector<IterationRecord>& earlier);

private:
    std::string stage_;
    std::size_t iteration_;
    std::vector<IterationRecord> records_;
};

struct MinimizeResult {
    std::vector<IterationRecord> records;
    std::vector<double> design;
    double value = 0.0;
    std::vector<double> gradient;
    Termination reason = Termination::max_iterations;
};

std::vector<double> project_box(std::span<const double> s, const Box& box);

/// Projected gradient descent with Armijo backtracking on the box. The design
/// is rescaled to the unit box internally; after the first iteration the trial
/// step is the Barzilai-Borwein length. Every accepted iterate strictly
/// decreases the objective.
MinimizeResult minimize(const ObjectiveFn& objective, std::span<const double> s0, const Box& box,
                        const OptimizerConfig& cfg, const std::string& stage = "");

// ---------------------------------------------------------------------------
// Two-stage density matching

struct DensityMatchProblem {
    std::shared_ptr<const ResponseModel> model;
    std::optional<Distribution> target;
    std::optional<QuadratureGrid> grid;
    std::size_t samples = 100000;
    std::optional<double> stage1_bandwidth; // default (f_upper - f_lower) / 5
    std::size_t stage1_iterations = 3;
    BandwidthPolicy stage2_bandwidth = BandwidthPolicy::scott();
    bool analytic = false; // closed-form response density, single stage
    OptimizerConfig optimizer;
    std::vector<double> initial_design;
    std::uint64_t seed = 0;
};

struct StageOutcome {
    std::string stage;
    Termination reason = Termination::max_iterations;
    std::size_t iterations = 0;
};

struct RunReport {
    std::vector<IterationRecord> records;
    std::vector<StageOutcome> stages;
    std::vector<double> final_design;
    double final_objective = 0.0;
    double final_normalized = 0.0;
    double final_bandwidth = 0.0;
    std::vector<double> nodes;
    std::vector<double> target_trace;
    std::vector<double> response_trace;
    std::vector<std::string> diagnostics;
    double wall_seconds = 0.0;

    [[nodiscard]] Termination termination() const { return stages.back().reason; }
};

RunReport run_density_match(const DensityMatchProblem& problem);

} // namespace dmatch
