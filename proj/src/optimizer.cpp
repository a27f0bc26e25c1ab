#include "dmatch/optimizer.hpp"

#include "dmatch/kde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

void OptimizerConfig::validate() const
{
    if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0)) {
        throw std::invalid_argument("optimizer tolerances must be positive");
    }
    if (!(armijo > 0.0 && armijo < 1.0)) {
        throw std::invalid_argument("optimizer.armijo must lie in (0, 1)");
    }
    if (!(backtrack > 0.0 && backtrack < 1.0)) {
        throw std::invalid_argument("optimizer.backtrack must lie in (0, 1)");
    }
    if (!(initial_step > 0.0)) {
        throw std::invalid_argument("optimizer.initial_step must be positive");
    }
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::gradient_tolerance:
        return "gradient-tolerance";
    case Termination::step_tolerance:
        return "step-tolerance";
    case Termination::max_iterations:
        return "max-iterations";
    case Termination::line_search_stall:
        return "line-search stall";
    }
    return "unknown";
}

std::vector<double> project_box(std::span<const double> s, const Box& box)
{
    if (s.size() != box.size()) {
        throw std::invalid_argument("project_box: dimension mismatch");
    }
    std::vector<double> out(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        out[k] = std::clamp(s[k], box.lower[k], box.upper[k]);
    }
    return out;
}

namespace {

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

// Affine map between the design box and [0, 1]^n.
struct UnitBox {
    std::vector<double> origin;
    std::vector<double> scale;

    explicit UnitBox(const Box& box)
    {
        for (std::size_t k = 0; k < box.size(); ++k) {
            const double width = box.upper[k] - box.lower[k];
            const bool finite = std::isfinite(width) && width > 0.0;
            origin.push_back(finite ? box.lower[k] : 0.0);
            scale.push_back(finite ? width : 1.0);
        }
    }

    [[nodiscard]] std::vector<double> design(std::span<const double> z) const
    {
        std::vector<double> s(z.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            s[k] = origin[k] + scale[k] * z[k];
        }
        return s;
    }

    [[nodiscard]] std::vector<double> unit(std::span<const double> s) const
    {
        std::vector<double> z(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
            z[k] = (s[k] - origin[k]) / scale[k];
        }
        return z;
    }

    [[nodiscard]] std::vector<double> unit_gradient(std::span<const double> g) const
    {
        std::vector<double> out(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            out[k] = g[k] * scale[k];
        }
        return out;
    }
};

} // namespace

OptimizationError::OptimizationError(std::string stage, std::size_t iteration, const std::string& cause,
                                     std::vector<IterationRecord> records)
    : std::runtime_error(fmt::format("{} iteration {}: {}", stage.empty() ? "minimize" : stage, iteration, cause)),
      stage_(std::move(stage)), iteration_(iteration), records_(std::move(records))
{
}

void OptimizationError::prepend(const std::vector<IterationRecord>& earlier)
{
    records_.insert(records_.begin(), earlier.begin(), earlier.end());
}

MinimizeResult minimize(const ObjectiveFn& objective, std::span<const double> s0, const Box& box,
                        const OptimizerConfig& cfg, const std::string& stage)
{
    cfg.validate();
    if (s0.size() != box.size()) {
        throw std::invalid_argument("minimize: initial design has the wrong dimension");
    }
    if (!box.contains(s0)) {
        throw std::invalid_argument("minimize: initial design is outside the box");
    }
    const std::size_t n = s0.size();
    const UnitBox ub(box);

    // Box in unit coordinates: [0, 1] where finite, unbounded otherwise.
    std::vector<double> zlo(n);
    std::vector<double> zhi(n);
    for (std::size_t k = 0; k < n; ++k) {
        zlo[k] = (box.lower[k] - ub.origin[k]) / ub.scale[k];
        zhi[k] = (box.upper[k] - ub.origin[k]) / ub.scale[k];
    }
    auto project_unit = [&](std::vector<double>& z) {
        for (std::size_t k = 0; k < n; ++k) {
            z[k] = std::clamp(z[k], zlo[k], zhi[k]);
        }
    };
    auto projected_gradient_norm = [&](std::span<const double> z, std::span<const double> gz) {
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double moved = std::clamp(z[k] - gz[k], zlo[k], zhi[k]) - z[k];
            worst = std::max(worst, std::abs(moved));
        }
        return worst;
    };

    MinimizeResult result;
    std::vector<double> s(s0.begin(), s0.end());
    std::vector<double> z = ub.unit(s);
    // Evaluation failures are reported with the iteration being attempted.
    auto probe = [&](std::span<const double> x, std::size_t iter) {
        try {
            return objective(x, true);
        } catch (const OptimizationError&) {
            throw;
        } catch (const std::exception& e) {
            throw OptimizationError(stage, iter, e.what(), result.records);
        }
    };
    Probe current = probe(s, 0);
    std::vector<double> gz = ub.unit_gradient(current.gradient);

    auto record = [&](std::size_t iter, double step) {
        result.records.push_back(IterationRecord{iter, stage, s, current.value, current.normalized,
                                                 norm2(current.gradient), step, current.bandwidth});
    };
    record(0, 0.0);

    auto finish = [&](Termination reason) {
        result.design = s;
        result.value = current.value;
        result.gradient = current.gradient;
        result.reason = reason;
        return result;
    };

    if (projected_gradient_norm(z, gz) < cfg.gradient_tolerance) {
        return finish(Termination::gradient_tolerance);
    }
    if (cfg.max_iterations == 0) {
        return finish(Termination::max_iterations);
    }

    constexpr double kMinStep = 1e-12;
    constexpr double kMaxStep = 1e12;
    double gmax = 0.0;
    for (double g : gz) {
        gmax = std::max(gmax, std::abs(g));
    }
    double alpha = cfg.initial_step / std::max(gmax, std::numeric_limits<double>::min());

    for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
        double trial_alpha = alpha;
        bool accepted = false;
        std::vector<double> zt(n);
        Probe trial;
        for (std::size_t bt = 0; bt <= cfg.max_backtracks; ++bt) {
            for (std::size_t k = 0; k < n; ++k) {
                zt[k] = z[k] - trial_alpha * gz[k];
            }
            project_unit(zt);
            double descent = 0.0;
            double move = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                descent += gz[k] * (zt[k] - z[k]);
                move = std::max(move, std::abs(zt[k] - z[k]));
            }
            if (move < cfg.step_tolerance) {
                return finish(Termination::step_tolerance);
            }
            const auto st = ub.design(zt);
            trial = probe(project_box(st, box), iter);
            if (trial.value <= current.value + cfg.armijo * descent && trial.value < current.value) {
                accepted = true;
                break;
            }
            trial_alpha *= cfg.backtrack;
        }
        if (!accepted) {
            return finish(Termination::line_search_stall);
        }

        // Barzilai-Borwein length for the next trial step.
        const std::vector<double> gzt = ub.unit_gradient(trial.gradient);
        double ss = 0.0;
        double sy = 0.0;
        double move = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double dz = zt[k] - z[k];
            ss += dz * dz;
            sy += dz * (gzt[k] - gz[k]);
            move = std::max(move, std::abs(dz));
        }
        alpha = sy > 0.0 ? std::clamp(ss / sy, kMinStep, kMaxStep) : std::min(kMaxStep, 2.0 * trial_alpha);

        const std::vector<double> s_new = project_box(ub.design(zt), box);
        std::vector<double> delta(n);
        for (std::size_t k = 0; k < n; ++k) {
            delta[k] = s_new[k] - s[k];
        }
        s = s_new;
        z = zt;
        gz = gzt;
        current = std::move(trial);
        record(iter, norm2(delta));

        if (projected_gradient_norm(z, gz) < cfg.gradient_tolerance) {
            return finish(Termination::gradient_tolerance);
        }
        if (move < cfg.step_tolerance) {
            return finish(Termination::step_tolerance);
        }
    }
    return finish(Termination::max_iterations);
}

// ---------------------------------------------------------------------------

namespace {

Probe to_probe(const ObjectiveEvaluation& ev)
{
    return Probe{ev.value, ev.gradient, ev.normalized, ev.bandwidth};
}

void append_stage(RunReport& report, const MinimizeResult& r, const std::string& stage)
{
    report.records.insert(report.records.end(), r.records.begin(), r.records.end());
    report.stages.push_back(StageOutcome{stage, r.reason, r.records.size() - 1});
}

void set_final(RunReport& report, const ObjectiveEvaluation& ev, std::span<const double> design,
               const QuadratureGrid& grid)
{
    report.final_design.assign(design.begin(), design.end());
    report.final_objective = ev.value;
    report.final_normalized = ev.normalized;
    report.final_bandwidth = ev.bandwidth;
    report.nodes.assign(grid.nodes().begin(), grid.nodes().end());
    report.target_trace = ev.target_trace;
    report.response_trace = ev.response_trace;
}

} // namespace

RunReport run_density_match(const DensityMatchProblem& problem)
{
    const auto started = std::chrono::steady_clock::now();
    if (!problem.model || !problem.target || !problem.grid) {
        throw std::invalid_argument("run_density_match: model, target and grid are required");
    }
    const auto& model = *problem.model;
    const auto& grid = *problem.grid;
    std::vector<double> s0 = problem.initial_design;
    if (s0.empty()) {
        const auto& b = model.box();
        for (std::size_t k = 0; k < b.size(); ++k) {
            s0.push_back(0.5 * (b.lower[k] + b.upper[k]));
        }
    }
    model.check_design(s0);

    RunReport report;
    if (problem.analytic) {
        const AnalyticObjective obj(problem.model, *problem.target, grid);
        auto fn = [&](std::span<const double> s, bool g) { return to_probe(obj.evaluate(s, g)); };
        const auto r = minimize(fn, s0, model.box(), problem.optimizer, "analytic");
        append_stage(report, r, "analytic");
        set_final(report, obj.evaluate(r.design, false), r.design, grid);
    } else {
        const SampleSet omegas = sample(model.uncertainty(), problem.seed, problem.samples);
        const double h1 = problem.stage1_bandwidth.value_or(grid.length() / 5.0);
        DensityObjective obj(problem.model, *problem.target, grid, omegas.values, BandwidthPolicy::fixed(h1));
        auto fn = [&](std::span<const double> s, bool g) { return to_probe(obj.evaluate(s, g)); };

        std::vector<double> start = s0;
        if (problem.stage1_iterations > 0) {
            OptimizerConfig cfg1 = problem.optimizer;
            cfg1.max_iterations = problem.stage1_iterations;
            const auto r1 = minimize(fn, start, model.box(), cfg1, "stage1");
            append_stage(report, r1, "stage1");
            if (r1.records.size() == 1 && r1.reason == Termination::gradient_tolerance) {
                report.diagnostics.push_back(fmt::format(
                    "stage 1 stalled at its initial design with |gradient| = {:.3g}; the bandwidth h = {} gives no "
                    "overlap between the response estimate and the target support",
                    r1.records.front().gradient_norm, h1));
            }
            start = r1.design;
        }

        obj.set_bandwidth(problem.stage2_bandwidth);
        MinimizeResult r2;
        try {
            r2 = minimize(fn, start, model.box(), problem.optimizer, "stage2");
        } catch (OptimizationError& e) {
            e.prepend(report.records);
            throw;
        }
        append_stage(report, r2, "stage2");
        const auto final_eval = obj.evaluate(r2.design, false);
        if (r2.records.size() == 1 && r2.reason == Termination::gradient_tolerance && final_eval.overlap < 1e-6) {
            report.diagnostics.push_back(fmt::format(
                "stage 2 stalled at its initial design: |gradient| = {:.3g}, target/response overlap = {:.3g}. "
                "The objective carries no information about the target here; run stage 1 with a larger bandwidth",
                r2.records.front().gradient_norm, final_eval.overlap));
        }
        set_final(report, final_eval, r2.design, grid);
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

} // namespace dmatch
