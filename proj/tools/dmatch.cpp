#include "dmatch/config.hpp"
#include "dmatch/kde.hpp"
#include "dmatch/models.hpp"
#include "dmatch/optimizer.hpp"
#include "dmatch/quadrature.hpp"
#include "dmatch/rdo.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

using namespace dmatch;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

std::string hex(std::uint64_t v)
{
    return fmt::format("{:016x}", v);
}

// Digest of the computation; the output location does not take part.
std::string config_digest(RunConfig cfg, const std::string& extra = "")
{
    cfg.output.clear();
    return hex(fnv1a64(dump_config(cfg) + extra));
}

std::string num(double v)
{
    return fmt::format("{:.17g}", v);
}

fs::path default_root()
{
    const char* env = std::getenv(kOutputRootEnv);
    return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

// Runs `body` with the directory locked. Whatever the outcome, a MANIFEST
// records what was written and whether the run finished.
int with_output(const fs::path& dir, Manifest& manifest, const std::function<void()>& body)
{
    std::optional<OutputLock> lock;
    try {
        lock.emplace(dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
    try {
        body();
        manifest.complete = true;
        write_manifest(dir, manifest);
        return kOk;
    } catch (const std::exception& e) {
        manifest.complete = false;
        manifest.failure = e.what();
        std::cerr << "error: " << e.what() << '\n';
        try {
            write_manifest(dir, manifest);
        } catch (const std::exception& inner) {
            std::cerr << "error: " << inner.what() << '\n';
        }
        return kFailed;
    }
}

std::string join_design(const std::vector<double>& s)
{
    std::vector<std::string> parts;
    parts.reserve(s.size());
    for (double v : s) {
        parts.push_back(num(v));
    }
    return fmt::format("{}", fmt::join(parts, " "));
}

// --- match -------------------------------------------------------------------

int cmd_match(const fs::path& config_path, const std::optional<fs::path>& output)
{
    RunConfig cfg = parse_config(config_path);
    if (output) {
        cfg.output = *output;
    }
    const auto model = build_model(cfg.model);
    const DensityMatchProblem problem = to_problem(cfg, model);
    const std::string canonical = dump_config(cfg);

    Manifest manifest;
    manifest.command = "match";
    manifest.config_hash = config_digest(cfg);
    manifest.seed = cfg.seed;
    const fs::path dir = cfg.output;

    return with_output(dir, manifest, [&] {
        write_text(dir / "config.json", canonical + "\n");
        manifest.artifacts.push_back("config.json");
        RunReport report;
        try {
            report = run_density_match(problem);
        } catch (const OptimizationError& e) {
            write_history_csv(dir / "history.csv", e.records());
            manifest.artifacts.push_back("history.csv");
            throw;
        }
        write_history_csv(dir / "history.csv", report.records);
        write_design_csv(dir / "design.csv", report.final_design);
        write_pdf_csv(dir / "pdf.csv", report.nodes, report.target_trace, report.response_trace);
        manifest.artifacts.insert(manifest.artifacts.end(), {"history.csv", "design.csv", "pdf.csv"});

        auto& sm = manifest.summary;
        sm["final_design"] = join_design(report.final_design);
        sm["final_objective"] = num(report.final_objective);
        sm["final_normalized"] = num(report.final_normalized);
        sm["final_bandwidth"] = num(report.final_bandwidth);
        sm["termination"] = to_string(report.termination());
        sm["iterations"] = std::to_string(report.records.size());
        sm["wall_seconds"] = fmt::format("{:.3f}", report.wall_seconds);
        for (std::size_t i = 0; i < report.diagnostics.size(); ++i) {
            sm[fmt::format("diagnostic_{}", i)] = report.diagnostics[i];
            std::cerr << "warning: " << report.diagnostics[i] << '\n';
        }
        for (const auto& st : report.stages) {
            std::cout << fmt::format("{}: {} iterations, {}\n", st.stage, st.iterations, to_string(st.reason));
        }
        std::cout << fmt::format("design      {}\n", join_design(report.final_design));
        std::cout << fmt::format("distance    {:.6g} (per unit length {:.6g})\n", report.final_objective,
                                 report.final_normalized);
        std::cout << fmt::format("bandwidth   {:.6g}\n", report.final_bandwidth);
        std::cout << fmt::format("output      {}\n", dir.string());
    });
}

// --- rdo -----------------------------------------------------------------------

int cmd_rdo(const fs::path& config_path, const std::optional<fs::path>& output)
{
    RunConfig cfg = parse_config(config_path);
    if (output) {
        cfg.output = *output;
    }
    const auto model = build_model(cfg.model);
    Nsga2Config ga = cfg.rdo.ga;
    ga.seed = cfg.seed;
    ga.validate();
    const std::string canonical = dump_config(cfg);

    Manifest manifest;
    manifest.command = "rdo";
    manifest.config_hash = config_digest(cfg);
    manifest.seed = cfg.seed;
    const fs::path dir = cfg.output;

    return with_output(dir, manifest, [&] {
        write_text(dir / "config.json", canonical + "\n");
        manifest.artifacts.push_back("config.json");
        const auto omegas = sample(model->uncertainty(), cfg.seed, cfg.rdo.samples);
        const auto archive = nsga2_run(model, omegas.values, ga, std::nullopt, cfg.rdo.penalty);
        write_pareto_csv(dir / "pareto.csv", archive);
        manifest.artifacts.push_back("pareto.csv");

        std::size_t penalized = 0;
        for (const auto& m : archive.members) {
            penalized += m.penalized ? 1 : 0;
        }
        auto& sm = manifest.summary;
        sm["members"] = std::to_string(archive.members.size());
        sm["generations"] = std::to_string(archive.generation);
        sm["evaluations"] = std::to_string(archive.evaluations);
        sm["penalized"] = std::to_string(penalized);
        std::cout << fmt::format("{} archive members after {} generations ({} evaluations)\n",
                                 archive.members.size(), archive.generation, archive.evaluations);
        if (!archive.members.empty()) {
            const auto& first = archive.members.front();
            const auto& last = archive.members.back();
            std::cout << fmt::format("mean range  {:.6g} .. {:.6g}\n", last.moments.mean, first.moments.mean);
            std::cout << fmt::format("var range   {:.6g} .. {:.6g}\n", last.moments.variance,
                                     first.moments.variance);
        }
        std::cout << fmt::format("output      {}\n", dir.string());
    });
}

// --- kde -------------------------------------------------------------------------

struct GridArg {
    double lower;
    double upper;
    std::size_t n_points;
};

GridArg parse_grid(const std::string& text)
{
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3) {
        throw ConfigError("--grid", "expected lo,hi,N");
    }
    try {
        std::size_t used = 0;
        GridArg g{std::stod(parts[0]), std::stod(parts[1]), 0};
        const long long n = std::stoll(parts[2], &used);
        if (used != parts[2].size() || n < 2) {
            throw ConfigError("--grid", "N must be an integer ≥ 2");
        }
        g.n_points = static_cast<std::size_t>(n);
        if (!(g.upper > g.lower)) {
            throw ConfigError("--grid", "hi must be > lo");
        }
        return g;
    } catch (const std::logic_error& e) {
        if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
            throw *ce;
        }
        throw ConfigError("--grid", fmt::format("cannot read \"{}\" as lo,hi,N", text));
    }
}

int cmd_kde(const fs::path& samples_path, const std::string& bandwidth, const std::string& grid_text,
            const std::optional<fs::path>& output)
{
    std::vector<double> samples;
    try {
        samples = read_column(samples_path);
    } catch (const std::exception& e) {
        throw ConfigError("--samples", e.what());
    }
    if (samples.empty()) {
        throw ConfigError("--samples", fmt::format("{} holds no samples", samples_path.string()));
    }
    const GridArg g = parse_grid(grid_text);
    double h = 0.0;
    if (bandwidth == "scott") {
        if (samples.size() < 2) {
            throw ConfigError("--bandwidth", "scott needs at least two samples");
        }
        try {
            h = scott_bandwidth(samples);
        } catch (const std::domain_error& e) {
            throw ConfigError("--bandwidth", e.what());
        }
    } else {
        try {
            std::size_t used = 0;
            h = std::stod(bandwidth, &used);
            if (used != bandwidth.size()) {
                throw std::invalid_argument(bandwidth);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("--bandwidth", fmt::format("expected a number or \"scott\", got \"{}\"", bandwidth));
        }
        if (!(h > 0.0)) {
            throw ConfigError("--bandwidth", "must be > 0");
        }
    }

    const std::string canonical =
        fmt::format("kde samples={} n={} bandwidth={} grid={},{},{}", fs::absolute(samples_path).string(),
                    samples.size(), bandwidth, num(g.lower), num(g.upper), g.n_points);
    Manifest manifest;
    manifest.command = "kde";
    manifest.config_hash = hex(fnv1a64(canonical));
    const fs::path dir = output.value_or(default_root() / samples_path.stem());

    return with_output(dir, manifest, [&] {
        const QuadratureGrid grid(g.lower, g.upper, g.n_points);
        const auto q = estimate_on_grid(samples, h, grid);
        write_density_csv(dir / "pdf.csv", {grid.nodes().begin(), grid.nodes().end()}, q);
        manifest.artifacts.push_back("pdf.csv");
        const double sd = samples.size() > 1 ? sample_std(samples) : 0.0;
        auto& sm = manifest.summary;
        sm["bandwidth"] = num(h);
        sm["bandwidth_rule"] = bandwidth == "scott" ? "scott" : "fixed";
        sm["samples"] = std::to_string(samples.size());
        sm["sample_std"] = num(sd);
        sm["mass"] = num(integrate(grid, q));
        std::cout << fmt::format("bandwidth   {:.6g}\n", h);
        if (sd > 0.0) {
            std::cout << fmt::format("h / sd      {:.6g}\n", h / sd);
        }
        std::cout << fmt::format("mass        {:.6g}\n", integrate(grid, q));
        std::cout << fmt::format("output      {}\n", dir.string());
    });
}

// --- validate --------------------------------------------------------------------

int cmd_validate(const fs::path& config_path, const fs::path& design_path, double threshold,
                 const std::optional<fs::path>& output)
{
    RunConfig cfg = parse_config(config_path);
    if (output) {
        cfg.output = *output;
    }
    if (!(threshold > 0.0)) {
        throw ConfigError("--threshold", "must be > 0");
    }
    std::vector<double> design;
    try {
        design = read_column(design_path);
    } catch (const std::exception& e) {
        throw ConfigError("--design", e.what());
    }
    ModelSpec base_spec = cfg.model;
    const SurrogateOptions opts = base_spec.surrogate.value_or(SurrogateOptions{});
    base_spec.surrogate.reset();
    const auto base = build_model(base_spec);
    try {
        base->check_design(design);
    } catch (const std::exception& e) {
        throw ConfigError("--design", e.what());
    }

    Manifest manifest;
    manifest.command = "validate";
    manifest.config_hash = config_digest(cfg, "\n" + join_design(design));
    manifest.seed = cfg.seed;
    const fs::path dir = cfg.output;

    bool passed = false;
    const int status = with_output(dir, manifest, [&] {
        const auto v = validate_surrogate(base, design, opts.points, opts.degree);
        passed = v.residual <= threshold && v.held_out_error <= threshold;
        auto& sm = manifest.summary;
        sm["residual"] = num(v.residual);
        sm["held_out_error"] = num(v.held_out_error);
        sm["threshold"] = num(threshold);
        sm["points"] = std::to_string(opts.points);
        sm["degree"] = std::to_string(opts.degree);
        sm["verdict"] = passed ? "pass" : "fail";
        std::cout << fmt::format("residual        {:.3e}\n", v.residual);
        std::cout << fmt::format("held-out error  {:.3e}\n", v.held_out_error);
        std::cout << fmt::format("threshold       {:.3e}  {}\n", threshold, passed ? "pass" : "FAIL");
    });
    if (status != kOk) {
        return status;
    }
    return passed ? kOk : kInvalid;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Density matching for design under uncertainty"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config;
    std::string design;
    std::string samples;
    std::string bandwidth = "scott";
    std::string grid;
    std::string output;
    double threshold = 1e-3;

    auto* match = app.add_subcommand("match", "Minimize the distance between target and response densities");
    match->add_option("--config", config, "Run configuration (JSON)")->required();
    match->add_option("--output", output, "Output directory (overrides the config)");

    auto* rdo = app.add_subcommand("rdo", "Mean-variance robust design with NSGA-II");
    rdo->add_option("--config", config, "Run configuration (JSON)")->required();
    rdo->add_option("--output", output, "Output directory (overrides the config)");

    auto* kde = app.add_subcommand("kde", "Kernel density estimate of a sample file");
    kde->add_option("--samples", samples, "Samples, one per row (last column is used)")->required();
    kde->add_option("--bandwidth", bandwidth, "Bandwidth, or \"scott\"");
    kde->add_option("--grid", grid, "Evaluation grid lo,hi,N")->required();
    kde->add_option("--output", output, "Output directory");

    auto* validate = app.add_subcommand("validate", "Check a polynomial surrogate at one design");
    validate->add_option("--config", config, "Run configuration (JSON)")->required();
    validate->add_option("--design", design, "Design file, one value per row")->required();
    validate->add_option("--threshold", threshold, "Largest accepted residual and held-out error");
    validate->add_option("--output", output, "Output directory (overrides the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    const std::optional<fs::path> out = output.empty() ? std::nullopt : std::optional<fs::path>(output);
    try {
        if (*match) {
            return cmd_match(config, out);
        }
        if (*rdo) {
            return cmd_rdo(config, out);
        }
        if (*kde) {
            return cmd_kde(samples, bandwidth, grid, out);
        }
        return cmd_validate(config, design, threshold, out);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailed;
    }
}
