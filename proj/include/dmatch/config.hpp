#pragma once

#include "dmatch/densities.hpp"
#include "dmatch/models.hpp"
#include "dmatch/optimizer.hpp"
#include "dmatch/rdo.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmatch {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutputRootEnv = "DMATCH_OUTPUT_ROOT";

/// Configuration problem tied to a key path such as "grid.n_points".
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string path, const std::string& message);
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct ModelSpec {
    std::string kind = "synthetic-airfoil"; // linear-shift | example-shift | synthetic-airfoil | constant
    std::optional<double> s_lower;          // linear-shift box
    std::optional<double> s_upper;
    double constant = 0.0;                  // constant model
    std::size_t dimension = 1;              // constant model
    std::optional<SurrogateOptions> surrogate;
};

struct GridSpec {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t n_points = 2500;
};

struct KdeSpec {
    std::size_t samples = 100000;
    std::optional<double> stage1_bandwidth; // default (upper - lower) / 5
    std::size_t stage1_iterations = 3;
    std::optional<double> stage2_bandwidth = 1.0; // empty means Scott
};

struct RdoSpec {
    Nsga2Config ga;
    std::size_t samples = 100000;
    double penalty = kDefaultPenalty;
};

struct RunConfig {
    ModelSpec model;
    std::optional<Distribution> target;
    std::string target_json; // canonical descriptor, kept for round trips
    std::optional<Distribution> uncertainty;
    std::string uncertainty_json;
    GridSpec grid;
    std::string method = "kde"; // kde | analytic
    KdeSpec kde;
    OptimizerConfig optimizer;
    std::vector<double> initial_design;
    RdoSpec rdo;
    std::uint64_t seed = 0;
    std::filesystem::path output;
    std::filesystem::path source; // file the config came from, if any
};

/// Read, validate and complete a JSON run configuration. Relative file paths
/// inside it resolve against the config's directory.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});

/// Canonical JSON with every default spelled out; parses back to the same config.
std::string dump_config(const RunConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);

std::shared_ptr<const ResponseModel> build_model(const ModelSpec& spec);

DensityMatchProblem to_problem(const RunConfig& cfg, std::shared_ptr<const ResponseModel> model);

// ---------------------------------------------------------------------------
// Artifacts

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records);
void write_design_csv(const std::filesystem::path& path, const std::vector<double>& design);
void write_pdf_csv(const std::filesystem::path& path, const std::vector<double>& nodes,
                   const std::vector<double>& target, const std::vector<double>& response);
void write_density_csv(const std::filesystem::path& path, const std::vector<double>& nodes,
                       const std::vector<double>& density);
void write_pareto_csv(const std::filesystem::path& path, const ParetoArchive& archive);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Last field of every row; a leading non-numeric row is taken as a header.
std::vector<double> read_column(const std::filesystem::path& path);

struct Manifest {
    std::string command;
    std::string config_hash; // FNV-1a of the canonical config, hex
    std::uint64_t seed = 0;
    std::vector<std::string> artifacts;
    bool complete = false;
    std::string failure;
    std::map<std::string, std::string> summary;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);

/// Exclusive claim on an output directory through a `.lock` file.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path lock_;
};

} // namespace dmatch
