#include "dmatch/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

namespace dmatch {

using nlohmann::json;

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::invalid_argument(path.empty()                   ? message
                            : message.rfind("must ", 0) == 0 ? path + " " + message
                                                             : path + ": " + message),
      path_(std::move(path))
{
}

namespace {

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

std::size_t edit_distance(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string type_name(const json& j)
{
    return j.type_name();
}

void require_object(const json& j, const std::string& path)
{
    if (!j.is_object()) {
        throw ConfigError(path, fmt::format("expected an object, got {}", type_name(j)));
    }
}

constexpr std::pair<const char*, const char*> kNestedKeys[] = {
    {"grid", "f_lower"},
    {"grid", "f_upper"},
    {"grid", "n_points"},
    {"kde", "samples"},
    {"kde", "stage1_bandwidth"},
    {"kde", "stage1_iterations"},
    {"kde", "stage2_bandwidth"},
    {"optimizer", "max_iterations"},
    {"optimizer", "gradient_tolerance"},
    {"optimizer", "step_tolerance"},
    {"optimizer", "armijo"},
    {"optimizer", "backtrack"},
    {"optimizer", "initial_step"},
    {"optimizer", "max_backtracks"},
    {"rdo", "population"},
    {"rdo", "generations"},
    {"rdo", "crossover_probability"},
    {"rdo", "mutation_probability"},
    {"rdo", "crossover_index"},
    {"rdo", "mutation_index"},
    {"rdo", "penalty"},
};

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed)
{
    require_object(obj, path);
    for (const auto& item : obj.items()) {
        const std::string& key = item.key();
        if (std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            continue;
        }
        std::string best;
        std::size_t best_d = std::numeric_limits<std::size_t>::max();
        for (const char* a : allowed) {
            const std::size_t d = edit_distance(key, a);
            if (d < best_d) {
                best_d = d;
                best = a;
            }
        }
        std::string msg = "unknown key";
        const std::size_t close = std::max<std::size_t>(2, key.size() / 3);
        if (!best.empty() && best_d <= close) {
            msg += fmt::format("; did you mean \"{}\"?", best);
        } else if (!path.empty()) {
            // Nested keys may be written without their prefix, e.g. "bandwith".
            std::vector<std::string> hits;
            for (const char* a : allowed) {
                const std::string full = a;
                const std::string tail = full.substr(full.rfind('_') + 1);
                if (full != tail && edit_distance(key, tail) <= close) {
                    hits.push_back(fmt::format("\"{}.{}\"", path, full));
                }
            }
            if (!hits.empty()) {
                msg += fmt::format("; did you mean {}?", fmt::join(hits, " or "));
            }
        } else {
            // A section key written at the top level, possibly without its prefix.
            std::vector<std::string> hits;
            for (const auto& [section, name] : kNestedKeys) {
                const std::string full = name;
                const std::string tail = full.substr(full.rfind('_') + 1);
                if (edit_distance(key, full) <= close || edit_distance(key, tail) <= close) {
                    hits.push_back(fmt::format("\"{}.{}\"", section, full));
                }
            }
            if (!hits.empty()) {
                msg += fmt::format("; did you mean {}?", fmt::join(hits, " or "));
            }
        }
        throw ConfigError(join(path, key), msg);
    }
}

const json* find(const json& obj, const char* key)
{
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& required(const json& obj, const std::string& path, const char* key)
{
    const json* j = find(obj, key);
    if (j == nullptr) {
        throw ConfigError(join(path, key), "required key is missing");
    }
    return *j;
}

double as_number(const json& j, const std::string& path)
{
    if (!j.is_number()) {
        throw ConfigError(path, fmt::format("expected a number, got {}", type_name(j)));
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ConfigError(path, "must be finite");
    }
    return v;
}

std::uint64_t as_unsigned(const json& j, const std::string& path)
{
    if (j.is_number_unsigned()) {
        return j.get<std::uint64_t>();
    }
    if (j.is_number_integer()) {
        throw ConfigError(path, "must be nonnegative");
    }
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) {
            return static_cast<std::uint64_t>(v);
        }
    }
    throw ConfigError(path, fmt::format("expected a nonnegative integer, got {}", j.dump()));
}

std::string as_string(const json& j, const std::string& path)
{
    if (!j.is_string()) {
        throw ConfigError(path, fmt::format("expected a string, got {}", type_name(j)));
    }
    return j.get<std::string>();
}

std::vector<double> as_numbers(const json& j, const std::string& path)
{
    if (!j.is_array()) {
        throw ConfigError(path, fmt::format("expected an array of numbers, got {}", type_name(j)));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_number(j[i], fmt::format("{}[{}]", path, i)));
    }
    return out;
}

template <class F>
auto rethrow_at(const std::string& path, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::logic_error& e) {
        throw ConfigError(path, e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base)
{
    if (p.is_absolute() || base.empty()) {
        return p;
    }
    return base / p;
}

// Two numeric columns separated by commas or whitespace; '#' comments and a
// non-numeric header line are skipped.
std::vector<std::vector<double>> read_table(const std::filesystem::path& path, std::size_t columns)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument(fmt::format("cannot open {}", path.string()));
    }
    std::vector<std::vector<double>> cols(columns);
    std::string line;
    std::size_t lineno = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::vector<std::string> tokens;
        for (std::string t; fields >> t;) {
            tokens.push_back(t);
        }
        if (tokens.empty()) {
            continue;
        }
        std::vector<double> row;
        bool numeric = tokens.size() >= columns;
        for (std::size_t c = 0; numeric && c < columns; ++c) {
            char* end = nullptr;
            const double v = std::strtod(tokens[c].c_str(), &end);
            numeric = end != tokens[c].c_str() && *end == '\0';
            row.push_back(v);
        }
        if (!numeric) {
            if (!seen_data) {
                seen_data = true; // header
                continue;
            }
            throw std::invalid_argument(
                fmt::format("{}:{}: expected {} numeric column(s)", path.string(), lineno, columns));
        }
        seen_data = true;
        for (std::size_t c = 0; c < columns; ++c) {
            cols[c].push_back(row[c]);
        }
    }
    return cols;
}

struct ParsedDistribution {
    Distribution dist;
    json canonical;
};

ParsedDistribution parse_distribution(const json& j, const std::string& path, const std::filesystem::path& base)
{
    require_object(j, path);
    const std::string kind = as_string(required(j, path, "type"), join(path, "type"));
    auto num = [&](const char* key) { return as_number(required(j, path, key), join(path, key)); };
    if (kind == "uniform") {
        check_keys(j, path, {"type", "lower", "upper"});
        const double lo = num("lower");
        const double hi = num("upper");
        auto d = rethrow_at(path, [&] { return Distribution::uniform(lo, hi); });
        return {d, json{{"type", kind}, {"lower", lo}, {"upper", hi}}};
    }
    if (kind == "gaussian") {
        check_keys(j, path, {"type", "mean", "std", "variance"});
        const double mean = num("mean");
        const bool has_std = find(j, "std") != nullptr;
        const bool has_var = find(j, "variance") != nullptr;
        if (has_std == has_var) {
            throw ConfigError(path, "give exactly one of \"std\" or \"variance\"");
        }
        double var = 0.0;
        if (has_std) {
            const double sd = num("std");
            if (!(sd > 0.0)) {
                throw ConfigError(join(path, "std"), "must be > 0");
            }
            var = sd * sd;
        } else {
            var = num("variance");
        }
        auto d = rethrow_at(path, [&] { return Distribution::gaussian(mean, var); });
        return {d, json{{"type", kind}, {"mean", mean}, {"variance", var}}};
    }
    if (kind == "beta") {
        check_keys(j, path, {"type", "alpha", "beta", "lower", "upper"});
        const double a = num("alpha");
        const double b = num("beta");
        const double lo = find(j, "lower") ? num("lower") : 0.0;
        const double hi = find(j, "upper") ? num("upper") : 1.0;
        auto d = rethrow_at(path, [&] { return Distribution::scaled_beta(a, b, lo, hi); });
        return {d, json{{"type", kind}, {"alpha", a}, {"beta", b}, {"lower", lo}, {"upper", hi}}};
    }
    if (kind == "tabulated") {
        check_keys(j, path, {"type", "file", "nodes", "values"});
        const json* file = find(j, "file");
        const bool inline_data = find(j, "nodes") != nullptr || find(j, "values") != nullptr;
        if ((file != nullptr) == inline_data) {
            throw ConfigError(path, "give either \"file\" or both \"nodes\" and \"values\"");
        }
        if (file != nullptr) {
            const auto p = resolve(as_string(*file, join(path, "file")), base);
            if (!std::filesystem::exists(p)) {
                throw ConfigError(join(path, "file"), fmt::format("file {} does not exist", p.string()));
            }
            auto cols = rethrow_at(join(path, "file"), [&] { return read_table(p, 2); });
            auto d = rethrow_at(path, [&] { return Distribution::tabulated(cols[0], cols[1]); });
            return {d, json{{"type", kind}, {"file", std::filesystem::absolute(p).lexically_normal().string()}}};
        }
        auto nodes = as_numbers(required(j, path, "nodes"), join(path, "nodes"));
        auto values = as_numbers(required(j, path, "values"), join(path, "values"));
        auto d = rethrow_at(path, [&] { return Distribution::tabulated(nodes, values); });
        return {d, json{{"type", kind}, {"nodes", nodes}, {"values", values}}};
    }
    throw ConfigError(join(path, "type"),
                      fmt::format("unknown distribution \"{}\" (uniform, gaussian, beta, tabulated)", kind));
}

ModelSpec parse_model(const json& j)
{
    const std::string path = "model";
    ModelSpec m;
    if (j.is_string()) {
        m.kind = j.get<std::string>();
    } else {
        check_keys(j, path, {"type", "s_lower", "s_upper", "constant", "dimension", "surrogate"});
        m.kind = as_string(required(j, path, "type"), join(path, "type"));
        if (const json* v = find(j, "s_lower")) {
            m.s_lower = as_number(*v, join(path, "s_lower"));
        }
        if (const json* v = find(j, "s_upper")) {
            m.s_upper = as_number(*v, join(path, "s_upper"));
        }
        if (const json* v = find(j, "constant")) {
            m.constant = as_number(*v, join(path, "constant"));
        }
        if (const json* v = find(j, "dimension")) {
            m.dimension = as_unsigned(*v, join(path, "dimension"));
            if (m.dimension < 1) {
                throw ConfigError(join(path, "dimension"), "must be ≥ 1");
            }
        }
        if (const json* v = find(j, "surrogate")) {
            const std::string sp = join(path, "surrogate");
            check_keys(*v, sp, {"points", "degree"});
            SurrogateOptions so;
            if (const json* p = find(*v, "points")) {
                so.points = as_unsigned(*p, join(sp, "points"));
            }
            if (const json* d = find(*v, "degree")) {
                so.degree = as_unsigned(*d, join(sp, "degree"));
            }
            if (so.points <= so.degree) {
                throw ConfigError(join(sp, "points"), "must exceed surrogate.degree");
            }
            m.surrogate = so;
        }
    }
    static const char* kinds[] = {"linear-shift", "example-shift", "synthetic-airfoil", "constant"};
    if (std::find(std::begin(kinds), std::end(kinds), m.kind) == std::end(kinds)) {
        throw ConfigError(join(path, "type"),
                          fmt::format("unknown model \"{}\" (linear-shift, example-shift, synthetic-airfoil, "
                                      "constant)",
                                      m.kind));
    }
    if (m.kind != "linear-shift" && (m.s_lower || m.s_upper)) {
        throw ConfigError(path, "s_lower/s_upper apply to the linear-shift model only");
    }
    return m;
}

void parse_optimizer(const json& j, OptimizerConfig& o)
{
    const std::string path = "optimizer";
    check_keys(j, path,
               {"max_iterations", "gradient_tolerance", "step_tolerance", "armijo", "backtrack", "initial_step",
                "max_backtracks"});
    auto positive = [&](const char* key, double& out) {
        if (const json* v = find(j, key)) {
            out = as_number(*v, join(path, key));
            if (!(out > 0.0)) {
                throw ConfigError(join(path, key), "must be > 0");
            }
        }
    };
    if (const json* v = find(j, "max_iterations")) {
        o.max_iterations = as_unsigned(*v, join(path, "max_iterations"));
    }
    if (const json* v = find(j, "max_backtracks")) {
        o.max_backtracks = as_unsigned(*v, join(path, "max_backtracks"));
    }
    positive("gradient_tolerance", o.gradient_tolerance);
    positive("step_tolerance", o.step_tolerance);
    positive("initial_step", o.initial_step);
    positive("armijo", o.armijo);
    positive("backtrack", o.backtrack);
    if (o.armijo >= 1.0) {
        throw ConfigError(join(path, "armijo"), "must be < 1");
    }
    if (o.backtrack >= 1.0) {
        throw ConfigError(join(path, "backtrack"), "must be < 1");
    }
}

void parse_kde(const json& j, KdeSpec& k)
{
    const std::string path = "kde";
    check_keys(j, path, {"samples", "stage1_bandwidth", "stage1_iterations", "stage2_bandwidth"});
    if (const json* v = find(j, "samples")) {
        k.samples = as_unsigned(*v, join(path, "samples"));
        if (k.samples < 2) {
            throw ConfigError(join(path, "samples"), "must be ≥ 2");
        }
    }
    if (const json* v = find(j, "stage1_bandwidth")) {
        k.stage1_bandwidth = as_number(*v, join(path, "stage1_bandwidth"));
        if (!(*k.stage1_bandwidth > 0.0)) {
            throw ConfigError(join(path, "stage1_bandwidth"), "must be > 0");
        }
    }
    if (const json* v = find(j, "stage1_iterations")) {
        k.stage1_iterations = as_unsigned(*v, join(path, "stage1_iterations"));
    }
    if (const json* v = find(j, "stage2_bandwidth")) {
        if (v->is_string()) {
            if (v->get<std::string>() != "scott") {
                throw ConfigError(join(path, "stage2_bandwidth"), "expected a number or \"scott\"");
            }
            k.stage2_bandwidth.reset();
        } else {
            k.stage2_bandwidth = as_number(*v, join(path, "stage2_bandwidth"));
            if (!(*k.stage2_bandwidth > 0.0)) {
                throw ConfigError(join(path, "stage2_bandwidth"), "must be > 0");
            }
        }
    }
}

void parse_rdo(const json& j, RdoSpec& r)
{
    const std::string path = "rdo";
    check_keys(j, path,
               {"population", "generations", "crossover_probability", "mutation_probability", "crossover_index",
                "mutation_index", "samples", "penalty"});
    auto& ga = r.ga;
    if (const json* v = find(j, "population")) {
        ga.population = as_unsigned(*v, join(path, "population"));
        if (ga.population < 4 || ga.population % 2 != 0) {
            throw ConfigError(join(path, "population"), "must be an even number ≥ 4");
        }
    }
    if (const json* v = find(j, "generations")) {
        ga.generations = as_unsigned(*v, join(path, "generations"));
        if (ga.generations < 1) {
            throw ConfigError(join(path, "generations"), "must be ≥ 1");
        }
    }
    auto probability = [&](const char* key) {
        const double p = as_number(*find(j, key), join(path, key));
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ConfigError(join(path, key), "must lie in [0, 1]");
        }
        return p;
    };
    if (find(j, "crossover_probability")) {
        ga.crossover_probability = probability("crossover_probability");
    }
    if (find(j, "mutation_probability")) {
        ga.mutation_probability = probability("mutation_probability");
    }
    auto index = [&](const char* key, double& out) {
        if (const json* v = find(j, key)) {
            out = as_number(*v, join(path, key));
            if (!(out >= 0.0)) {
                throw ConfigError(join(path, key), "must be ≥ 0");
            }
        }
    };
    index("crossover_index", ga.crossover_index);
    index("mutation_index", ga.mutation_index);
    if (const json* v = find(j, "samples")) {
        r.samples = as_unsigned(*v, join(path, "samples"));
        if (r.samples < 1) {
            throw ConfigError(join(path, "samples"), "must be ≥ 1");
        }
    }
    if (const json* v = find(j, "penalty")) {
        r.penalty = as_number(*v, join(path, "penalty"));
        if (!(r.penalty > 0.0)) {
            throw ConfigError(join(path, "penalty"), "must be > 0");
        }
    }
}

RunConfig parse_json(const json& root, const std::filesystem::path& base)
{
    check_keys(root, "",
               {"model", "target", "uncertainty", "grid", "method", "kde", "optimizer", "initial_design", "rdo",
                "seed", "output"});
    RunConfig cfg;
    cfg.model = parse_model(required(root, "", "model"));
    const auto model = rethrow_at("model", [&] { return build_model(cfg.model); });

    if (const json* t = find(root, "target")) {
        auto pd = parse_distribution(*t, "target", base);
        cfg.target = pd.dist;
        cfg.target_json = pd.canonical.dump();
    }
    if (const json* u = find(root, "uncertainty")) {
        auto pd = parse_distribution(*u, "uncertainty", base);
        if (cfg.model.kind != "constant" && pd.dist.describe() != model->uncertainty().describe()) {
            throw ConfigError("uncertainty", fmt::format("the {} model fixes its own law, {}", cfg.model.kind,
                                                         model->uncertainty().describe()));
        }
        cfg.uncertainty = pd.dist;
        cfg.uncertainty_json = pd.canonical.dump();
    }

    const auto [flo, fhi] = model->response_bounds();
    cfg.grid.lower = flo;
    cfg.grid.upper = fhi;
    if (const json* g = find(root, "grid")) {
        check_keys(*g, "grid", {"f_lower", "f_upper", "n_points"});
        if (const json* v = find(*g, "f_lower")) {
            cfg.grid.lower = as_number(*v, "grid.f_lower");
        }
        if (const json* v = find(*g, "f_upper")) {
            cfg.grid.upper = as_number(*v, "grid.f_upper");
        }
        if (const json* v = find(*g, "n_points")) {
            if (!v->is_number_integer() && !v->is_number_unsigned()) {
                throw ConfigError("grid.n_points", fmt::format("expected an integer, got {}", v->dump()));
            }
            if (v->get<std::int64_t>() < 2) {
                throw ConfigError("grid.n_points", "must be ≥ 2");
            }
            cfg.grid.n_points = v->get<std::size_t>();
        }
    }
    if (!(cfg.grid.upper > cfg.grid.lower)) {
        throw ConfigError("grid.f_upper", "must be > grid.f_lower");
    }

    if (const json* v = find(root, "method")) {
        cfg.method = as_string(*v, "method");
        if (cfg.method != "kde" && cfg.method != "analytic") {
            throw ConfigError("method", "expected \"kde\" or \"analytic\"");
        }
        if (cfg.method == "analytic" && !model->has_analytic_density()) {
            throw ConfigError("method", fmt::format("the {} model has no closed-form response density",
                                                    cfg.model.kind));
        }
    }
    if (const json* v = find(root, "kde")) {
        parse_kde(*v, cfg.kde);
    }
    if (const json* v = find(root, "optimizer")) {
        parse_optimizer(*v, cfg.optimizer);
    }
    if (const json* v = find(root, "initial_design")) {
        cfg.initial_design = as_numbers(*v, "initial_design");
        rethrow_at("initial_design", [&] {
            model->check_design(cfg.initial_design);
            return 0;
        });
    } else {
        const auto& b = model->box();
        for (std::size_t k = 0; k < b.size(); ++k) {
            cfg.initial_design.push_back(0.5 * (b.lower[k] + b.upper[k]));
        }
    }
    if (const json* v = find(root, "rdo")) {
        parse_rdo(*v, cfg.rdo);
    }
    if (const json* v = find(root, "seed")) {
        cfg.seed = as_unsigned(*v, "seed");
    }
    if (const json* v = find(root, "output")) {
        cfg.output = resolve(as_string(*v, "output"), base);
    }
    return cfg;
}

std::filesystem::path default_output(const std::filesystem::path& source)
{
    std::filesystem::path root = "runs";
    if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') {
        root = env;
    }
    return root / (source.empty() ? std::string("run") : source.stem().string());
}

std::string num(double v)
{
    return fmt::format("{:.17g}", v);
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    }
    return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path)
{
    out.close();
    if (!out) {
        throw std::runtime_error(fmt::format("error writing {}", path.string()));
    }
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", fmt::format("malformed JSON: {}", e.what()));
    }
    RunConfig cfg = parse_json(root, base_dir);
    if (cfg.output.empty()) {
        cfg.output = default_output({});
    }
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", fmt::format("cannot read config file {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    json root;
    try {
        root = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("", fmt::format("{} is not valid JSON: {}", path.string(), e.what()));
    }
    RunConfig cfg = parse_json(root, path.parent_path());
    cfg.source = path;
    if (cfg.output.empty()) {
        cfg.output = default_output(path);
    }
    return cfg;
}

std::string dump_config(const RunConfig& cfg)
{
    json root;
    json model{{"type", cfg.model.kind}};
    if (cfg.model.s_lower) {
        model["s_lower"] = *cfg.model.s_lower;
    }
    if (cfg.model.s_upper) {
        model["s_upper"] = *cfg.model.s_upper;
    }
    if (cfg.model.kind == "constant") {
        model["constant"] = cfg.model.constant;
        model["dimension"] = cfg.model.dimension;
    }
    if (cfg.model.surrogate) {
        model["surrogate"] = {{"points", cfg.model.surrogate->points}, {"degree", cfg.model.surrogate->degree}};
    }
    root["model"] = model;
    if (!cfg.target_json.empty()) {
        root["target"] = json::parse(cfg.target_json);
    }
    if (!cfg.uncertainty_json.empty()) {
        root["uncertainty"] = json::parse(cfg.uncertainty_json);
    }
    root["grid"] = {{"f_lower", cfg.grid.lower}, {"f_upper", cfg.grid.upper}, {"n_points", cfg.grid.n_points}};
    root["method"] = cfg.method;
    json kde{{"samples", cfg.kde.samples}, {"stage1_iterations", cfg.kde.stage1_iterations}};
    if (cfg.kde.stage1_bandwidth) {
        kde["stage1_bandwidth"] = *cfg.kde.stage1_bandwidth;
    }
    kde["stage2_bandwidth"] = cfg.kde.stage2_bandwidth ? json(*cfg.kde.stage2_bandwidth) : json("scott");
    root["kde"] = kde;
    const auto& o = cfg.optimizer;
    root["optimizer"] = {{"max_iterations", o.max_iterations}, {"gradient_tolerance", o.gradient_tolerance},
                         {"step_tolerance", o.step_tolerance}, {"armijo", o.armijo},
                         {"backtrack", o.backtrack},           {"initial_step", o.initial_step},
                         {"max_backtracks", o.max_backtracks}};
    root["initial_design"] = cfg.initial_design;
    const auto& ga = cfg.rdo.ga;
    json rdo{{"population", ga.population},
             {"generations", ga.generations},
             {"crossover_probability", ga.crossover_probability},
             {"crossover_index", ga.crossover_index},
             {"mutation_index", ga.mutation_index},
             {"samples", cfg.rdo.samples},
             {"penalty", cfg.rdo.penalty}};
    if (ga.mutation_probability) {
        rdo["mutation_probability"] = *ga.mutation_probability;
    }
    root["rdo"] = rdo;
    root["seed"] = cfg.seed;
    root["output"] = cfg.output.string();
    return root.dump(2);
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::shared_ptr<const ResponseModel> build_model(const ModelSpec& spec)
{
    std::shared_ptr<const ResponseModel> base;
    if (spec.kind == "linear-shift") {
        base = std::make_shared<LinearShiftModel>(spec.s_lower.value_or(0.01), spec.s_upper.value_or(2.0));
    } else if (spec.kind == "example-shift") {
        base = std::make_shared<ExampleShiftModel>();
    } else if (spec.kind == "synthetic-airfoil") {
        base = std::make_shared<SyntheticAirfoilModel>();
    } else if (spec.kind == "constant") {
        Box box{std::vector<double>(spec.dimension, -1.0), std::vector<double>(spec.dimension, 1.0)};
        base = std::make_shared<ConstantModel>(spec.constant, std::move(box), Distribution::uniform(0.0, 1.0));
    } else {
        throw std::invalid_argument(fmt::format("unknown model \"{}\"", spec.kind));
    }
    if (spec.surrogate) {
        return std::make_shared<SurrogateBackedModel>(base, spec.surrogate->points, spec.surrogate->degree);
    }
    return base;
}

DensityMatchProblem to_problem(const RunConfig& cfg, std::shared_ptr<const ResponseModel> model)
{
    if (!cfg.target) {
        throw ConfigError("target", "required key is missing");
    }
    DensityMatchProblem p;
    p.model = std::move(model);
    p.target = cfg.target;
    p.grid = QuadratureGrid(cfg.grid.lower, cfg.grid.upper, cfg.grid.n_points);
    p.samples = cfg.kde.samples;
    p.stage1_bandwidth = cfg.kde.stage1_bandwidth;
    p.stage1_iterations = cfg.kde.stage1_iterations;
    p.stage2_bandwidth =
        cfg.kde.stage2_bandwidth ? BandwidthPolicy::fixed(*cfg.kde.stage2_bandwidth) : BandwidthPolicy::scott();
    p.analytic = cfg.method == "analytic";
    p.optimizer = cfg.optimizer;
    p.initial_design = cfg.initial_design;
    p.seed = cfg.seed;
    return p;
}

// ---------------------------------------------------------------------------

void write_history_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records)
{
    auto out = open_out(path);
    out << "iter,stage,objective,grad_norm,step,bandwidth\n";
    for (const auto& r : records) {
        out << r.iteration << ',' << r.stage << ',' << num(r.objective) << ',' << num(r.gradient_norm) << ',' << num(r.step) << ',' << num(r.bandwidth) << '\n';
    }
    close_out(out, path);
}

void write_design_csv(const std::filesystem::path& path, const std::vector<double>& design)
{
    auto out = open_out(path);
    out << "index,value\n";
    for (std::size_t k = 0; k < design.size(); ++k) {
        out << k << ',' << num(design[k]) << '\n';
    }
    close_out(out, path);
}

void write_pdf_csv(const std::filesystem::path& path, const std::vector<double>& nodes,
                   const std::vector<double>& target, const std::vector<double>& response)
{
    if (target.size() != nodes.size() || response.size() != nodes.size()) {
        throw std::invalid_argument("write_pdf_csv: column lengths differ");
    }
    auto out = open_out(path);
    out << "node,target,response\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out << num(nodes[i]) << ',' << num(target[i]) << ',' << num(response[i]) << '\n';
    }
    close_out(out, path);
}

void write_density_csv(const std::filesystem::path& path, const std::vector<double>& nodes,
                       const std::vector<double>& density)
{
    if (density.size() != nodes.size()) {
        throw std::invalid_argument("write_density_csv: column lengths differ");
    }
    auto out = open_out(path);
    out << "node,density\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out << num(nodes[i]) << ',' << num(density[i]) << '\n';
    }
    close_out(out, path);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
    close_out(out, path);
}

void write_pareto_csv(const std::filesystem::path& path, const ParetoArchive& archive)
{
    auto out = open_out(path);
    const std::size_t n = archive.members.empty() ? 0 : archive.members.front().design.size();
    for (std::size_t k = 0; k < n; ++k) {
        out << 's' << (k + 1) << ',';
    }
    out << "inv_mean,mean,variance,skewness\n";
    for (const auto& m : archive.members) {
        for (double v : m.design) {
            out << num(v) << ',';
        }
        out << num(m.objectives[0]) << ',' << num(m.moments.mean) << ',' << num(m.moments.variance) << ','
            << num(m.moments.skewness) << '\n';
    }
    close_out(out, path);
}

std::vector<double> read_column(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument(fmt::format("cannot open {}", path.string()));
    }
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::string last;
        for (std::string t; fields >> t;) {
            last = t;
        }
        if (last.empty()) {
            continue;
        }
        char* end = nullptr;
        const double v = std::strtod(last.c_str(), &end);
        if (end == last.c_str() || *end != '\0') {
            if (!seen_data) {
                seen_data = true; // header
                continue;
            }
            throw std::invalid_argument(fmt::format("{}:{}: expected a number, got \"{}\"", path.string(), lineno, last));
        }
        seen_data = true;
        out.push_back(v);
    }
    return out;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m)
{
    json j{{"command", m.command},
           {"version", kVersion},
           {"config_hash", m.config_hash},
           {"seed", m.seed},
           {"status", m.complete ? "complete" : "incomplete"},
           {"artifacts", m.artifacts},
           {"summary", m.summary}};
    if (!m.failure.empty()) {
        j["failure"] = m.failure;
    }
    const auto path = dir / "MANIFEST";
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    close_out(out, path);
}

OutputLock::OutputLock(const std::filesystem::path& dir) : lock_(dir / ".lock")
{
    std::filesystem::create_directories(dir);
    const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        const int err = errno;
        if (err == EEXIST) {
            throw std::runtime_error(
                fmt::format("output directory {} is locked by another run ({} exists)", dir.string(), lock_.string()));
        }
        throw std::runtime_error(fmt::format("cannot create {}: {}", lock_.string(), std::strerror(err)));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock()
{
    std::error_code ec;
    std::filesystem::remove(lock_, ec);
}

} // namespace dmatch
