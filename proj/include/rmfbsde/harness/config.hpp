/**
 * @file config.hpp
 * @brief Flat `key = value` experiment configuration with collected (not fail-fast) errors.
 *
 * Format: one `key = value` per line, `#` starts a comment, blank lines ignored.
 * Lists are comma separated; probe points are `t:x` pairs. Every key except
 * `experiment` has a default; experiments overlay their own defaults before the
 * file is applied. Environment variables RMFBSDE_<KEY> (key upper-cased) override
 * file values.
 */

#ifndef RMFBSDE_HARNESS_CONFIG_HPP
#define RMFBSDE_HARNESS_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmfbsde/pde_obstacle.hpp"
#include "rmfbsde/problems.hpp"
#include "rmfbsde/regression.hpp"

namespace rmf::harness {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{
        "example31",          "example31-counterexample", "solve",       "converge-penalization",
        "converge-particles", "pde-compare",              "pde-lipschitz", "reflection-invariants",
        "zero-driver",        "oracle",                   "validate-problem"};
    return names;
}

struct ExperimentConfig {
    std::string experiment;
    std::string problem;
    ProblemParams params;

    std::size_t steps = 50;
    std::size_t particles = 20000;
    std::uint64_t seed = 2024;
    std::size_t threads = 1;

    std::string basis_family = "polynomial";
    unsigned degree = 3;
    std::size_t bins = 20;
    double theta = 0.0;
    std::size_t inner_iterations = 2;
    double tol_picard = 1e-4;
    std::size_t max_picard = 20;

    std::string rule = "reflect";  ///< solve: reflect | free | penalize
    double penalty = 16.0;
    std::vector<double> n_list{1, 4, 16, 64, 256};
    std::vector<std::size_t> interaction_sizes{8, 32, 128, 512};
    std::size_t budget = 10000;
    std::size_t min_sub_size = 500;
    std::size_t reference_particles = 50000;
    bool pooled_regression = true;

    std::vector<ProbePoint> probes;
    std::size_t pde_intervals = 100;
    std::string pde_scheme = "implicit";
    std::size_t mc_particles = 20000;
    std::size_t refinements = 3;

    std::string oracle_format = "json";

    // Tolerances for the invariants each experiment asserts.
    double tol_relative = 0.02;
    double tol_probability = 0.05;
    double min_violation_probability = 0.3;
    double tol_distance = 0.05;
    double tol_deterministic = 1e-2;
    double tol_monotone = 0.01;
    double se_multiplier = 3.0;
    double tol_rate_factor = 3.0;
    double tol_price = 0.005;
    double tol_gap = 0.05;
    double tol_lipschitz_ratio = 2.0;
    double tol_scheme = 1e-6;
    double tol_skorokhod = 1e-10;

    RegressionBasis basis() const {
        return basis_family == "piecewise" ? RegressionBasis::piecewise(degree, bins)
                                           : RegressionBasis::polynomial(degree);
    }
    SolverConfig solver() const {
        SolverConfig c;
        c.basis = basis();
        c.theta = theta;
        c.inner_iterations = inner_iterations;
        c.tol_picard = tol_picard;
        c.max_picard = max_picard;
        return c;
    }
};

struct ConfigError {
    std::size_t line = 0;  ///< 0 when not tied to a line
    std::string key;
    std::string message;

    std::string describe() const {
        std::string s = line > 0 ? "line " + std::to_string(line) + ": " : std::string{};
        return s + (key.empty() ? "" : "'" + key + "': ") + message;
    }
};

struct ParseResult {
    ExperimentConfig config;
    std::vector<ConfigError> errors;
    bool ok() const noexcept { return errors.empty(); }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline std::optional<double> to_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> to_integer(const std::string& s) {
    long long v = 0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> to_unsigned(const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

/// Returns an error message, or empty on success.
using Setter = std::function<std::string(const std::string& value, ExperimentConfig& cfg)>;

inline Setter real_key(double ExperimentConfig::*field, double lo, double hi, const char* constraint) {
    return [=](const std::string& v, ExperimentConfig& c) -> std::string {
        const auto x = to_real(v);
        if (!x) return "expected a real number, got '" + v + "'";
        if (!(*x >= lo && *x <= hi)) return std::string("constraint violated: must be ") + constraint;
        c.*field = *x;
        return {};
    };
}

inline Setter params_real(double ProblemParams::*field, double lo, const char* constraint) {
    return [=](const std::string& v, ExperimentConfig& c) -> std::string {
        const auto x = to_real(v);
        if (!x) return "expected a real number, got '" + v + "'";
        if (!(*x >= lo)) return std::string("constraint violated: must be ") + constraint;
        c.params.*field = *x;
        return {};
    };
}

template <class Int>
Setter int_key(Int ExperimentConfig::*field, long long lo, const char* constraint) {
    return [=](const std::string& v, ExperimentConfig& c) -> std::string {
        const auto x = to_integer(v);
        if (!x) return "expected an integer, got '" + v + "'";
        if (*x < lo) return std::string("constraint violated: must be ") + constraint;
        c.*field = static_cast<Int>(*x);
        return {};
    };
}

inline Setter choice_key(std::string ExperimentConfig::*field, std::vector<std::string> allowed) {
    return [=](const std::string& v, ExperimentConfig& c) -> std::string {
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            return "invalid value '" + v + "'; expected one of: " + list;
        }
        c.*field = v;
        return {};
    };
}

inline const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["experiment"] = choice_key(&ExperimentConfig::experiment, experiment_names());
        t["problem"] = choice_key(&ExperimentConfig::problem, problem_names());
        t["strike"] = params_real(&ProblemParams::strike, 0.0, ">= 0");
        t["rate"] = params_real(&ProblemParams::rate, -1.0, ">= -1");
        t["vol"] = params_real(&ProblemParams::vol, 1e-300, "> 0");
        t["spot"] = params_real(&ProblemParams::spot, 1e-300, "> 0");
        t["maturity"] = params_real(&ProblemParams::maturity, 1e-300, "> 0");
        t["steps"] = int_key(&ExperimentConfig::steps, 1, ">= 1");
        t["particles"] = int_key(&ExperimentConfig::particles, 1, ">= 1");
        t["seed"] = [](const std::string& v, ExperimentConfig& c) -> std::string {
            const auto x = to_unsigned(v);
            if (!x) return "expected an unsigned 64-bit integer, got '" + v + "'";
            c.seed = *x;
            return {};
        };
        t["threads"] = int_key(&ExperimentConfig::threads, 1, ">= 1");
        t["basis"] = choice_key(&ExperimentConfig::basis_family, {"polynomial", "piecewise"});
        t["degree"] = int_key(&ExperimentConfig::degree, 0, ">= 0");
        t["bins"] = int_key(&ExperimentConfig::bins, 1, ">= 1");
        t["theta"] = real_key(&ExperimentConfig::theta, 0.0, 1.0, "in [0, 1]");
        t["inner_iterations"] = int_key(&ExperimentConfig::inner_iterations, 1, ">= 1");
        t["tol_picard"] = real_key(&ExperimentConfig::tol_picard, 1e-300, 1e300, "> 0");
        t["max_picard"] = int_key(&ExperimentConfig::max_picard, 1, ">= 1");
        t["rule"] = choice_key(&ExperimentConfig::rule, {"reflect", "free", "penalize"});
        t["penalty"] = real_key(&ExperimentConfig::penalty, 1.0, 1e300, ">= 1");
        t["n_list"] = [](const std::string& v, ExperimentConfig& c) -> std::string {
            std::vector<double> out;
            for (const auto& item : split(v, ',')) {
                const auto x = to_real(item);
                if (!x || *x < 1.0) return "expected a comma-separated list of reals >= 1, got '" + v + "'";
                if (!out.empty() && *x <= out.back()) return "constraint violated: n_list must be strictly increasing";
                out.push_back(*x);
            }
            if (out.empty()) return "list must not be empty";
            c.n_list = out;
            return {};
        };
        t["N_list"] = [](const std::string& v, ExperimentConfig& c) -> std::string {
            std::vector<std::size_t> out;
            for (const auto& item : split(v, ',')) {
                const auto x = to_integer(item);
                if (!x || *x < 1) return "expected a comma-separated list of integers >= 1, got '" + v + "'";
                if (!out.empty() && static_cast<std::size_t>(*x) <= out.back()) {
                    return "constraint violated: N_list must be strictly increasing";
                }
                out.push_back(static_cast<std::size_t>(*x));
            }
            if (out.empty()) return "list must not be empty";
            c.interaction_sizes = out;
            return {};
        };
        t["budget"] = int_key(&ExperimentConfig::budget, 1, ">= 1");
        t["min_sub_size"] = int_key(&ExperimentConfig::min_sub_size, 1, ">= 1");
        t["reference_particles"] = int_key(&ExperimentConfig::reference_particles, 1, ">= 1");
        t["pooled_regression"] = [](const std::string& v, ExperimentConfig& c) -> std::string {
            if (v == "true") c.pooled_regression = true;
            else if (v == "false") c.pooled_regression = false;
            else return "expected true or false, got '" + v + "'";
            return {};
        };
        t["probes"] = [](const std::string& v, ExperimentConfig& c) -> std::string {
            std::vector<ProbePoint> out;
            for (const auto& item : split(v, ',')) {
                const auto parts = split(item, ':');
                const auto tt = parts.size() == 2 ? to_real(parts[0]) : std::nullopt;
                const auto xx = parts.size() == 2 ? to_real(parts[1]) : std::nullopt;
                if (!tt || !xx) return "expected comma-separated t:x pairs, got '" + item + "'";
                out.push_back({*tt, *xx});
            }
            c.probes = out;
            return {};
        };
        t["pde_intervals"] = int_key(&ExperimentConfig::pde_intervals, 2, ">= 2");
        t["pde_scheme"] = choice_key(&ExperimentConfig::pde_scheme, {"implicit", "explicit"});
        t["mc_particles"] = int_key(&ExperimentConfig::mc_particles, 1, ">= 1");
        t["refinements"] = int_key(&ExperimentConfig::refinements, 1, ">= 1");
        t["oracle_format"] = choice_key(&ExperimentConfig::oracle_format, {"json", "csv"});
        t["tol_relative"] = real_key(&ExperimentConfig::tol_relative, 0.0, 1e300, ">= 0");
        t["tol_probability"] = real_key(&ExperimentConfig::tol_probability, 0.0, 1.0, "in [0, 1]");
        t["min_violation_probability"] = real_key(&ExperimentConfig::min_violation_probability, 0.0, 1.0, "in [0, 1]");
        t["tol_distance"] = real_key(&ExperimentConfig::tol_distance, 0.0, 1e300, ">= 0");
        t["tol_deterministic"] = real_key(&ExperimentConfig::tol_deterministic, 0.0, 1e300, ">= 0");
        t["tol_monotone"] = real_key(&ExperimentConfig::tol_monotone, 0.0, 1.0, "in [0, 1]");
        t["se_multiplier"] = real_key(&ExperimentConfig::se_multiplier, 0.0, 1e300, ">= 0");
        t["tol_rate_factor"] = real_key(&ExperimentConfig::tol_rate_factor, 1.0, 1e300, ">= 1");
        t["tol_price"] = real_key(&ExperimentConfig::tol_price, 0.0, 1e300, ">= 0");
        t["tol_gap"] = real_key(&ExperimentConfig::tol_gap, 0.0, 1e300, ">= 0");
        t["tol_lipschitz_ratio"] = real_key(&ExperimentConfig::tol_lipschitz_ratio, 1.0, 1e300, ">= 1");
        t["tol_scheme"] = real_key(&ExperimentConfig::tol_scheme, 0.0, 1e300, ">= 0");
        t["tol_skorokhod"] = real_key(&ExperimentConfig::tol_skorokhod, 0.0, 1e300, ">= 0");
        return t;
    }();
    return table;
}

/// Experiment-specific defaults, applied before the user's file.
inline const std::map<std::string, std::string>& experiment_defaults() {
    static const std::map<std::string, std::string> d{
        {"example31",
         "problem = example31\nsteps = 200\nparticles = 100000\nbasis = piecewise\ndegree = 2\nbins = 20\n"
         "theta = 0.5\n"},
        {"example31-counterexample",
         "problem = example31\nsteps = 200\nparticles = 100000\nbasis = piecewise\ndegree = 2\nbins = 20\n"
         "theta = 0.5\n"},
        {"solve", "problem = american_put\nsteps = 50\nparticles = 400000\nbasis = piecewise\ndegree = 2\nbins = 20\n"},
        {"converge-penalization",
         "problem = benchmark_reflected_mf\nsteps = 50\nparticles = 20000\nbasis = piecewise\ndegree = 2\nbins = 10\n"},
        {"converge-particles",
         "problem = benchmark_reflected_mf\nsteps = 50\nreference_particles = 50000\nbasis = piecewise\ndegree = 2\n"
         "bins = 10\ntheta = 0.5\n"},
        {"pde-compare",
         "problem = benchmark_reflected_mf\nsteps = 20\nparticles = 5000\nmc_particles = 5000\npde_intervals = 50\n"
         "basis = piecewise\ndegree = 2\nbins = 10\ntheta = 0.5\n"
         "probes = 0:0, 0.25:0.25, 0.25:0.75, 0.5:-0.25, 0.5:0.5, 0.75:0.25\n"},
        {"pde-lipschitz",
         "problem = benchmark_reflected_mf\nsteps = 40\nparticles = 20000\npde_intervals = 100\n"},
        {"reflection-invariants",
         "problem = benchmark_reflected_mf\nsteps = 50\nparticles = 20000\nbasis = piecewise\ndegree = 2\nbins = 10\n"},
        {"zero-driver",
         "problem = benchmark_reflected_mf\nsteps = 50\nparticles = 20000\nbasis = piecewise\ndegree = 2\nbins = 10\n"},
        {"oracle", "problem = example31\n"},
        {"validate-problem", "problem = benchmark_reflected_mf\nsteps = 50\nparticles = 10000\n"},
    };
    return d;
}

struct Line {
    std::size_t number;
    std::string key;
    std::string value;
};

inline std::vector<Line> tokenize(const std::string& text, std::vector<ConfigError>& errors) {
    std::vector<Line> lines;
    std::istringstream in(text);
    std::string raw;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            errors.push_back({number, "", "expected 'key = value', got '" + body + "'"});
            continue;
        }
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) {
            errors.push_back({number, "", "missing key before '='"});
            continue;
        }
        lines.push_back({number, key, trim(body.substr(eq + 1))});
    }
    return lines;
}

inline void apply_text(const std::string& text, ExperimentConfig& cfg) {
    std::vector<ConfigError> errors;
    for (const auto& l : tokenize(text, errors)) {
        const std::string err = key_table().at(l.key)(l.value, cfg);
        if (!err.empty()) throw std::logic_error("built-in defaults rejected: " + l.key + ": " + err);
    }
}

inline std::string env_name(const std::string& key) {
    std::string s = "RMFBSDE_";
    for (char ch : key) s += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

}  // namespace detail

/**
 * Parses and validates a config. All problems are reported together: unknown
 * keys, duplicates (with both line numbers), type mismatches, constraint
 * violations and a missing `experiment`.
 *
 * @param env  lookup for environment overrides (nullptr disables them)
 */
inline ParseResult parse_config(const std::string& text,
                                const std::function<const char*(const char*)>& env = nullptr) {
    ParseResult res;
    const auto lines = detail::tokenize(text, res.errors);
    std::map<std::string, std::size_t> first_line;
    std::vector<const detail::Line*> accepted;
    for (const auto& l : lines) {
        if (!detail::key_table().count(l.key)) {
            res.errors.push_back({l.number, l.key, "unknown key"});
            continue;
        }
        const auto [it, inserted] = first_line.emplace(l.key, l.number);
        if (!inserted) {
            res.errors.push_back({l.number, l.key,
                                  "duplicate key (lines " + std::to_string(it->second) + " and " +
                                      std::to_string(l.number) + ")"});
            continue;
        }
        accepted.push_back(&l);
    }

    // The experiment name selects the defaults, so it is resolved first.
    std::string experiment;
    for (const auto* l : accepted) {
        if (l->key == "experiment") experiment = l->value;
    }
    if (env) {
        if (const char* e = env(detail::env_name("experiment").c_str())) experiment = e;
    }
    if (experiment.empty() && !first_line.count("experiment")) {
        res.errors.push_back({0, "experiment", "missing required key"});
    } else {
        const std::string err = detail::key_table().at("experiment")(experiment, res.config);
        if (!err.empty()) {
            const std::size_t ln = first_line.count("experiment") ? first_line.at("experiment") : 0;
            res.errors.push_back({ln, "experiment", err});
        } else {
            detail::apply_text(detail::experiment_defaults().at(experiment), res.config);
        }
    }

    for (const auto* l : accepted) {
        if (l->key == "experiment") continue;
        const std::string err = detail::key_table().at(l->key)(l->value, res.config);
        if (!err.empty()) res.errors.push_back({l->number, l->key, err});
    }
    if (env) {
        for (const auto& [key, setter] : detail::key_table()) {
            if (key == "experiment") continue;
            const std::string name = detail::env_name(key);
            if (const char* v = env(name.c_str())) {
                const std::string err = setter(detail::trim(v), res.config);
                if (!err.empty()) res.errors.push_back({0, key, "from " + name + ": " + err});
            }
        }
    }
    if (res.config.experiment == "pde-compare" && res.config.probes.empty()) {
        res.errors.push_back({0, "probes", "pde-compare needs at least one probe"});
    }
    return res;
}

}  // namespace rmf::harness

#endif  // RMFBSDE_HARNESS_CONFIG_HPP
