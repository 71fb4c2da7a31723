// Command-line runner for the named experiments.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmfbsde/errors.hpp"
#include "rmfbsde/harness/config.hpp"
#include "rmfbsde/harness/experiments.hpp"

namespace {

enum Exit { kPass = 0, kInvariantFailed = 1, kUsage = 2, kSolverFailure = 3 };

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string format = "json";
};

std::string experiment_list() {
    std::string s;
    for (const auto& n : rmf::harness::experiment_names()) s += "  " + n + "\n";
    return s;
}

nlohmann::json table_json(const rmf::harness::ResultTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows()) {
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t c = 0; c < r.size(); ++c) {
            std::visit([&](const auto& v) { row[t.columns()[c]] = v; }, r[c]);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

int execute(const std::string& command, const Options& o) {
    using namespace rmf::harness;
    std::string text;
    if (!o.config.empty()) {
        std::ifstream f(o.config);
        if (!f) {
            std::cerr << "error: cannot read config file '" << o.config << "'\n";
            return kUsage;
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    } else if (command == "run") {
        std::cerr << "error: 'run' needs --config\n";
        return kUsage;
    } else {
        text = "experiment = " + command + "\n";
    }

    ParseResult parsed = parse_config(text, [](const char* name) { return std::getenv(name); });
    if (!parsed.ok()) {
        std::cerr << "config errors" << (o.config.empty() ? "" : " in " + o.config) << ":\n";
        for (const auto& e : parsed.errors) std::cerr << "  " << e.describe() << '\n';
        return kUsage;
    }
    ExperimentConfig cfg = parsed.config;
    if (command != "run" && cfg.experiment != command) {
        std::cerr << "error: config names experiment '" << cfg.experiment << "' but subcommand is '" << command
                  << "'\n";
        return kUsage;
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;

    ExperimentResult res;
    try {
        res = run(cfg);
    } catch (const rmf::convergence_failure& e) {
        std::cerr << "solver failure: " << e.what() << "\nPicard gaps:";
        for (double g : e.gaps()) std::cerr << ' ' << g;
        std::cerr << '\n';
        return kSolverFailure;
    } catch (const rmf::numerical_blowup& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    if (cfg.experiment == "oracle") {
        const auto& t = res.tables.front();
        if (o.format == "csv") {
            t.write_csv(std::cout, cfg.experiment, cfg.seed);
        } else {
            nlohmann::json j = nlohmann::json::object();
            for (const auto& r : t.rows()) j[std::get<std::string>(r[0])] = std::get<double>(r[1]);
            std::cout << j.dump(2) << '\n';
        }
    }
    const std::string out = o.out.empty() ? "results/" + cfg.experiment : o.out;
    res.write(out);
    nlohmann::json summary{{"experiment", res.experiment}, {"seed", res.seed}, {"build", build_id()},
                           {"passed", res.passed()}, {"checks", table_json(res.checks_table())}};
    std::ofstream(std::filesystem::path(out) / "summary.json") << summary.dump(2) << '\n';
    if (cfg.experiment != "oracle") std::cout << res.summary();
    std::cerr << "results written to " << out << '\n';
    return res.passed() ? kPass : kInvariantFailed;
}

}  // namespace

int main(int argc, char** argv) {
    const auto& names = rmf::harness::experiment_names();
    if (argc > 1 && argv[1][0] != '-') {
        const std::string cmd = argv[1];
        if (cmd != "run" && std::find(names.begin(), names.end(), cmd) == names.end()) {
            std::cerr << "unknown experiment '" << cmd << "'; valid names:\n" << experiment_list() << "  run\n";
            return kUsage;
        }
    }

    CLI::App app{"Reflected mean-field BSDE solvers: named, seeded experiments"};
    app.require_subcommand(1);
    Options o;
    std::string chosen;
    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "flat key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--out", o.out, "output directory (default results/<experiment>)");
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        if (name == "oracle") {
            sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        }
        sub->callback([&chosen, name] { chosen = name; });
    };
    add("run", "run the experiment named in --config");
    for (const auto& n : names) add(n, "run the '" + n + "' experiment");
    app.footer("Environment: RMFBSDE_<KEY> overrides a config key (e.g. RMFBSDE_STEPS=100).\n"
               "Exit status: 0 all checks passed, 1 a check failed, 2 usage/config error, 3 solver failure.");

    CLI11_PARSE(app, argc, argv);
    return execute(chosen, o);
}
