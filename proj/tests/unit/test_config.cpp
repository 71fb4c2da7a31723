#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "rmfbsde/harness/config.hpp"

namespace rmf::harness {
namespace {

bool mentions(const ParseResult& r, const std::string& key, const std::string& fragment, std::size_t line = 0) {
    for (const auto& e : r.errors) {
        if (e.key == key && e.message.find(fragment) != std::string::npos && (line == 0 || e.line == line)) return true;
    }
    return false;
}

TEST(Config, MinimalFileTakesExperimentDefaults) {
    const auto r = parse_config("experiment = example31\n");
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config.problem, "example31");
    EXPECT_EQ(r.config.steps, 200u);
    EXPECT_EQ(r.config.particles, 100000u);
    EXPECT_EQ(r.config.basis().family, RegressionBasis::Family::piecewise_polynomial);
    EXPECT_EQ(r.config.seed, 2024u);
}

TEST(Config, ShippedExampleConfigsParse) {
    for (const char* name : {"minimal_example31.cfg", "quick_solve.cfg"}) {
        std::ifstream f(std::string(RMFBSDE_CONFIG_DIR) + "/examples/" + name);
        ASSERT_TRUE(f) << name;
        std::stringstream ss;
        ss << f.rdbuf();
        const auto r = parse_config(ss.str());
        EXPECT_TRUE(r.ok()) << name;
    }
}

TEST(Config, FileValuesOverrideDefaults) {
    const auto r = parse_config("# comment\n\nexperiment = solve   # trailing\nsteps = 7\ntheta = 0.5\nbasis = polynomial\n");
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config.steps, 7u);
    EXPECT_EQ(r.config.theta, 0.5);
    EXPECT_EQ(r.config.solver().basis.family, RegressionBasis::Family::polynomial);
    EXPECT_EQ(r.config.problem, "american_put");
}

TEST(Config, NegativeStepsIsConstraintError) {
    const auto r = parse_config("experiment = solve\nsteps = -1\n");
    EXPECT_FALSE(r.ok());
    EXPECT_TRUE(mentions(r, "steps", ">= 1", 2));
}

TEST(Config, DuplicateKeyNamesBothLines) {
    const auto r = parse_config("experiment = solve\nsteps = 5\nparticles = 10\nsteps = 6\n");
    EXPECT_TRUE(mentions(r, "steps", "lines 2 and 4", 4));
}

TEST(Config, UnknownKeyWithLine) {
    const auto r = parse_config("experiment = solve\nstepz = 5\n");
    EXPECT_TRUE(mentions(r, "stepz", "unknown key", 2));
}

TEST(Config, MissingExperiment) {
    const auto r = parse_config("steps = 5\n");
    EXPECT_TRUE(mentions(r, "experiment", "missing required key"));
}

TEST(Config, UnknownExperimentListsValidNames) {
    const auto r = parse_config("experiment = nonsense\n");
    EXPECT_TRUE(mentions(r, "experiment", "pde-compare", 1));
}

TEST(Config, TypeMismatch) {
    const auto r = parse_config("experiment = solve\nparticles = abc\ntheta = x\n");
    EXPECT_TRUE(mentions(r, "particles", "expected an integer", 2));
    EXPECT_TRUE(mentions(r, "theta", "expected a real number", 3));
}

TEST(Config, ReportsEveryErrorTogether) {
    const auto r = parse_config("experiment = solve\nsteps = 0\nfoo = 1\nrule = sideways\nsteps = 3\nno equals sign\n");
    EXPECT_GE(r.errors.size(), 5u);
    EXPECT_TRUE(mentions(r, "rule", "expected one of", 4));
    EXPECT_TRUE(mentions(r, "", "expected 'key = value'", 6));
}

TEST(Config, EnvironmentOverridesFile) {
    const std::map<std::string, std::string> env{{"RMFBSDE_STEPS", "9"}, {"RMFBSDE_SEED", "77"}};
    auto lookup = [&](const char* name) -> const char* {
        const auto it = env.find(name);
        return it == env.end() ? nullptr : it->second.c_str();
    };
    const auto r = parse_config("experiment = solve\nsteps = 5\n", lookup);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config.steps, 9u);
    EXPECT_EQ(r.config.seed, 77u);

    const std::map<std::string, std::string> bad{{"RMFBSDE_PARTICLES", "0"}};
    auto bad_lookup = [&](const char* name) -> const char* {
        const auto it = bad.find(name);
        return it == bad.end() ? nullptr : it->second.c_str();
    };
    const auto rb = parse_config("experiment = solve\n", bad_lookup);
    EXPECT_TRUE(mentions(rb, "particles", "from RMFBSDE_PARTICLES"));
}

TEST(Config, ListsAndProbes) {
    const auto r = parse_config("experiment = pde-compare\nprobes = 0:0.5, 0.25:-1\nn_list = 1, 10, 100\nN_list = 2, 4\n");
    ASSERT_TRUE(r.ok()) << r.errors.front().describe();
    ASSERT_EQ(r.config.probes.size(), 2u);
    EXPECT_EQ(r.config.probes[1].t, 0.25);
    EXPECT_EQ(r.config.probes[1].x, -1.0);
    EXPECT_EQ(r.config.n_list, (std::vector<double>{1, 10, 100}));
    EXPECT_EQ(r.config.interaction_sizes, (std::vector<std::size_t>{2, 4}));
}

TEST(Config, ErrorDescription) {
    const ConfigError e{3, "steps", "bad"};
    EXPECT_EQ(e.describe(), "line 3: 'steps': bad");
}

}  // namespace
}  // namespace rmf::harness
