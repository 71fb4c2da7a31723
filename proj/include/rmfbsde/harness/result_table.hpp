/**
 * @file result_table.hpp
 * @brief CSV result tables with a schema header, and the per-run summary file.
 *
 * Table bytes depend only on (config, seed, build); wall-clock time goes to
 * summary.txt alone so reruns produce identical CSVs.
 */

#ifndef RMFBSDE_HARNESS_RESULT_TABLE_HPP
#define RMFBSDE_HARNESS_RESULT_TABLE_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#ifndef RMFBSDE_BUILD_ID
#define RMFBSDE_BUILD_ID "dev"
#endif

namespace rmf::harness {

inline constexpr int kSchemaVersion = 1;

inline std::string build_id() { return RMFBSDE_BUILD_ID; }

using Cell = std::variant<double, long long, std::string>;

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isnan(*d)) return "nan";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

class ResultTable {
public:
    ResultTable(std::string name, std::vector<std::string> columns)
        : name_(std::move(name)), columns_(std::move(columns)) {}

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }
    const std::vector<std::vector<Cell>>& rows() const noexcept { return rows_; }

    void add(std::vector<Cell> row) {
        if (row.size() != columns_.size()) {
            throw std::invalid_argument("ResultTable '" + name_ + "': row has " + std::to_string(row.size()) +
                                        " cells, expected " + std::to_string(columns_.size()));
        }
        rows_.push_back(std::move(row));
    }

    void write_csv(std::ostream& os, const std::string& experiment, std::uint64_t seed) const {
        os << "# schema=" << kSchemaVersion << " experiment=" << experiment << " seed=" << seed
           << " build=" << build_id() << '\n';
        for (std::size_t c = 0; c < columns_.size(); ++c) os << (c ? "," : "") << columns_[c];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format_cell(r[c]);
            os << '\n';
        }
    }

    std::string to_csv(const std::string& experiment, std::uint64_t seed) const {
        std::ostringstream os;
        write_csv(os, experiment, seed);
        return os.str();
    }

private:
    std::string name_;
    std::vector<std::string> columns_;
    std::vector<std::vector<Cell>> rows_;
};

/// One asserted invariant of an experiment run.
struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    std::string relation;  ///< how value relates to bound, e.g. "<=" or ">="
    bool passed = false;
};

inline Check check_le(std::string name, double value, double bound) {
    return {std::move(name), value, bound, "<=", value <= bound};
}
inline Check check_ge(std::string name, double value, double bound) {
    return {std::move(name), value, bound, ">=", value >= bound};
}
inline Check check_true(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, 1.0, "==", ok}; }

struct ExperimentResult {
    std::string experiment;
    std::uint64_t seed = 0;
    std::vector<ResultTable> tables;
    std::vector<Check> checks;
    std::vector<std::string> notes;
    double wall_seconds = 0.0;

    bool passed() const {
        for (const auto& c : checks) {
            if (!c.passed) return false;
        }
        return true;
    }

    ResultTable checks_table() const {
        ResultTable t("checks", {"check", "value", "relation", "bound", "passed"});
        for (const auto& c : checks) {
            t.add({c.name, c.value, c.relation, c.bound, std::string(c.passed ? "true" : "false")});
        }
        return t;
    }

    std::string summary() const {
        std::ostringstream os;
        os << "experiment: " << experiment << "\nseed: " << seed << "\nbuild: " << build_id()
           << "\nwall_seconds: " << wall_seconds << "\nstatus: " << (passed() ? "PASS" : "FAIL") << '\n';
        for (const auto& c : checks) {
            os << (c.passed ? "  ok   " : "  FAIL ") << c.name << ": " << format_cell(c.value) << ' ' << c.relation
               << ' ' << format_cell(c.bound) << '\n';
        }
        for (const auto& n : notes) os << "note: " << n << '\n';
        return os.str();
    }

    /// Writes <dir>/<table>.csv for every table plus checks.csv and summary.txt.
    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        auto put = [&](const ResultTable& t) {
            std::ofstream f(dir / (t.name() + ".csv"), std::ios::binary);
            if (!f) throw std::runtime_error("cannot write " + (dir / (t.name() + ".csv")).string());
            t.write_csv(f, experiment, seed);
        };
        for (const auto& t : tables) put(t);
        put(checks_table());
        std::ofstream s(dir / "summary.txt");
        if (!s) throw std::runtime_error("cannot write " + (dir / "summary.txt").string());
        s << summary();
    }
};

}  // namespace rmf::harness

#endif  // RMFBSDE_HARNESS_RESULT_TABLE_HPP
