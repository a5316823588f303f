#pragma once

#include "toa/config.hpp"
#include "toa/distribution.hpp"
#include "toa/errors.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace toa {

// A module failure tagged with the config section that triggered it.
class RunError : public Error {
public:
    RunError(std::string section, int exit_code, const std::string& what)
        : Error("RunError", "[" + section + "] " + what), section_(std::move(section)), code_(exit_code) {}
    const std::string& section() const noexcept { return section_; }
    int exit_code() const noexcept { return code_; }

private:
    std::string section_;
    int code_;
};

struct MethodSummary {
    Method method = Method::flux;
    double captured = 0.0;
    MomentReport first, second;
};

struct PairDistance {
    Method a, b;
    double l1 = 0.0;
};

struct IdentityCheck {
    std::string name;
    double measured = 0.0;
    double required = 0.0;
    bool lower_bound = false;  // pass when measured > required instead of <
    bool pass = false;
};

struct ComparisonReport {
    std::uint64_t seed = kDefaultSeed;
    bool default_seed = true;
    std::vector<MethodSummary> methods;
    std::vector<PairDistance> distances;
    std::vector<IdentityCheck> checks;
    // classical and phase-space scalars, keyed "section.name"
    std::vector<std::pair<std::string, double>> extras;

    bool all_checks_pass() const;
};

struct RunOutput {
    ComparisonReport report;
    std::vector<ArrivalDistribution> distributions;  // one per enabled method
    std::vector<ArrivalDistribution> auxiliary;      // diffusion histogram etc., named by metadata["name"]
    std::vector<double> norm_times, norm_series;     // absorber runs only
};

// Pure computation; nothing touches the filesystem.
RunOutput execute(const ScenarioConfig& cfg);

// Shortest decimal string that parses back to the same double.
std::string format_number(double x);

struct ReportRow {
    std::string key;
    std::variant<double, bool, std::string, std::uint64_t> value;
    std::string text() const;  // CSV cell
};

// Report rows in a fixed order; JSON and CSV are both built from these.
std::vector<ReportRow> report_rows(const ComparisonReport& r);

void write_outputs(const RunOutput& out, const ScenarioConfig& cfg);

// Exit codes: 0 ok, 1 config, 2 numerical, 3 I/O.
int run_command(const std::string& config_path, const std::map<std::string, std::string>& overrides,
                std::ostream& log, std::ostream& err);
int scan_command(const std::string& config_path, const std::string& key, const std::vector<std::string>& values,
                 const std::map<std::string, std::string>& overrides, std::ostream& log, std::ostream& err);

} // namespace toa
