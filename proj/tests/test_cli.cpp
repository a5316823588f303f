#include "doctest.h"

#include "toa/config.hpp"
#include "toa/errors.hpp"
#include "toa/runner.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

using namespace toa;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
# free Gaussian
[grid]
x_min = -64
x_max = 64
n = 2048

[state]
type = gaussian
x0 = -10
p0 = 2
delta = 1

[arrival]
X = 0
T = 15
methods = flux, kijowski
)";

struct TempDir {
    fs::path path;
    TempDir() {
        static int k = 0;
        path = fs::temp_directory_path() / ("toa_cli_" + std::to_string(::getpid()) + "_" + std::to_string(k++));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        fs::create_directories(path);
        std::ofstream(path / name) << text;
        return path / name;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

std::map<std::string, std::string> read_report(const fs::path& p) {
    std::map<std::string, std::string> m;
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
        const auto c = line.find(',');
        m[line.substr(0, c)] = line.substr(c + 1);
    }
    return m;
}

std::string error_of(const std::string& text, const std::map<std::string, std::string>& ov = {}) {
    try {
        parse_config(text, ov);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("ini grammar") {
    std::vector<std::string> errs;
    auto doc = parse_ini("; lead\n[a]\nx = 1 # trailing\ny=  p, q ,r \n\n[b]\nz = yes\n", errs);
    CHECK(errs.empty());
    CHECK(doc.sections["a"]["x"].first == "1");
    CHECK(doc.sections["a"]["y"].first == "p, q ,r");
    CHECK(doc.sections["b"]["z"].second == 7);

    parse_ini("x = 1\n[a\n[a]\nnovalue\nk=1\nk=2\n", errs);
    CHECK(errs.size() == 4);
}

TEST_CASE("config defaults and typed values") {
    auto c = parse_config(kMinimal);
    CHECK(c.n == 2048);
    CHECK(c.gaussian.p0 == 2);
    CHECK(c.methods.size() == 2);
    CHECK(!c.seed);
    CHECK(c.effective_seed() == kDefaultSeed);
    CHECK(c.diffusion_spec.seed == kDefaultSeed);

    auto o = parse_config(kMinimal, {{"classical.seed", "42"}, {"classical.enabled", "on"}, {"output.format", "json"}});
    CHECK(o.effective_seed() == 42);
    CHECK(o.classical);
    CHECK(o.format == "json");
}

TEST_CASE("validation lists every problem") {
    const std::string text = std::string(kMinimal) + "[phasespace]\nkernels = weyl, moyal\n[bogus]\na = 1\n";
    const auto msg = error_of(text, {{"arrival.methods", "flux, teleport"}, {"grid.n", "1000"}, {"arrival.T", "x"}});
    CHECK(msg.find("'teleport'") != std::string::npos);
    CHECK(msg.find("'moyal'") != std::string::npos);
    CHECK(msg.find("grid.n") != std::string::npos);
    CHECK(msg.find("arrival.T") != std::string::npos);
    CHECK(msg.find("[bogus]") != std::string::npos);
    CHECK(msg.find("5 problem(s)") != std::string::npos);

    CHECK(error_of(kMinimal, {{"state.typo", "1"}}).find("unknown key") != std::string::npos);
    // module preconditions surface as config errors before anything runs
    CHECK(error_of(kMinimal, {{"state.x0", "-63"}}).find("state") != std::string::npos);
}

TEST_CASE("method and potential compatibility") {
    const std::map<std::string, std::string> absorber{{"potential.type", "absorber"}, {"potential.a", "0"},
                                                      {"potential.b", "8"}, {"potential.V0", "3"}};
    CHECK(error_of(kMinimal, absorber).find("'kijowski' is defined for free motion") != std::string::npos);
    auto ok = absorber;
    ok["arrival.methods"] = "flux, cap_rate";
    CHECK(error_of(kMinimal, ok).empty());
    CHECK(error_of(kMinimal, {{"arrival.methods", "cap_rate"}}).find("absorber") != std::string::npos);
    CHECK(error_of(kMinimal, {{"arrival.methods", "flux, flux"}}).find("twice") != std::string::npos);
}

TEST_CASE("format_number round-trips") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> e(-300, 300), m(-1, 1);
    for (int i = 0; i < 20000; ++i) {
        const double x = m(rng) * std::pow(10.0, e(rng));
        CHECK(std::stod(format_number(x)) == x);
    }
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1e-4) == "1e-04");
}

TEST_CASE("minimal run writes distributions and a passing report") {
    TempDir d;
    const auto cfg = d.write("m.ini", kMinimal);
    std::ostringstream log, err;
    REQUIRE(run_command(cfg.string(), {{"output.dir", (d.path / "out").string()}}, log, err) == 0);
    CHECK(log.str().find("seed 20240611 (default)") != std::string::npos);
    CHECK(fs::exists(d.path / "out" / "flux.csv"));
    CHECK(fs::exists(d.path / "out" / "kijowski.csv"));
    CHECK(!fs::exists(d.path / "out" / "norm_series.csv"));
    CHECK(slurp(d.path / "out" / "flux.csv").rfind("t,density,cumulative\n", 0) == 0);

    auto r = read_report(d.path / "out" / "report.csv");
    CHECK(r["seed"] == "20240611");
    CHECK(r["seed_source"] == "default");
    CHECK(r["check.first_moment_identity.pass"] == "true");
    CHECK(r["check.closed_form_flux.pass"] == "true");
    CHECK(r.count("l1.flux.kijowski") == 1);
    // every enabled method exactly once
    CHECK(r.count("method.flux.first_moment") == 1);
    CHECK(r.count("method.kijowski.first_moment") == 1);

    // cumulative column ends at the captured integral
    std::ifstream f(d.path / "out" / "flux.csv");
    std::string line, last;
    while (std::getline(f, line)) last = line;
    const double cum = std::stod(last.substr(last.rfind(',') + 1));
    CHECK(cum == doctest::Approx(std::stod(r["method.flux.captured"])).epsilon(1e-12));
}

TEST_CASE("invalid config writes nothing") {
    TempDir d;
    const auto cfg = d.write("bad.ini", std::string(kMinimal) + "[output]\ndir = " + (d.path / "out").string() + "\n");
    std::ostringstream log, err;
    CHECK(run_command(cfg.string(), {{"arrival.methods", "unknown"}}, log, err) == 1);
    CHECK(err.str().find("'unknown'") != std::string::npos);
    CHECK(!fs::exists(d.path / "out"));
    CHECK(run_command((d.path / "missing.ini").string(), {}, log, err) == 3);
}

TEST_CASE("module failures name the section and exit 2") {
    TempDir d;
    const auto cfg = d.write("slow.ini", kMinimal);
    std::ostringstream log, err;
    // too much weight near p = 0 for the Kijowski distribution
    const int rc = run_command(cfg.string(), {{"state.p0", "0.3"}, {"output.dir", (d.path / "out").string()}}, log, err);
    CHECK(rc == 2);
    CHECK(err.str().find("[arrival.kijowski]") != std::string::npos);
    CHECK(!fs::exists(d.path / "out"));
}

TEST_CASE("repeated runs are identical and JSON mirrors CSV") {
    TempDir d;
    const auto cfg = d.write("c.ini", std::string(kMinimal) + "[classical]\nenabled = true\nn_samples = 20000\n");
    std::ostringstream log, err;
    REQUIRE(run_command(cfg.string(), {{"output.dir", (d.path / "a").string()}}, log, err) == 0);
    REQUIRE(run_command(cfg.string(), {{"output.dir", (d.path / "b").string()}}, log, err) == 0);
    CHECK(slurp(d.path / "a" / "report.csv") == slurp(d.path / "b" / "report.csv"));
    CHECK(slurp(d.path / "a" / "first_passage.csv") == slurp(d.path / "b" / "first_passage.csv"));
    CHECK(slurp(d.path / "a" / "first_passage.csv").rfind("t,density,cumulative,sigma\n", 0) == 0);

    // a different seed moves the Monte Carlo numbers only
    REQUIRE(run_command(cfg.string(), {{"output.dir", (d.path / "c").string()}, {"classical.seed", "9"}}, log, err) == 0);
    auto a = read_report(d.path / "a" / "report.csv");
    auto c = read_report(d.path / "c" / "report.csv");
    CHECK(a["method.flux.first_moment"] == c["method.flux.first_moment"]);
    CHECK(a["classical.mean_passage"] != c["classical.mean_passage"]);

    REQUIRE(run_command(cfg.string(), {{"output.dir", (d.path / "j").string()}, {"output.format", "json"}}, log, err) == 0);
    const auto j = nlohmann::json::parse(slurp(d.path / "j" / "report.json"));
    CHECK(j.size() == a.size());
    for (const auto& [k, v] : a) {
        REQUIRE(j.contains(k));
        if (j[k].is_number_float()) CHECK(j[k].get<double>() == std::stod(v));
        else if (j[k].is_boolean()) CHECK((j[k].get<bool>() ? "true" : "false") == v);
        else if (j[k].is_number_unsigned()) CHECK(std::to_string(j[k].get<std::uint64_t>()) == v);
        else CHECK(j[k].get<std::string>() == v);
    }
    const auto fj = nlohmann::json::parse(slurp(d.path / "j" / "flux.json"));
    CHECK(fj["t"].size() == fj["density"].size());
    CHECK(fj["cumulative"].size() == fj["density"].size());
}

TEST_CASE("absorber run writes the norm series; scan writes one row per value") {
    TempDir d;
    const std::string text = R"(
[grid]
x_min = -128
x_max = 128
n = 2048
[state]
x0 = -56
p0 = 6
delta = 8
[potential]
type = absorber
a = 0
b = 8
V0 = 8
dt = 0.002
output_every = 5
[arrival]
X = 0
T = 20
methods = cap_rate
)";
    const auto cfg = d.write("cap.ini", text);
    std::ostringstream log, err;
    REQUIRE(run_command(cfg.string(), {{"output.dir", (d.path / "cap").string()}}, log, err) == 0);
    CHECK(fs::exists(d.path / "cap" / "norm_series.csv"));
    auto r = read_report(d.path / "cap" / "report.csv");
    CHECK(r["check.dwell_identity.pass"] == "true");
    CHECK(r["check.cap_flux_l1.pass"] == "true");

    REQUIRE(scan_command(cfg.string(), "potential.V0", {"3", "8"}, {{"output.dir", (d.path / "scan").string()}}, log,
                         err) == 0);
    std::ifstream f(d.path / "scan" / "scan_potential_V0.csv");
    std::string header, row;
    std::getline(f, header);
    CHECK(header.rfind("potential.V0,seed,", 0) == 0);
    int rows = 0;
    while (std::getline(f, row)) ++rows;
    CHECK(rows == 2);

    // every scan point is validated first
    CHECK(scan_command(cfg.string(), "potential.V0", {"8", "-1"}, {{"output.dir", (d.path / "scan2").string()}}, log,
                       err) == 1);
    CHECK(!fs::exists(d.path / "scan2"));
}

TEST_CASE("toa-lab binary: usage and exit codes") {
    const std::string bin = TOA_LAB_PATH;
    CHECK(std::system((bin + " > /dev/null").c_str()) == 0);
    CHECK(WEXITSTATUS(std::system((bin + " run --config /nonexistent.ini 2> /dev/null").c_str())) == 3);
}
