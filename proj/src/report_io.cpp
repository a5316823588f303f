#include "toa/runner.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace toa {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

std::string ReportRow::text() const {
    if (const auto* d = std::get_if<double>(&value)) return format_number(*d);
    if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
    if (const auto* u = std::get_if<std::uint64_t>(&value)) return std::to_string(*u);
    return std::get<std::string>(value);
}

std::vector<ReportRow> report_rows(const ComparisonReport& r) {
    std::vector<ReportRow> rows;
    rows.push_back({"seed", r.seed});
    rows.push_back({"seed_source", std::string(r.default_seed ? "default" : "config")});
    for (const auto& m : r.methods) {
        const std::string k = std::string("method.") + method_name(m.method);
        rows.push_back({k + ".captured", m.captured});
        rows.push_back({k + ".first_moment", m.first.value});
        rows.push_back({k + ".first_tail", m.first.tail_mass});
        rows.push_back({k + ".first_converged", m.first.converged});
        rows.push_back({k + ".second_moment", m.second.value});
        rows.push_back({k + ".second_tail", m.second.tail_mass});
        rows.push_back({k + ".second_converged", m.second.converged});
    }
    for (const auto& d : r.distances)
        rows.push_back({std::string("l1.") + method_name(d.a) + "." + method_name(d.b), d.l1});
    for (const auto& c : r.checks) {
        rows.push_back({"check." + c.name + ".measured", c.measured});
        rows.push_back({"check." + c.name + (c.lower_bound ? ".minimum" : ".maximum"), c.required});
        rows.push_back({"check." + c.name + ".pass", c.pass});
    }
    for (const auto& [k, v] : r.extras) rows.push_back({k, v});
    return rows;
}

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    return f;
}

void finish(std::ofstream& f, const fs::path& p) {
    f.flush();
    if (!f) throw IoError("write failed for '" + p.string() + "'");
}

void write_distribution(const ArrivalDistribution& d, const std::string& name, const fs::path& dir,
                        const std::string& format) {
    const auto cum = d.cumulative();
    const bool mc = !d.sigma.empty();
    const fs::path p = dir / (name + "." + format);
    auto f = open_out(p);
    if (format == "csv") {
        f << "t,density,cumulative" << (mc ? ",sigma" : "") << "\n";
        for (std::size_t i = 0; i < d.times.size(); ++i) {
            f << format_number(d.times[i]) << ',' << format_number(d.density[i]) << ',' << format_number(cum[i]);
            if (mc) f << ',' << format_number(d.sigma[i]);
            f << '\n';
        }
    } else {
        ojson j;
        j["method"] = name;
        j["X"] = d.X;
        j["t"] = d.times;
        j["density"] = d.density;
        j["cumulative"] = cum;
        if (mc) j["sigma"] = d.sigma;
        f << j.dump(1) << '\n';
    }
    finish(f, p);
}

} // namespace

void write_outputs(const RunOutput& out, const ScenarioConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

    for (const auto& d : out.distributions) write_distribution(d, method_name(d.method), dir, cfg.format);
    for (const auto& d : out.auxiliary) write_distribution(d, d.metadata.at("name"), dir, cfg.format);

    if (!out.norm_series.empty()) {
        const fs::path p = dir / ("norm_series." + cfg.format);
        auto f = open_out(p);
        if (cfg.format == "csv") {
            f << "t,norm\n";
            for (std::size_t i = 0; i < out.norm_times.size(); ++i)
                f << format_number(out.norm_times[i]) << ',' << format_number(out.norm_series[i]) << '\n';
        } else {
            f << ojson{{"t", out.norm_times}, {"norm", out.norm_series}}.dump(1) << '\n';
        }
        finish(f, p);
    }

    const auto rows = report_rows(out.report);
    const fs::path p = dir / ("report." + cfg.format);
    auto f = open_out(p);
    if (cfg.format == "csv") {
        f << "key,value\n";
        for (const auto& r : rows) f << r.key << ',' << r.text() << '\n';
    } else {
        ojson j = ojson::object();
        for (const auto& r : rows) std::visit([&](const auto& v) { j[r.key] = v; }, r.value);
        f << j.dump(1) << '\n';
    }
    finish(f, p);
}

namespace {

int exit_code_of(const std::exception& e) {
    if (const auto* r = dynamic_cast<const RunError*>(&e)) return r->exit_code();
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    if (dynamic_cast<const IoError*>(&e)) return 3;
    return 2;
}

void print_checks(const ComparisonReport& r, std::ostream& log) {
    for (const auto& c : r.checks)
        log << (c.pass ? "  pass  " : "  FAIL  ") << c.name << ": " << format_number(c.measured)
            << (c.lower_bound ? " (need > " : " (need < ") << format_number(c.required) << ")\n";
}

} // namespace

int run_command(const std::string& config_path, const std::map<std::string, std::string>& overrides,
                std::ostream& log, std::ostream& err) {
    try {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot read config file '" + config_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        const ScenarioConfig cfg = parse_config(ss.str(), overrides);
        log << "seed " << cfg.effective_seed() << (cfg.seed ? "" : " (default)") << "\n";
        const RunOutput out = execute(cfg);
        write_outputs(out, cfg);
        print_checks(out.report, log);
        log << "wrote " << out.distributions.size() + out.auxiliary.size() << " distribution file(s) and report."
            << cfg.format << " to " << cfg.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return exit_code_of(e);
    }
}

int scan_command(const std::string& config_path, const std::string& key, const std::vector<std::string>& values,
                 const std::map<std::string, std::string>& overrides, std::ostream& log, std::ostream& err) {
    try {
        if (values.empty()) throw ConfigError("scan needs at least one value");
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot read config file '" + config_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        // every point is validated before anything runs
        std::vector<ScenarioConfig> points;
        for (const auto& v : values) {
            auto ov = overrides;
            ov[key] = v;
            try {
                points.push_back(parse_config(ss.str(), ov));
            } catch (const ConfigError& e) {
                throw ConfigError("scan point " + key + " = " + v + ": " + e.what());
            }
        }
        std::vector<std::string> columns;
        std::vector<std::map<std::string, std::string>> table;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto out = execute(points[i]);
            std::map<std::string, std::string> row;
            for (const auto& r : report_rows(out.report)) {
                if (std::find(columns.begin(), columns.end(), r.key) == columns.end()) columns.push_back(r.key);
                row[r.key] = r.text();
            }
            table.push_back(std::move(row));
            log << key << " = " << values[i] << (out.report.all_checks_pass() ? "  checks pass\n" : "  checks FAIL\n");
        }
        const fs::path dir(points.front().out_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
        std::string stem = key;
        std::replace(stem.begin(), stem.end(), '.', '_');
        const fs::path p = dir / ("scan_" + stem + ".csv");
        auto f = open_out(p);
        f << key;
        for (const auto& c : columns) f << ',' << c;
        f << '\n';
        for (std::size_t i = 0; i < table.size(); ++i) {
            f << values[i];
            for (const auto& c : columns) {
                auto it = table[i].find(c);
                f << ',' << (it == table[i].end() ? "" : it->second);
            }
            f << '\n';
        }
        finish(f, p);
        log << "wrote " << p.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return exit_code_of(e);
    }
}

} // namespace toa
