#include "toa/config.hpp"

#include "toa/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace toa {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Reads typed values out of the document and records every problem.
class Reader {
public:
    Reader(const IniDocument& doc, std::vector<std::string>& errors) : doc_(doc), errors_(errors) {}

    bool has_section(const std::string& sec) const { return doc_.sections.count(sec) > 0; }

    const std::string* raw(const std::string& sec, const std::string& key) {
        used_.insert(sec + "." + key);
        auto s = doc_.sections.find(sec);
        if (s == doc_.sections.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second.first;
    }

    void fail(const std::string& sec, const std::string& key, const std::string& msg) {
        int line = 0;
        auto s = doc_.sections.find(sec);
        if (s != doc_.sections.end()) {
            auto k = s->second.find(key);
            if (k != s->second.end()) line = k->second.second;
        }
        std::string where = sec + "." + key;
        if (line > 0) where += " (line " + std::to_string(line) + ")";
        errors_.push_back(where + ": " + msg);
    }

    void real(const std::string& sec, const std::string& key, double& out) {
        const auto* v = raw(sec, key);
        if (!v) return;
        double x = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
        if (ec != std::errc() || p != v->data() + v->size() || !std::isfinite(x))
            fail(sec, key, "expected a number, got '" + *v + "'");
        else
            out = x;
    }

    template <class U>
    void integer(const std::string& sec, const std::string& key, U& out) {
        const auto* v = raw(sec, key);
        if (!v) return;
        U x = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
        if (ec != std::errc() || p != v->data() + v->size())
            fail(sec, key, "expected a nonnegative integer, got '" + *v + "'");
        else
            out = x;
    }

    void boolean(const std::string& sec, const std::string& key, bool& out) {
        const auto* v = raw(sec, key);
        if (!v) return;
        std::string s = *v;
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s == "true" || s == "yes" || s == "on" || s == "1")
            out = true;
        else if (s == "false" || s == "no" || s == "off" || s == "0")
            out = false;
        else
            fail(sec, key, "expected true or false, got '" + *v + "'");
    }

    void text(const std::string& sec, const std::string& key, std::string& out) {
        if (const auto* v = raw(sec, key)) out = *v;
    }

    void reals(const std::string& sec, const std::string& key, std::vector<double>& out) {
        const auto* v = raw(sec, key);
        if (!v) return;
        std::vector<double> xs;
        for (const auto& item : split_list(*v)) {
            double x = 0;
            auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
            if (ec != std::errc() || p != item.data() + item.size()) {
                fail(sec, key, "expected a list of numbers, got '" + item + "'");
                return;
            }
            xs.push_back(x);
        }
        out = xs;
    }

    std::vector<std::string> list(const std::string& sec, const std::string& key) {
        const auto* v = raw(sec, key);
        return v ? split_list(*v) : std::vector<std::string>{};
    }

    void report_unknown() {
        for (const auto& [sec, keys] : doc_.sections)
            for (const auto& [key, val] : keys)
                if (!used_.count(sec + "." + key)) {
                    if (!known_sections().count(sec))
                        errors_.push_back("[" + sec + "] (line " + std::to_string(val.second) + "): unknown section");
                    else
                        fail(sec, key, "unknown key");
                }
    }

    static const std::set<std::string>& known_sections() {
        static const std::set<std::string> s{"grid", "units", "state", "potential", "arrival",
                                             "classical", "phasespace", "output"};
        return s;
    }

private:
    const IniDocument& doc_;
    std::vector<std::string>& errors_;
    std::set<std::string> used_;
};

} // namespace

IniDocument parse_ini(const std::string& text, std::vector<std::string>& errors) {
    IniDocument doc;
    std::stringstream ss(text);
    std::string line, section;
    int no = 0;
    while (std::getline(ss, line)) {
        ++no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back("line " + std::to_string(no) + ": malformed section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            doc.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(no) + ": expected key = value");
            continue;
        }
        if (section.empty()) {
            errors.push_back("line " + std::to_string(no) + ": key outside any section");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        if (doc.sections[section].count(key))
            errors.push_back("line " + std::to_string(no) + ": duplicate key " + section + "." + key);
        doc.sections[section][key] = {trim(line.substr(eq + 1)), no};
    }
    return doc;
}

ScenarioConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
    std::vector<std::string> errors;
    IniDocument doc = parse_ini(text, errors);
    for (const auto& [k, v] : overrides) {
        const auto dot = k.find('.');
        if (dot == std::string::npos) {
            errors.push_back("override '" + k + "': expected section.key");
            continue;
        }
        doc.sections[k.substr(0, dot)][k.substr(dot + 1)] = {v, 0};
    }
    Reader r(doc, errors);
    ScenarioConfig c;

    r.real("grid", "x_min", c.x_min);
    r.real("grid", "x_max", c.x_max);
    r.integer("grid", "n", c.n);
    r.real("units", "hbar", c.units.hbar);
    r.real("units", "mass", c.units.mass);

    r.text("state", "type", c.state_type);
    r.real("state", "x0", c.gaussian.x0);
    r.real("state", "p0", c.gaussian.p0);
    r.real("state", "delta", c.gaussian.delta);
    r.real("state", "p1", c.two.p1);
    r.real("state", "p2", c.two.p2);
    r.real("state", "sigma1", c.two.sigma1);
    r.real("state", "sigma2", c.two.sigma2);
    r.real("state", "a", c.two_a);
    r.real("state", "phi", c.two_phi);
    r.real("state", "t_focus", c.two.t_focus);
    r.real("state", "p_cut", c.two.p_cut);

    r.text("potential", "type", c.potential_type);
    r.real("potential", "V0", c.barrier_V0);
    r.real("potential", "a", c.barrier_a);
    r.real("potential", "b", c.barrier_b);
    r.real("potential", "edge", c.barrier_edge);
    std::string shape = "flat";
    r.text("potential", "shape", shape);
    r.real("potential", "dt", c.split_dt);
    r.integer("potential", "output_every", c.output_every);

    r.real("arrival", "X", c.X);
    r.real("arrival", "T", c.T);
    r.real("arrival", "dt_out", c.dt_out);
    if (const auto* m = r.raw("arrival", "methods")) {
        c.methods.clear();
        for (const auto& tag : split_list(*m)) {
            const auto mm = method_from_name(tag);
            if (!mm)
                r.fail("arrival", "methods", "unknown method tag '" + tag + "'");
            else if (std::find(c.methods.begin(), c.methods.end(), *mm) != c.methods.end())
                r.fail("arrival", "methods", "method '" + tag + "' listed twice");
            else
                c.methods.push_back(*mm);
        }
        if (c.methods.empty()) r.fail("arrival", "methods", "no methods listed");
    }
    r.reals("arrival", "chopping_dt", c.chopping_dt);
    std::string support = "strict";
    r.text("arrival", "pde_support", support);
    r.real("arrival", "moment_tol", c.moment_tol);

    r.boolean("classical", "enabled", c.classical);
    r.integer("classical", "n_samples", c.n_samples);
    if (r.raw("classical", "seed")) {
        std::uint64_t s = 0;
        r.integer("classical", "seed", s);
        c.seed = s;
    }
    r.boolean("classical", "right_movers_only", c.right_movers_only);
    r.integer("classical", "bins", c.bins);
    r.boolean("classical", "diffusion", c.diffusion);
    r.real("classical", "D", c.diffusion_spec.D);
    r.real("classical", "diffusion_x0", c.diffusion_spec.x0);
    r.real("classical", "diffusion_X", c.diffusion_spec.X);
    r.real("classical", "diffusion_dt", c.diffusion_spec.dt);
    r.real("classical", "diffusion_T", c.diffusion_spec.T);
    r.real("classical", "renewal_x", c.renewal_x);

    r.boolean("phasespace", "enabled", c.phasespace);
    if (r.raw("phasespace", "kernels")) {
        c.kernels.clear();
        for (const auto& tag : r.list("phasespace", "kernels")) {
            try {
                c.kernels.push_back(kernel_from_name(tag));
            } catch (const ConfigError&) {
                r.fail("phasespace", "kernels", "unknown kernel tag '" + tag + "'");
            }
        }
    }

    r.real("phasespace", "p_min", c.ps_p_min);
    r.real("phasespace", "eigen_time", c.ps_eigen_time);

    r.text("output", "dir", c.out_dir);
    r.text("output", "format", c.format);
    r.report_unknown();

    // ---- semantic checks, all collected ----
    auto bad = [&](const std::string& where, const std::string& msg) { errors.push_back(where + ": " + msg); };
    if (!(c.x_min < c.x_max)) bad("grid", "x_min must be below x_max");
    if (!is_power_of_two(c.n) || c.n < 16) bad("grid.n", "must be a power of two >= 16");
    if (!(c.units.hbar > 0) || !(c.units.mass > 0)) bad("units", "hbar and mass must be positive");
    if (c.state_type != "gaussian" && c.state_type != "two_gaussian_momentum")
        bad("state.type", "expected gaussian or two_gaussian_momentum, got '" + c.state_type + "'");
    if (c.state_type == "gaussian" && !(c.gaussian.delta > 0)) bad("state.delta", "must be positive");
    if (c.potential_type != "none" && c.potential_type != "barrier" && c.potential_type != "absorber")
        bad("potential.type", "expected none, barrier or absorber, got '" + c.potential_type + "'");
    if (shape == "flat")
        c.absorber.shape = AbsorberShape::flat;
    else if (shape == "linear_ramp")
        c.absorber.shape = AbsorberShape::linear_ramp;
    else
        bad("potential.shape", "expected flat or linear_ramp");
    if (c.potential_type == "absorber") {
        c.absorber.a = c.barrier_a;
        c.absorber.b = c.barrier_b;
        c.absorber.V0 = c.barrier_V0;
        if (!(c.absorber.b > c.absorber.a)) bad("potential", "absorber needs b > a");
        if (!(c.absorber.V0 > 0)) bad("potential.V0", "absorber strength must be positive");
    }
    if (c.potential_type == "barrier" && !(c.barrier_b > c.barrier_a && c.barrier_edge > 0))
        bad("potential", "barrier needs b > a and edge > 0");
    if (!(c.split_dt > 0)) bad("potential.dt", "must be positive");
    if (c.output_every == 0) bad("potential.output_every", "must be >= 1");
    if (!(c.T > 0)) bad("arrival.T", "must be positive");
    if (!(c.dt_out > 0) || c.dt_out > c.T) bad("arrival.dt_out", "must lie in (0, T]");
    if (support == "strict")
        c.pde_support = SupportPolicy::strict;
    else if (support == "full_line")
        c.pde_support = SupportPolicy::full_line;
    else
        bad("arrival.pde_support", "expected strict or full_line");
    for (double d : c.chopping_dt)
        if (!(d > 0)) bad("arrival.chopping_dt", "cut intervals must be positive");
    if (c.chopping_dt.empty()) bad("arrival.chopping_dt", "at least one cut interval");
    const bool free_motion = c.potential_type == "none";
    for (Method m : c.methods) {
        const std::string tag = method_name(m);
        if (!free_motion && (m == Method::kijowski || m == Method::chopping || m == Method::pde_amp ||
                             m == Method::presence))
            bad("arrival.methods", "'" + tag + "' is defined for free motion; set potential.type = none");
        if (m == Method::cap_rate && c.potential_type != "absorber")
            bad("arrival.methods", "'cap_rate' needs potential.type = absorber");
        if (m == Method::first_passage)
            bad("arrival.methods", "'first_passage' is produced by the [classical] section, not listed as a method");
    }
    if (c.classical) {
        if (c.n_samples == 0) bad("classical.n_samples", "must be >= 1");
        if (c.bins == 0) bad("classical.bins", "must be >= 1");
        if (c.state_type != "gaussian") bad("classical", "classical ensembles are built from a gaussian state");
        if (c.potential_type == "absorber") bad("classical", "classical trajectories do not support absorbers");
        if (c.diffusion) {
            const auto& d = c.diffusion_spec;
            if (!(d.D > 0) || !(d.dt > 0) || !(d.T > 0) || !(d.x0 < d.X))
                bad("classical", "diffusion needs D > 0, diffusion_dt > 0, diffusion_T > 0, diffusion_x0 < diffusion_X");
            if (!(c.renewal_x < d.X)) bad("classical.renewal_x", "must lie below diffusion_X");
        }
    }
    if (c.phasespace) {
        if (!(c.ps_p_min > 0)) bad("phasespace.p_min", "must be positive");
        if (c.kernels.empty()) bad("phasespace.kernels", "at least one kernel");
        if (c.potential_type != "none") bad("phasespace", "the operator checks assume free motion");
    }
    if (c.format != "csv" && c.format != "json") bad("output.format", "expected csv or json");
    if (c.out_dir.empty()) bad("output.dir", "must not be empty");

    // module preconditions on grid and state
    if (errors.empty()) {
        try {
            const SpatialGrid g = c.grid();
            if (c.state_type == "gaussian")
                (void)make_gaussian(c.gaussian, g, c.units);
            else
                (void)two_component_state(g, c.units, c.two, c.X, c.two_a, c.two_phi);
            if (!(c.X > c.x_min && c.X < c.x_max)) bad("arrival.X", "must lie inside the grid");
        } catch (const std::exception& e) {
            bad("state", e.what());
        }
    }
    c.diffusion_spec.seed = c.effective_seed();
    if (!errors.empty()) {
        std::string msg = std::to_string(errors.size()) + " problem(s) in the configuration:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace toa
