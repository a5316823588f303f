#include "CLI11.hpp"
#include "support/acceptance.hpp"
#include "toa/runner.hpp"

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_values(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"toa-lab: time-of-arrival distributions for 1D scattering scenarios"};
    app.require_subcommand(0, 1);

    std::string config, out_dir, format, key, values;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "run one scenario config");
    run->add_option("--config", config, "scenario file")->required();
    run->add_option("--out-dir", out_dir, "output directory (overrides output.dir)");
    run->add_option("--seed", seed, "random seed (overrides classical.seed)");
    run->add_option("--format", format, "csv or json (overrides output.format)");

    auto* scan = app.add_subcommand("scan", "sweep one config key and write a table");
    scan->add_option("--config", config, "scenario file")->required();
    scan->add_option("--key", key, "section.key to vary")->required();
    scan->add_option("--values", values, "comma-separated values")->required();
    scan->add_option("--out-dir", out_dir, "output directory (overrides output.dir)");
    scan->add_option("--seed", seed, "random seed (overrides classical.seed)");

    auto* self = app.add_subcommand("selftest", "run the acceptance checks");
    std::string only, fault;
    self->add_option("--only", only, "comma-separated criterion numbers");
    self->add_option("--inject-fault", fault, "test hook: 'kernel' corrupts one quantization kernel")
        ->check(CLI::IsMember({"kernel"}));

    CLI11_PARSE(app, argc, argv);

    std::map<std::string, std::string> ov;
    if (!out_dir.empty()) ov["output.dir"] = out_dir;
    if (!format.empty()) ov["output.format"] = format;
    if (run->count("--seed") + scan->count("--seed") > 0) ov["classical.seed"] = std::to_string(seed);

    if (run->parsed()) return toa::run_command(config, ov, std::cout, std::cerr);
    if (scan->parsed()) return toa::scan_command(config, key, split_values(values), ov, std::cout, std::cerr);
    if (self->parsed()) {
        toa::acceptance::Options opt;
        opt.corrupt_kernel = fault == "kernel";
        for (const auto& s : split_values(only)) opt.only.push_back(std::stoi(s));
        const auto results = toa::acceptance::run_all(opt, std::cout);
        for (const auto& r : results)
            if (!r.pass) return 2;
        return 0;
    }
    std::cout << app.help();
    return 0;
}
