#pragma once

#include "toa/arrival.hpp"
#include "toa/distribution.hpp"
#include "toa/grid.hpp"
#include "toa/phase_space.hpp"
#include "toa/propagator.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toa {

// Raw sectioned key/value text: section -> key -> (value, line)
struct IniDocument {
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;
};

// Syntax errors are collected, not thrown one at a time.
IniDocument parse_ini(const std::string& text, std::vector<std::string>& errors);

constexpr std::uint64_t kDefaultSeed = 20240611;

struct ScenarioConfig {
    double x_min = -64, x_max = 64;
    std::size_t n = 2048;
    UnitSystem units;

    std::string state_type = "gaussian";  // gaussian | two_gaussian_momentum
    GaussianPacketSpec gaussian{-10, 2, 1};
    TwoComponentSpec two;                  // p1, p2, sigma1, sigma2, t_focus, p_cut
    double two_a = 0.6, two_phi = 1.5707963267948966;

    std::string potential_type = "none";   // none | barrier | absorber
    double barrier_V0 = 1, barrier_a = 0, barrier_b = 1, barrier_edge = 0.1;
    AbsorberRegion absorber{0, 8, 1, AbsorberShape::flat};
    double split_dt = 0.002;
    std::size_t output_every = 5;

    double X = 0, T = 15, dt_out = 0.05;
    std::vector<Method> methods{Method::flux, Method::kijowski};
    std::vector<double> chopping_dt{0.5};
    SupportPolicy pde_support = SupportPolicy::strict;
    double moment_tol = 1e-3;

    bool classical = false;
    std::size_t n_samples = 100000;
    std::optional<std::uint64_t> seed;
    bool right_movers_only = true;
    std::size_t bins = 60;
    bool diffusion = false;
    DiffusionSpec diffusion_spec;
    double renewal_x = -1;

    bool phasespace = false;
    std::vector<KernelSpec> kernels{KernelSpec::weyl(), KernelSpec::rivier(), KernelSpec::born_jordan()};
    double ps_p_min = 0.5;      // momentum cut of the arrival-time symbol
    double ps_eigen_time = 5.0;

    std::string out_dir = "toa_out";
    std::string format = "csv";

    std::uint64_t effective_seed() const { return seed.value_or(kDefaultSeed); }
    SpatialGrid grid() const { return SpatialGrid(x_min, x_max, n); }
};

// Parses and validates; every problem found is listed in one ConfigError.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& text, const std::map<std::string, std::string>& overrides = {});

} // namespace toa
