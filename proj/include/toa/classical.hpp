#pragma once

#include "toa/distribution.hpp"
#include "toa/grid.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace toa {

// Stateless counter-based generator: every draw is a hash of (seed, stream, counter),
// so sample i sees the same numbers whatever order or thread it runs on.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

    double uniform(std::uint64_t counter) const {  // in (0,1)
        return (static_cast<double>(mix(key_ + counter) >> 11) + 0.5) * 0x1.0p-53;
    }
    // standard normal pair from counters 2c, 2c+1 (Box-Muller)
    std::pair<double, double> normal_pair(std::uint64_t c) const;
    double normal(std::uint64_t c) const { return normal_pair(c).first; }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
};

struct PhaseSample {
    double q = 0.0;
    double p = 0.0;
    double w = 0.0;
};

struct PhaseSpaceEnsemble {
    std::vector<PhaseSample> samples;
    bool right_movers_only = false;

    void normalize();  // sum w = 1
    double total_weight() const;
};

struct PassageRecord {
    double X = 0.0;
    double T = 0.0;
    std::vector<std::vector<double>> crossings;  // per sample, increasing, all <= T
    std::vector<double> weights;

    bool absorbed(std::size_t i) const { return !crossings[i].empty(); }
    double absorbed_fraction() const;
};

struct DiffusionSpec {
    double D = 0.5;
    double x0 = 0.0;
    double X = 1.0;
    double dt = 0.01;
    double T = 10.0;
    std::uint64_t seed = 1;
};

PhaseSpaceEnsemble sample_gaussian_ensemble(double x0, double p0, double sigma_q, double sigma_p, std::size_t n,
                                            std::uint64_t seed, bool right_movers_only);

PassageRecord passage_times_free(const PhaseSpaceEnsemble& ens, double X, double T, const UnitSystem& u = {});

struct PotentialPassageOptions {
    double energy_tol = 1e-6;   // relative drift allowed before StepSizeError
    double fd_step = 1e-5;      // finite-difference step for the force
};

PassageRecord passage_times_potential(const PhaseSpaceEnsemble& ens, const std::function<double(double)>& V,
                                      double X, double dt, double T, const UnitSystem& u = {},
                                      const PotentialPassageOptions& opt = {});

// Uniform bins on [t0, t1]. Density is weight per unit time; sigma is the binomial
// standard error per bin. normalize divides by the absorbed fraction.
ArrivalDistribution absorbed_flux_histogram(const PassageRecord& rec, double t0, double t1, std::size_t bins,
                                            bool normalize = false);

// Mean first-passage time with the horizon declared: tail_mass is the weight still
// unabsorbed at T times T, relative to the captured first moment.
MomentReport mean_passage_time(const PassageRecord& rec, double tol = 1e-2);

// Euler-Maruyama paths absorbed at the first up-crossing of X (Brownian-bridge
// correction between steps). Returns per-path absorption times (< 0: survived).
std::vector<double> diffusion_passage_samples(const DiffusionSpec& spec, std::size_t n);
ArrivalDistribution diffusion_first_passage(const DiffusionSpec& spec, std::size_t n, std::size_t bins = 40);

struct RenewalReport {
    std::vector<double> times;
    std::vector<double> lhs;       // P(x,x0,t)
    std::vector<double> absorbed;  // P0(x,x0,t)
    std::vector<double> convolution;
    std::vector<double> sigma;     // combined one-sigma band of lhs - rhs
    double residual = 0.0;         // max |lhs - rhs|
    double max_ratio = 0.0;        // max |lhs - rhs| / sigma
    double max_sigma = 0.0;
};

struct RenewalOptions {
    double bin_width = 0.2;       // spatial bin around x
    std::size_t n_times = 20;
};

RenewalReport renewal_residual(const DiffusionSpec& spec, double x, std::size_t n, const RenewalOptions& opt = {});

} // namespace toa
