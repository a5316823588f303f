#pragma once

#include "toa/distribution.hpp"
#include "toa/grid.hpp"
#include "toa/propagator.hpp"

#include <vector>

namespace toa {

// ---- flux --------------------------------------------------------------

// J(X,t) of the free evolution of psi0 at absolute times
ArrivalDistribution flux(const WaveFunction& psi0, double X, const std::vector<double>& times);
// J(X,t_k) from a recorded series of states
ArrivalDistribution flux(const std::vector<WaveFunction>& series, double X);

// closed form for a free minimum-uncertainty packet, shifted so the detector sits at X
double gaussian_flux_closed_form(const GaussianPacketSpec& g, const UnitSystem& u, double X, double t);

ArrivalDistribution bohm_distribution(const ArrivalDistribution& flux_dist);

// ---- Kijowski ------------------------------------------------------------

struct KijowskiOptions {
    // norm allowed at p <= p_min = dp/2 before DomainError
    double excluded_tol = 1e-4;
};

double excluded_momentum_norm(const WaveFunction& psi0);

ArrivalDistribution kijowski(const WaveFunction& psi0, double X, const std::vector<double>& times,
                             const KijowskiOptions& opt = {});
cplx eigenstate_overlap(const WaveFunction& psi0, double t, double X = 0.0,
                        const KijowskiOptions& opt = {});
// <t-hat> in the momentum representation; tail_mass carries the excluded norm
MomentReport time_operator_average(const WaveFunction& psi0, double X, const KijowskiOptions& opt = {});

// Rebuilds phi(p) for p > p_min from <t|psi> sampled on [t0, t1]; returns
// ||phi_rec - phi|| / ||phi|| on the positive grid.
double completeness_leakage(const WaveFunction& psi0, double t0, double t1, std::size_t nt);

// ---- complex absorber ----------------------------------------------------

struct CapResult {
    ArrivalDistribution rate;  // -dN/dt at output midpoints
    double dwell = 0.0;
    double reflected = 0.0;    // norm left of X at T
    double transmitted = 0.0;  // norm right of the last absorber at T
    std::vector<double> times;
    std::vector<double> norm_series;
};

CapResult cap_absorption_rate(const WaveFunction& psi0, const PotentialSpec& pot, double X, double dt,
                              double T, std::size_t output_every = 5);

// ---- chopping ------------------------------------------------------------

struct ChoppingResult {
    ArrivalDistribution dist;  // atoms at the cut times
    double absorbed_total = 0.0;
    WaveFunction final_state;
};

ChoppingResult chopping_run(const WaveFunction& psi0, double X, double dt_cut, double T);

// One cut evaluated as a map in momentum space: free phase, then the principal-value
// kernel of Theta(X - x). Returns amplitudes on the ascending conjugate grid where
// |p| <= p_window (zero elsewhere).
MomentumAmplitudes chopping_momentum_map(const WaveFunction& psi0, double X, double dt_cut, double p_window);

// ---- path-decomposition amplitude -------------------------------------------

enum class SupportPolicy { strict, full_line };

ArrivalDistribution pde_amplitude(const WaveFunction& psi0, double X, const std::vector<double>& times,
                                  SupportPolicy policy = SupportPolicy::strict);

// ---- presence time -----------------------------------------------------------

ArrivalDistribution presence_density(const WaveFunction& psi0, double X, const std::vector<double>& times);
MomentReport presence_time(const ArrivalDistribution& rho, double tol = 1e-2);

// ---- backflow ----------------------------------------------------------------

struct TwoComponentSpec {
    double p1 = 1.0, p2 = 3.0;
    double sigma1 = 0.3, sigma2 = 0.3;
    double a_min = 0.2, a_max = 1.0;
    std::size_t n_a = 9, n_phi = 16;
    double t_focus = 5.0;   // both components centred to reach X at this time
    double p_cut = 0.2;     // smooth factor exp(-(p_cut/p)^2) on p > 0
    double T = 10.0;
    std::size_t n_t = 2001;
};

struct BackflowResult {
    WaveFunction state;
    double a = 0.0, phi = 0.0;
    double t_begin = 0.0, t_end = 0.0;
    double integral = 0.0;  // int_I J dt (< 0)
    double negative_norm = 0.0;
};

WaveFunction two_component_state(const SpatialGrid& grid, const UnitSystem& u, const TwoComponentSpec& s,
                                 double X, double a, double phi);
BackflowResult backflow_search(const SpatialGrid& grid, const UnitSystem& u, const TwoComponentSpec& s, double X);

// most negative contiguous run of J: (t_begin, t_end, integral); integral 0 if none
struct NegativeInterval {
    double t_begin = 0.0, t_end = 0.0, integral = 0.0;
};
NegativeInterval most_negative_interval(const std::vector<double>& t, const std::vector<double>& J);

} // namespace toa
