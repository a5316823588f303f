#pragma once

#include "toa/grid.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace toa {

enum class AbsorberShape { flat, linear_ramp };

// W = -V0 on [a,b] (flat) or rising linearly from 0 at a to -V0 at b (ramp).
struct AbsorberRegion {
    double a = 0.0;
    double b = 1.0;
    double V0 = 1.0;
    AbsorberShape shape = AbsorberShape::flat;
};

struct PotentialSpec {
    std::vector<double> real_part;
    std::vector<double> imag_part;  // <= 0
    std::vector<AbsorberRegion> absorbers;

    static PotentialSpec none(const SpatialGrid& grid);
    static PotentialSpec make(const SpatialGrid& grid, const std::function<double(double)>& V,
                              const std::vector<AbsorberRegion>& absorbers = {});
    bool has_absorber() const;
};

// Cell weights in [0,1]: average of the absorber profile over [x_j - dx/2, x_j + dx/2].
// Partially covered cells get fractional weight so that region edges need not sit on grid points.
std::vector<double> absorber_profile(const SpatialGrid& grid, const AbsorberRegion& r);

struct SplitOptions {
    std::size_t output_every = 1;   // record every k-th step
    bool keep_snapshots = false;
    bool validate_dt = true;        // halving test -> StepSizeError
    double fidelity_tol = 1e-8;
    double edge_tol = 1e-8;         // ContainmentError when edge mass exceeds this
    std::function<void(std::size_t, const WaveFunction&)> observer;  // called at every output
};

struct PropagationResult {
    std::vector<double> times;
    std::vector<WaveFunction> snapshots;  // empty unless keep_snapshots
    std::vector<double> norm_series;
    std::vector<double> probes;
    std::vector<std::vector<double>> flux_probe_series;  // [probe][output]
    WaveFunction final_state;
};

// Exact pointwise evaluation of a freely evolving state by summing over the
// conjugate grid (band-limited interpolant). Times are absolute.
class FreeEvolution {
public:
    explicit FreeEvolution(const WaveFunction& psi0);

    cplx value(double x, double t) const;
    std::pair<cplx, cplx> value_and_derivative(double x, double t) const;
    double flux(double x, double t) const;
    // d/dx (d/dt)^k psi(x,t)
    cplx dx_dt(double x, double t, int k) const;
    double density(double x, double t) const { return std::norm(value(x, t)); }
    const UnitSystem& units() const { return units_; }
    const MomentumAmplitudes& momentum() const { return mom_; }
    double t0() const { return t0_; }

private:
    MomentumAmplitudes mom_;
    UnitSystem units_;
    double t0_;
    double p_nyq_;
};

double probability_current(cplx psi, cplx dpsi, const UnitSystem& u);

// fraction of |psi|^2 in the outer n/16 cells on each side
double edge_mass(const WaveFunction& psi);

WaveFunction propagate_free(const WaveFunction& psi, double t, double edge_tol = 1e-8);
// no containment check; used where wrap-around is harmless or tested separately
WaveFunction propagate_free_unchecked(const WaveFunction& psi, double t);

PropagationResult propagate_split(const WaveFunction& psi, const PotentialSpec& pot, double dt,
                                  std::size_t n_steps, const std::vector<double>& probes = {},
                                  const SplitOptions& opt = {});

// Image-method evolution on (-inf, X); X must be a grid point.
WaveFunction restricted_free_propagate(const WaveFunction& psi, double X, double t,
                                       double support_tol = 1e-10);

double norm_right_of(const WaveFunction& psi, double X);

struct PathDecompositionReport {
    double residual = 0.0;         // max over sample points, full node count
    double coarse_residual = 0.0;  // same with half the nodes
    std::size_t nodes = 0;
    std::vector<double> sample_points;
};

// Checks psi_free(x'',T) = psi_restricted(x'',T) + int_0^T K_f(x'',T|X,t') A(t') dt'
// at sample points x'' < X.
PathDecompositionReport verify_path_decomposition(const WaveFunction& psi, double X, double T,
                                                  std::size_t nodes = 2000,
                                                  std::vector<double> sample_points = {});

} // namespace toa
