#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace toa {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

struct UnitSystem {
    double hbar = 1.0;
    double mass = 1.0;
};

// Periodic uniform grid, n a power of two, x_j = x_min + j*dx.
class SpatialGrid {
public:
    SpatialGrid() = default;
    SpatialGrid(double x_min, double x_max, std::size_t n);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t n() const { return n_; }
    double dx() const { return (x_max_ - x_min_) / static_cast<double>(n_); }
    double length() const { return x_max_ - x_min_; }
    double x(std::size_t j) const { return x_min_ + static_cast<double>(j) * dx(); }
    std::vector<double> xs() const;

    double dp(const UnitSystem& u) const;
    double p_nyquist(const UnitSystem& u) const;
    // ascending conjugate grid: p_i = (i - n/2 + 1) dp, i = 0..n-1, top point is +Nyquist
    double p(std::size_t i, const UnitSystem& u) const;
    std::vector<double> ps(const UnitSystem& u) const;
    // nearest grid index to x (periodic)
    std::size_t index_of(double x) const;

    bool operator==(const SpatialGrid& o) const {
        return n_ == o.n_ && x_min_ == o.x_min_ && x_max_ == o.x_max_;
    }

private:
    double x_min_ = -1.0;
    double x_max_ = 1.0;
    std::size_t n_ = 16;
};

struct WaveFunction {
    SpatialGrid grid;
    cvec amps;
    double t = 0.0;
    UnitSystem units;

    double norm2() const;
    WaveFunction& normalize();
};

struct GaussianPacketSpec {
    double x0 = 0.0;
    double p0 = 0.0;
    double delta = 1.0;
};

// Momentum amplitudes on the ascending conjugate grid.
struct MomentumAmplitudes {
    std::vector<double> p;
    cvec phi;
    double dp = 0.0;

    double norm2() const;
};

struct Observables {
    double norm2;
    double mean_x;
    double mean_p;
    double var_x;
    double var_p;
    double energy_free;
};

WaveFunction make_gaussian(const GaussianPacketSpec& spec, const SpatialGrid& grid,
                           const UnitSystem& units = {});
WaveFunction plane_wave(const SpatialGrid& grid, long mode, const UnitSystem& units = {});
// psi from a momentum-space amplitude sampled on the conjugate grid
WaveFunction from_momentum_function(const SpatialGrid& grid, const UnitSystem& units,
                                    const std::function<cplx(double)>& phi);

MomentumAmplitudes to_momentum(const WaveFunction& psi);
WaveFunction from_momentum(const MomentumAmplitudes& mom, const SpatialGrid& grid,
                           const UnitSystem& units = {}, double t = 0.0);

Observables observables(const WaveFunction& psi);

// norm carried by momenta p <= p_cut (p_cut = 0 gives the non-positive part)
double momentum_norm_below(const WaveFunction& psi, double p_cut);

bool is_power_of_two(std::size_t n);

} // namespace toa
