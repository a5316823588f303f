#include "toa/grid.hpp"

#include "toa/errors.hpp"
#include "toa/fft.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace toa {

using std::numbers::pi;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

SpatialGrid::SpatialGrid(double x_min, double x_max, std::size_t n)
    : x_min_(x_min), x_max_(x_max), n_(n) {
    if (!(x_min < x_max)) throw std::invalid_argument("grid: need x_min < x_max");
    if (n < 16 || !is_power_of_two(n))
        throw std::invalid_argument("grid: n must be a power of two >= 16");
}

std::vector<double> SpatialGrid::xs() const {
    std::vector<double> v(n_);
    for (std::size_t j = 0; j < n_; ++j) v[j] = x(j);
    return v;
}

double SpatialGrid::dp(const UnitSystem& u) const {
    return 2.0 * pi * u.hbar / (static_cast<double>(n_) * dx());
}

double SpatialGrid::p_nyquist(const UnitSystem& u) const { return pi * u.hbar / dx(); }

double SpatialGrid::p(std::size_t i, const UnitSystem& u) const {
    const long s = static_cast<long>(i) - static_cast<long>(n_ / 2) + 1;
    return static_cast<double>(s) * dp(u);
}

std::vector<double> SpatialGrid::ps(const UnitSystem& u) const {
    std::vector<double> v(n_);
    for (std::size_t i = 0; i < n_; ++i) v[i] = p(i, u);
    return v;
}

std::size_t SpatialGrid::index_of(double xv) const {
    const double r = std::round((xv - x_min_) / dx());
    const long n = static_cast<long>(n_);
    long j = static_cast<long>(r) % n;
    if (j < 0) j += n;
    return static_cast<std::size_t>(j);
}

double WaveFunction::norm2() const {
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    return s * grid.dx();
}

WaveFunction& WaveFunction::normalize() {
    const double nn = norm2();
    if (!(nn > 0.0)) throw NotNormalizable("zero wave function");
    const double f = 1.0 / std::sqrt(nn);
    for (auto& a : amps) a *= f;
    return *this;
}

double MomentumAmplitudes::norm2() const {
    double s = 0.0;
    for (const auto& a : phi) s += std::norm(a);
    return s * dp;
}

WaveFunction make_gaussian(const GaussianPacketSpec& spec, const SpatialGrid& grid,
                           const UnitSystem& units) {
    if (!(spec.delta > 0.0)) throw std::invalid_argument("gaussian: delta must be > 0");
    const double d = spec.delta;
    std::ostringstream why;
    if (spec.x0 - grid.x_min() < 6 * d || grid.x_max() - spec.x0 < 6 * d)
        why << "packet x0=" << spec.x0 << " delta=" << d << " not 6 delta inside ["
            << grid.x_min() << ", " << grid.x_max() << "]";
    else if (std::abs(spec.p0) + 3 * units.hbar / (2 * d) >= grid.p_nyquist(units))
        why << "momentum |p0| + 3hbar/(2 delta) = "
            << std::abs(spec.p0) + 3 * units.hbar / (2 * d) << " reaches Nyquist "
            << grid.p_nyquist(units);
    if (!why.str().empty()) throw ContainmentError(why.str());

    WaveFunction psi{grid, cvec(grid.n()), 0.0, units};
    const double c = std::pow(2 * pi * d * d, -0.25);
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double x = grid.x(j);
        const double dxx = x - spec.x0;
        psi.amps[j] = c * std::exp(-dxx * dxx / (4 * d * d)) *
                      std::polar(1.0, spec.p0 * x / units.hbar);
    }
    psi.normalize();
    return psi;
}

WaveFunction plane_wave(const SpatialGrid& grid, long mode, const UnitSystem& units) {
    WaveFunction psi{grid, cvec(grid.n()), 0.0, units};
    const double k = 2 * pi * static_cast<double>(mode) / grid.length();
    for (std::size_t j = 0; j < grid.n(); ++j) psi.amps[j] = std::polar(1.0, k * grid.x(j));
    psi.normalize();
    return psi;
}

MomentumAmplitudes to_momentum(const WaveFunction& psi) {
    const auto& g = psi.grid;
    const std::size_t n = g.n();
    const cvec f = fft_forward(psi.amps);
    MomentumAmplitudes m;
    m.dp = g.dp(psi.units);
    m.p = g.ps(psi.units);
    m.phi.resize(n);
    const double c = g.dx() / std::sqrt(2 * pi * psi.units.hbar);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + n / 2 + 1) % n;
        m.phi[i] = c * f[k] * std::polar(1.0, -m.p[i] * g.x_min() / psi.units.hbar);
    }
    return m;
}

WaveFunction from_momentum(const MomentumAmplitudes& mom, const SpatialGrid& grid,
                           const UnitSystem& units, double t) {
    const std::size_t n = grid.n();
    if (mom.phi.size() != n) throw GridMismatch("momentum array length differs from grid");
    cvec f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + n / 2 + 1) % n;
        f[k] = mom.phi[i] * std::polar(1.0, mom.p[i] * grid.x_min() / units.hbar);
    }
    WaveFunction psi{grid, fft_backward(f), t, units};
    const double c = grid.dp(units) / std::sqrt(2 * pi * units.hbar);
    for (auto& a : psi.amps) a *= c;
    return psi;
}

WaveFunction from_momentum_function(const SpatialGrid& grid, const UnitSystem& units,
                                    const std::function<cplx(double)>& phi) {
    MomentumAmplitudes m;
    m.dp = grid.dp(units);
    m.p = grid.ps(units);
    m.phi.resize(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) m.phi[i] = phi(m.p[i]);
    return from_momentum(m, grid, units);
}

Observables observables(const WaveFunction& psi) {
    const auto& g = psi.grid;
    Observables o{};
    double s0 = 0, s1 = 0, s2 = 0;
    for (std::size_t j = 0; j < g.n(); ++j) {
        const double r = std::norm(psi.amps[j]);
        const double x = g.x(j);
        s0 += r;
        s1 += r * x;
        s2 += r * x * x;
    }
    o.norm2 = s0 * g.dx();
    o.mean_x = s1 / s0;
    o.var_x = std::max(0.0, s2 / s0 - o.mean_x * o.mean_x);

    const auto m = to_momentum(psi);
    double q0 = 0, q1 = 0, q2 = 0;
    for (std::size_t i = 0; i < m.p.size(); ++i) {
        const double r = std::norm(m.phi[i]);
        q0 += r;
        q1 += r * m.p[i];
        q2 += r * m.p[i] * m.p[i];
    }
    o.mean_p = q1 / q0;
    o.var_p = std::max(0.0, q2 / q0 - o.mean_p * o.mean_p);
    o.energy_free = q2 / q0 / (2 * psi.units.mass);
    return o;
}

double momentum_norm_below(const WaveFunction& psi, double p_cut) {
    const auto m = to_momentum(psi);
    double s = 0.0;
    for (std::size_t i = 0; i < m.p.size(); ++i)
        if (m.p[i] <= p_cut) s += std::norm(m.phi[i]);
    return s * m.dp;
}

} // namespace toa
