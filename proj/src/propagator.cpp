#include "toa/propagator.hpp"

#include "toa/errors.hpp"
#include "toa/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace toa {

using std::numbers::pi;

namespace {

// signed momentum of FFT bin k
double bin_momentum(std::size_t k, const SpatialGrid& g, const UnitSystem& u) {
    const long n = static_cast<long>(g.n());
    long s = static_cast<long>(k);
    if (s > n / 2) s -= n;
    return static_cast<double>(s) * g.dp(u);
}

void apply_kinetic(cvec& a, const cvec& phase) {
    const std::size_t n = a.size();
    fft_forward(a.data(), a.data(), n);
    for (std::size_t k = 0; k < n; ++k) a[k] *= phase[k];
    fft_backward(a.data(), a.data(), n);
}

void check_edges(const WaveFunction& psi, double tol, const char* who) {
    const double e = edge_mass(psi);
    if (e > tol) {
        std::ostringstream os;
        os << who << ": mass " << e << " at the grid edges at t=" << psi.t;
        throw ContainmentError(os.str());
    }
}

} // namespace

PotentialSpec PotentialSpec::none(const SpatialGrid& grid) {
    return PotentialSpec{std::vector<double>(grid.n(), 0.0), std::vector<double>(grid.n(), 0.0), {}};
}

PotentialSpec PotentialSpec::make(const SpatialGrid& grid, const std::function<double(double)>& V,
                                  const std::vector<AbsorberRegion>& absorbers) {
    PotentialSpec p = none(grid);
    if (V)
        for (std::size_t j = 0; j < grid.n(); ++j) p.real_part[j] = V(grid.x(j));
    for (const auto& r : absorbers) {
        if (!(r.b > r.a) || !(r.V0 >= 0.0))
            throw std::invalid_argument("absorber needs b > a and V0 >= 0");
        const auto w = absorber_profile(grid, r);
        for (std::size_t j = 0; j < grid.n(); ++j) p.imag_part[j] -= r.V0 * w[j];
    }
    p.absorbers = absorbers;
    return p;
}

bool PotentialSpec::has_absorber() const {
    return std::any_of(imag_part.begin(), imag_part.end(), [](double w) { return w < 0.0; });
}

std::vector<double> absorber_profile(const SpatialGrid& grid, const AbsorberRegion& r) {
    std::vector<double> w(grid.n(), 0.0);
    const double h = grid.dx();
    // primitive of the profile shape on [a,b], clamped outside
    auto prim = [&](double x) {
        const double y = std::clamp(x, r.a, r.b) - r.a;
        if (r.shape == AbsorberShape::flat) return y;
        return 0.5 * y * y / (r.b - r.a);
    };
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double x = grid.x(j);
        w[j] = (prim(x + 0.5 * h) - prim(x - 0.5 * h)) / h;
    }
    return w;
}

double probability_current(cplx psi, cplx dpsi, const UnitSystem& u) {
    return u.hbar / u.mass * std::imag(std::conj(psi) * dpsi);
}

double edge_mass(const WaveFunction& psi) {
    const std::size_t n = psi.amps.size();
    const std::size_t w = std::max<std::size_t>(1, n / 16);
    double s = 0.0, tot = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double r = std::norm(psi.amps[j]);
        tot += r;
        if (j < w || j >= n - w) s += r;
    }
    return tot > 0.0 ? s / tot : 0.0;
}

FreeEvolution::FreeEvolution(const WaveFunction& psi0)
    : mom_(to_momentum(psi0)), units_(psi0.units), t0_(psi0.t),
      p_nyq_(psi0.grid.p_nyquist(psi0.units)) {}

cplx FreeEvolution::value(double x, double t) const {
    const double tau = t - t0_;
    const double hb = units_.hbar;
    cplx s = 0.0;
    for (std::size_t i = 0; i < mom_.p.size(); ++i) {
        const double p = mom_.p[i];
        s += mom_.phi[i] * std::polar(1.0, p * x / hb - p * p * tau / (2 * units_.mass * hb));
    }
    return s * mom_.dp / std::sqrt(2 * pi * hb);
}

std::pair<cplx, cplx> FreeEvolution::value_and_derivative(double x, double t) const {
    const double tau = t - t0_;
    const double hb = units_.hbar;
    cplx s = 0.0, d = 0.0;
    for (std::size_t i = 0; i < mom_.p.size(); ++i) {
        const double p = mom_.p[i];
        const cplx term = mom_.phi[i] * std::polar(1.0, p * x / hb - p * p * tau / (2 * units_.mass * hb));
        s += term;
        // the Nyquist mode has no well-defined derivative on the grid
        if (p < p_nyq_ * (1 - 1e-12)) d += cplx(0.0, p / hb) * term;
    }
    const double c = mom_.dp / std::sqrt(2 * pi * hb);
    return {s * c, d * c};
}

cplx FreeEvolution::dx_dt(double x, double t, int k) const {
    const double tau = t - t0_;
    const double hb = units_.hbar;
    cplx d = 0.0;
    for (std::size_t i = 0; i < mom_.p.size(); ++i) {
        const double p = mom_.p[i];
        if (p >= p_nyq_ * (1 - 1e-12)) continue;
        const double w = p * p / (2 * units_.mass * hb);
        d += cplx(0.0, p / hb) * std::pow(cplx(0.0, -w), k) * mom_.phi[i] *
             std::polar(1.0, p * x / hb - w * tau);
    }
    return d * mom_.dp / std::sqrt(2 * pi * hb);
}

double FreeEvolution::flux(double x, double t) const {
    const auto [v, d] = value_and_derivative(x, t);
    return probability_current(v, d, units_);
}

WaveFunction propagate_free_unchecked(const WaveFunction& psi, double t) {
    if (t == 0.0) return psi;
    const auto& g = psi.grid;
    const std::size_t n = g.n();
    cvec phase(n);
    const double hb = psi.units.hbar, m = psi.units.mass;
    for (std::size_t k = 0; k < n; ++k) {
        const double p = bin_momentum(k, g, psi.units);
        phase[k] = std::polar(1.0 / static_cast<double>(n), -p * p * t / (2 * m * hb));
    }
    WaveFunction out = psi;
    apply_kinetic(out.amps, phase);
    out.t = psi.t + t;
    return out;
}

WaveFunction propagate_free(const WaveFunction& psi, double t, double edge_tol) {
    check_edges(psi, edge_tol, "propagate_free");
    WaveFunction out = propagate_free_unchecked(psi, t);
    check_edges(out, edge_tol, "propagate_free");
    return out;
}

namespace {

struct SplitRun {
    PropagationResult res;
    WaveFunction last;
};

SplitRun split_core(const WaveFunction& psi, const PotentialSpec& pot, double dt, std::size_t n_steps,
                    const std::vector<double>& probes, const SplitOptions& opt, bool record) {
    const auto& g = psi.grid;
    const std::size_t n = g.n();
    if (pot.real_part.size() != n || pot.imag_part.size() != n)
        throw GridMismatch("potential arrays do not match the grid");
    for (double w : pot.imag_part)
        if (w > 0.0) throw std::invalid_argument("absorber imaginary part must be <= 0");

    const double hb = psi.units.hbar, m = psi.units.mass;
    cvec half(n), kin(n);
    for (std::size_t j = 0; j < n; ++j)
        half[j] = std::exp(cplx(pot.imag_part[j], -pot.real_part[j]) * (dt / (2 * hb)));
    for (std::size_t k = 0; k < n; ++k) {
        const double p = bin_momentum(k, g, psi.units);
        kin[k] = std::polar(1.0 / static_cast<double>(n), -p * p * dt / (2 * m * hb));
    }

    SplitRun run;
    auto& r = run.res;
    r.probes = probes;
    r.flux_probe_series.assign(probes.size(), {});
    WaveFunction cur = psi;
    const std::size_t every = std::max<std::size_t>(1, opt.output_every);

    auto record_state = [&](std::size_t step) {
        if (!record) return;
        check_edges(cur, opt.edge_tol, "propagate_split");
        r.times.push_back(cur.t);
        r.norm_series.push_back(cur.norm2());
        if (!probes.empty()) {
            FreeEvolution fe(cur);
            for (std::size_t i = 0; i < probes.size(); ++i)
                r.flux_probe_series[i].push_back(fe.flux(probes[i], cur.t));
        }
        if (opt.keep_snapshots) r.snapshots.push_back(cur);
        if (opt.observer) opt.observer(step / every, cur);
    };

    record_state(0);
    for (std::size_t s = 1; s <= n_steps; ++s) {
        for (std::size_t j = 0; j < n; ++j) cur.amps[j] *= half[j];
        apply_kinetic(cur.amps, kin);
        for (std::size_t j = 0; j < n; ++j) cur.amps[j] *= half[j];
        cur.t = psi.t + static_cast<double>(s) * dt;
        if (s % every == 0) record_state(s);
    }
    run.last = cur;
    return run;
}

} // namespace

PropagationResult propagate_split(const WaveFunction& psi, const PotentialSpec& pot, double dt,
                                  std::size_t n_steps, const std::vector<double>& probes,
                                  const SplitOptions& opt) {
    if (!(dt > 0.0)) throw StepSizeError("dt must be positive");
    SplitRun run = split_core(psi, pot, dt, n_steps, probes, opt, true);
    if (opt.validate_dt && n_steps > 0) {
        SplitOptions quiet;
        quiet.edge_tol = opt.edge_tol;
        SplitRun fine = split_core(psi, pot, dt / 2, 2 * n_steps, {}, quiet, false);
        const auto& a = run.last.amps;
        const auto& b = fine.last.amps;
        cplx ov = 0.0;
        double na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            ov += std::conj(a[j]) * b[j];
            na += std::norm(a[j]);
            nb += std::norm(b[j]);
        }
        if (na > 0.0 && nb > 0.0) {
            const double infidelity = 1.0 - std::norm(ov) / (na * nb);
            if (infidelity > opt.fidelity_tol) {
                std::ostringstream os;
                os << "halving dt=" << dt << " changes the final state fidelity by " << infidelity;
                throw StepSizeError(os.str());
            }
        }
    }
    run.res.final_state = std::move(run.last);
    return std::move(run.res);
}

double norm_right_of(const WaveFunction& psi, double X) {
    double s = 0.0;
    for (std::size_t j = 0; j < psi.grid.n(); ++j)
        if (psi.grid.x(j) >= X) s += std::norm(psi.amps[j]);
    return s * psi.grid.dx();
}

namespace {

std::size_t grid_index_exact(const SpatialGrid& g, double X) {
    const std::size_t j = g.index_of(X);
    if (std::abs(g.x(j) - X) > 1e-9 * g.dx())
        throw std::invalid_argument("boundary X must be a grid point");
    return j;
}

void check_support(const WaveFunction& psi, double X, double tol) {
    const double r = norm_right_of(psi, X);
    if (r > tol) {
        std::ostringstream os;
        os << "norm " << r << " at x >= X=" << X << " exceeds " << tol;
        throw SupportError(os.str());
    }
}

} // namespace

WaveFunction restricted_free_propagate(const WaveFunction& psi, double X, double t, double support_tol) {
    const auto& g = psi.grid;
    const std::size_t jx = grid_index_exact(g, X);
    check_support(psi, X, support_tol);
    const std::size_t n = g.n();
    WaveFunction odd = psi;
    for (std::size_t j = 0; j < n; ++j) {
        // mirror partner 2 jX - j (mod n); x >= X part of psi is dropped first
        const std::size_t jr = (2 * jx + 2 * n - j) % n;
        const cplx direct = g.x(j) < X ? psi.amps[j] : cplx(0.0);
        const cplx image = g.x(jr) < X ? psi.amps[jr] : cplx(0.0);
        odd.amps[j] = direct - image;
    }
    WaveFunction out = propagate_free_unchecked(odd, t);
    for (std::size_t j = 0; j < n; ++j)
        if (g.x(j) >= X) out.amps[j] = 0.0;
    return out;
}

PathDecompositionReport verify_path_decomposition(const WaveFunction& psi, double X, double T,
                                                  std::size_t nodes, std::vector<double> sample_points) {
    if (!(T > 0.0)) throw std::invalid_argument("path decomposition needs T > 0");
    check_support(psi, X, 1e-10);
    if (sample_points.empty()) sample_points = {X - 0.5, X - 1.0, X - 1.5, X - 2.0, X - 3.0};
    for (double x : sample_points)
        if (!(x < X)) throw SupportError("sample points must lie left of X");
    nodes = std::max<std::size_t>(4, nodes + (nodes % 2));

    const UnitSystem u = psi.units;
    const double hb = u.hbar, m = u.mass;
    const FreeEvolution fe(psi);
    const double t0 = psi.t;
    const double Tabs = t0 + T;

    // first-passage amplitude A(t') = (i hbar / 2m) dK0/dX applied to psi, with
    // the boundary derivative taken w.r.t. the position of the wall
    auto amp = [&](double tp) {
        return cplx(0.0, -hb / m) * fe.value_and_derivative(X, t0 + tp).second;
    };
    // Taylor data of A at t' = T for the analytic tail
    constexpr int kTaylor = 6;
    cplx A_der[kTaylor + 1];
    for (int k = 0; k <= kTaylor; ++k) A_der[k] = cplx(0.0, -hb / m) * fe.dx_dt(X, Tabs, k);

    // phase rate of A in 1/(T - t'), from the fastest populated momentum
    const auto& mom = fe.momentum();
    double pmax = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < mom.p.size(); ++i) tot += std::norm(mom.phi[i]);
    {
        std::vector<std::pair<double, double>> w;
        for (std::size_t i = 0; i < mom.p.size(); ++i) w.emplace_back(std::abs(mom.p[i]), std::norm(mom.phi[i]));
        std::sort(w.begin(), w.end(), [](auto& a, auto& b) { return a.first > b.first; });
        double acc = 0.0;
        for (auto& [p, r] : w) {
            acc += r;
            if (acc > 1e-14 * tot) { pmax = p; break; }
        }
    }
    const double Emax = pmax * pmax / (2 * m * hb);

    const cplx pref = std::sqrt(cplx(m / (2 * pi * hb), 0.0) / cplx(0.0, 1.0));

    auto boundary_term = [&](double xpp, std::size_t N) {
        const double a = m * (X - xpp) * (X - xpp) / (2 * hb);
        const double v0 = 1.0 / T;
        const double V = std::max({400.0 / a, 10.0 * v0, 2.0 * Emax});
        auto Phi = [&](double v) { return a * (v - v0) + Emax * (1 / v0 - 1 / v) + std::log(v / v0); };
        auto dPhi = [&](double v) { return a + Emax / (v * v) + 1 / v; };
        const double PV = Phi(V);
        cplx I = 0.0;
        const double h = 1.0 / static_cast<double>(N);
        double v = v0;
        for (std::size_t k = 0; k <= N; ++k) {
            const double target = PV * static_cast<double>(k) * h;
            if (k == N) v = V;
            else if (k > 0) {
                // Newton from the previous node; Phi is increasing and convex-safe here
                for (int it = 0; it < 60; ++it) {
                    const double f = Phi(v) - target;
                    const double step = f / dPhi(v);
                    double vn = v - step;
                    if (vn <= v0) vn = 0.5 * (v + v0);
                    if (vn >= V) vn = 0.5 * (v + V);
                    v = vn;
                    if (std::abs(step) < 1e-15 * v) break;
                }
            }
            const double wk = (k == 0 || k == N) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            const cplx f = std::pow(v, -1.5) * std::polar(1.0, a * v) * amp(T - 1.0 / v) * (PV / dPhi(v));
            I += wk * f;
        }
        I *= h / 3.0;
        // int_V^inf e^{iav} v^{-s} dv ~ (i/a) e^{iaV} V^{-s} sum_j (s)_j (-i/(aV))^j, and
        // A(T - 1/v) = sum_k A^(k)(T) (-1/v)^k / k!
        cplx tail = 0.0;
        double fact = 1.0;
        for (int k = 0; k <= kTaylor; ++k) {
            if (k > 0) fact *= k;
            const double s = 1.5 + k;
            cplx series = 0.0, term = 1.0;
            for (int j = 0; j < 12; ++j) {
                series += term;
                term *= cplx(0.0, -(s + j) / (a * V));
            }
            const cplx Is = cplx(0.0, 1.0 / a) * std::polar(1.0, a * V) * std::pow(V, -s) * series;
            tail += (k % 2 ? -1.0 : 1.0) / fact * A_der[k] * Is;
        }
        return pref * (I + tail);
    };

    const WaveFunction restricted = restricted_free_propagate(psi, X, T);
    const FreeEvolution fr(restricted);

    PathDecompositionReport rep;
    rep.nodes = nodes;
    rep.sample_points = sample_points;
    for (double xpp : sample_points) {
        const cplx lhs = fe.value(xpp, Tabs) - fr.value(xpp, Tabs);
        rep.residual = std::max(rep.residual, std::abs(lhs - boundary_term(xpp, nodes)));
        rep.coarse_residual = std::max(rep.coarse_residual, std::abs(lhs - boundary_term(xpp, nodes / 2 + (nodes / 2) % 2)));
    }
    if (rep.residual >= rep.coarse_residual && rep.residual > 1e-12) {
        std::ostringstream os;
        os << "refining t' nodes " << nodes / 2 << " -> " << nodes << " does not reduce the residual ("
           << rep.coarse_residual << " -> " << rep.residual << ")";
        throw QuadratureError(os.str());
    }
    return rep;
}

} // namespace toa
