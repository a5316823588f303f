#include "toa/arrival.hpp"

#include "toa/errors.hpp"
#include "toa/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace toa {

using std::numbers::pi;

namespace {

ArrivalDistribution make_dist(Method m, double X, std::vector<double> times, std::vector<double> density) {
    ArrivalDistribution d;
    d.method = m;
    d.X = X;
    d.weights = trapezoid_weights(times);
    d.times = std::move(times);
    d.density = std::move(density);
    d.captured = d.integral();
    return d;
}

// positive part of the conjugate grid, p > dp/2
struct PositiveMomenta {
    std::vector<double> p;
    cvec phi;
    cvec dphi;  // d phi / dp, filled on request
    double dp = 0.0;
    double excluded = 0.0;  // relative norm at p <= dp/2
    double kept = 0.0;      // absolute norm at p > dp/2
};

PositiveMomenta positive_part(const WaveFunction& psi, bool with_derivative) {
    const auto m = to_momentum(psi);
    PositiveMomenta out;
    out.dp = m.dp;
    MomentumAmplitudes dm;
    if (with_derivative) {
        WaveFunction xpsi = psi;
        for (std::size_t j = 0; j < xpsi.amps.size(); ++j)
            xpsi.amps[j] *= cplx(0.0, -psi.grid.x(j) / psi.units.hbar);
        dm = to_momentum(xpsi);
    }
    double tot = 0.0, below = 0.0;
    for (std::size_t i = 0; i < m.p.size(); ++i) {
        const double r = std::norm(m.phi[i]) * m.dp;
        tot += r;
        if (m.p[i] <= 0.5 * m.dp) {
            below += r;
            continue;
        }
        out.p.push_back(m.p[i]);
        out.phi.push_back(m.phi[i]);
        if (with_derivative) out.dphi.push_back(dm.phi[i]);
        out.kept += r;
    }
    out.excluded = tot > 0.0 ? below / tot : 0.0;
    return out;
}

void check_domain(const PositiveMomenta& pm, double tol, const char* who) {
    if (pm.excluded > tol) {
        std::ostringstream os;
        os << who << ": norm " << pm.excluded << " at p <= p_min exceeds " << tol;
        throw DomainError(os.str());
    }
}

// sum_k c_k e^{-i w_k t} with c_k = sqrt(p/(m h)) e^{-ipX/hbar} phi_k dp (times measured from psi.t)
struct TimeAmplitude {
    std::vector<double> w;
    cvec c;
    double t0;

    TimeAmplitude(const PositiveMomenta& pm, const UnitSystem& u, double X, double t0_) : t0(t0_) {
        const double hb = u.hbar, m = u.mass, h = 2 * pi * hb;
        for (std::size_t i = 0; i < pm.p.size(); ++i) {
            const double p = pm.p[i];
            w.push_back(p * p / (2 * m * hb));
            c.push_back(std::sqrt(p / (m * h)) * std::polar(1.0, -p * X / hb) * pm.phi[i] * pm.dp);
        }
    }
    cplx operator()(double t) const {
        cplx s = 0.0;
        const double tau = t - t0;
        for (std::size_t i = 0; i < w.size(); ++i) s += c[i] * std::polar(1.0, -w[i] * tau);
        return s;
    }
};

} // namespace

// ---- flux ---------------------------------------------------------------------

ArrivalDistribution flux(const WaveFunction& psi0, double X, const std::vector<double>& times) {
    const FreeEvolution fe(psi0);
    std::vector<double> J(times.size());
    parallel_for(times.size(), [&](std::size_t i) { J[i] = fe.flux(X, times[i]); });
    return make_dist(Method::flux, X, times, std::move(J));
}

ArrivalDistribution flux(const std::vector<WaveFunction>& series, double X) {
    std::vector<double> t(series.size()), J(series.size());
    parallel_for(series.size(), [&](std::size_t i) {
        const FreeEvolution fe(series[i]);
        t[i] = series[i].t;
        J[i] = fe.flux(X, series[i].t);
    });
    return make_dist(Method::flux, X, std::move(t), std::move(J));
}

double gaussian_flux_closed_form(const GaussianPacketSpec& g, const UnitSystem& u, double X, double t) {
    const double x0 = g.x0 - X, p0 = g.p0, d = g.delta, m = u.mass, h = u.hbar;
    const double a = t * x0 * h * h;
    const double D = (t * h) * (t * h) + (2 * d * d * m) * (2 * d * d * m);
    return std::sqrt(2 / pi) * (4 * d * d * d * d * p0 * m - a) * m * d * std::pow(D, -1.5) *
           std::exp(-2 * d * d * (x0 * x0 * m * m + 2 * m * p0 * t * x0 + p0 * p0 * t * t) / D);
}

ArrivalDistribution bohm_distribution(const ArrivalDistribution& fd) {
    ArrivalDistribution d = fd;
    d.method = Method::abs_flux;
    for (auto& v : d.density) v = std::abs(v);
    const double I = d.integral();
    if (!(I > 0.0)) throw ZeroFlux("integral of |J| vanishes");
    for (auto& v : d.density) v /= I;
    d.captured = I;
    d.normalized = true;
    return d;
}

// ---- Kijowski -----------------------------------------------------------------

double excluded_momentum_norm(const WaveFunction& psi0) { return positive_part(psi0, false).excluded; }

ArrivalDistribution kijowski(const WaveFunction& psi0, double X, const std::vector<double>& times,
                             const KijowskiOptions& opt) {
    const auto pm = positive_part(psi0, false);
    check_domain(pm, opt.excluded_tol, "kijowski");
    const TimeAmplitude amp(pm, psi0.units, X, psi0.t);
    std::vector<double> P(times.size());
    parallel_for(times.size(), [&](std::size_t i) { P[i] = std::norm(amp(times[i])); });
    auto d = make_dist(Method::kijowski, X, times, std::move(P));
    d.metadata["excluded_norm"] = std::to_string(pm.excluded);
    return d;
}

cplx eigenstate_overlap(const WaveFunction& psi0, double t, double X, const KijowskiOptions& opt) {
    const auto pm = positive_part(psi0, false);
    check_domain(pm, opt.excluded_tol, "eigenstate_overlap");
    return TimeAmplitude(pm, psi0.units, X, psi0.t)(t);
}

MomentReport time_operator_average(const WaveFunction& psi0, double X, const KijowskiOptions& opt) {
    const auto pm = positive_part(psi0, true);
    check_domain(pm, opt.excluded_tol, "time_operator_average");
    const double m = psi0.units.mass, hb = psi0.units.hbar;
    double s = 0.0;
    for (std::size_t i = 0; i < pm.p.size(); ++i)
        s += m / pm.p[i] * (X * std::norm(pm.phi[i]) + hb * std::imag(std::conj(pm.phi[i]) * pm.dphi[i]));
    MomentReport r;
    r.order = 1;
    r.value = psi0.t + s * pm.dp / pm.kept;
    r.tail_mass = pm.excluded;
    r.tolerance = opt.excluded_tol;
    r.converged = pm.excluded <= opt.excluded_tol;
    return r;
}

double completeness_leakage(const WaveFunction& psi0, double t0, double t1, std::size_t nt) {
    auto pm = positive_part(psi0, false);
    // keep the band that carries all but 1e-14 of the norm; beyond it phi is roundoff and
    // the time sampling would alias the large energies
    double tot = 0.0, acc = 0.0;
    for (const auto& c : pm.phi) tot += std::norm(c);
    std::size_t top = pm.p.size();
    while (top > 0 && (acc + std::norm(pm.phi[top - 1])) < 1e-14 * tot) acc += std::norm(pm.phi[--top]);
    pm.p.resize(top);
    pm.phi.resize(top);
    const TimeAmplitude amp(pm, psi0.units, 0.0, psi0.t);
    const auto ts = uniform_times(t0, t1, nt);
    const auto w = trapezoid_weights(ts);
    cvec overlap(nt);
    parallel_for(nt, [&](std::size_t i) { overlap[i] = amp(ts[i]); });
    const double hb = psi0.units.hbar, m = psi0.units.mass, h = 2 * pi * hb;
    std::vector<double> err(top);
    parallel_for(top, [&](std::size_t k) {
        const double p = pm.p[k];
        const double wk = p * p / (2 * m * hb);
        cplx s = 0.0;
        for (std::size_t i = 0; i < nt; ++i)
            s += w[i] * std::polar(1.0, wk * (ts[i] - psi0.t)) * overlap[i];
        s *= std::sqrt(p / (m * h));
        err[k] = std::norm(s - pm.phi[k]);
    });
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < top; ++k) {
        num += err[k];
        den += std::norm(pm.phi[k]);
    }
    return std::sqrt(num / den);
}

// ---- complex absorber -------------------------------------------------------------

CapResult cap_absorption_rate(const WaveFunction& psi0, const PotentialSpec& pot, double X, double dt,
                              double T, std::size_t output_every) {
    double a_min = std::numeric_limits<double>::infinity(), b_max = -a_min;
    std::vector<double> region(psi0.grid.n(), 0.0);
    for (const auto& r : pot.absorbers) {
        if (r.a < X) throw std::invalid_argument("absorber must start at or beyond X");
        a_min = std::min(a_min, r.a);
        b_max = std::max(b_max, r.b);
        AbsorberRegion box = r;
        box.shape = AbsorberShape::flat;
        const auto w = absorber_profile(psi0.grid, box);
        for (std::size_t j = 0; j < w.size(); ++j) region[j] = std::min(1.0, region[j] + w[j]);
    }
    if (pot.absorbers.empty()) a_min = b_max = X;
    if (norm_right_of(psi0, a_min) > 1e-10) throw SupportError("packet already inside the absorber");

    const std::size_t steps = static_cast<std::size_t>(std::llround(T / dt));
    std::vector<double> inside;
    SplitOptions opt;
    opt.output_every = output_every;
    opt.observer = [&](std::size_t, const WaveFunction& w) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.amps.size(); ++j) s += region[j] * std::norm(w.amps[j]);
        inside.push_back(s * w.grid.dx());
    };
    PropagationResult pr;
    try {
        pr = propagate_split(psi0, pot, dt, steps, {}, opt);
    } catch (const ContainmentError& e) {
        throw LeakError(e.what());
    }

    CapResult out;
    out.times = pr.times;
    out.norm_series = pr.norm_series;
    std::vector<double> mid, rate, w;
    for (std::size_t k = 0; k + 1 < pr.times.size(); ++k) {
        const double h = pr.times[k + 1] - pr.times[k];
        mid.push_back(0.5 * (pr.times[k] + pr.times[k + 1]));
        rate.push_back(std::max(0.0, (pr.norm_series[k] - pr.norm_series[k + 1]) / h));
        w.push_back(h);
    }
    out.rate.method = Method::cap_rate;
    out.rate.X = X;
    out.rate.times = std::move(mid);
    out.rate.density = std::move(rate);
    out.rate.weights = std::move(w);
    out.rate.captured = out.rate.integral();
    const auto tw = trapezoid_weights(pr.times);
    for (std::size_t k = 0; k < tw.size(); ++k) out.dwell += tw[k] * inside[k];
    const auto& fin = pr.final_state;
    for (std::size_t j = 0; j < fin.grid.n(); ++j) {
        const double r = std::norm(fin.amps[j]) * fin.grid.dx();
        if (fin.grid.x(j) < X) out.reflected += r;
        if (fin.grid.x(j) > b_max) out.transmitted += r;
    }
    return out;
}

// ---- chopping ---------------------------------------------------------------------

ChoppingResult chopping_run(const WaveFunction& psi0, double X, double dt_cut, double T) {
    if (!(dt_cut > 0.0)) throw std::invalid_argument("chopping period must be positive");
    if (norm_right_of(psi0, X) > 1e-10) throw SupportError("chopping needs the packet left of X");
    const std::size_t cuts = static_cast<std::size_t>(std::floor(T / dt_cut + 1e-9));
    ChoppingResult r;
    r.dist.method = Method::chopping;
    r.dist.X = X;
    r.dist.atoms = true;
    WaveFunction psi = psi0;
    const double dx = psi.grid.dx();
    // each cut spreads a little norm over all momenta; that part is allowed to wrap and
    // its size is reported instead of failing the run
    double edge = 0.0;
    for (std::size_t i = 1; i <= cuts; ++i) {
        psi = propagate_free_unchecked(psi, dt_cut);
        edge = std::max(edge, edge_mass(psi));
        double removed = 0.0;
        for (std::size_t j = 0; j < psi.grid.n(); ++j)
            if (psi.grid.x(j) >= X) {
                removed += std::norm(psi.amps[j]) * dx;
                psi.amps[j] = 0.0;
            }
        r.dist.times.push_back(psi0.t + static_cast<double>(i) * dt_cut);
        r.dist.density.push_back(removed);
        r.dist.weights.push_back(1.0);
        r.absorbed_total += removed;
    }
    r.dist.captured = r.absorbed_total;
    r.dist.metadata["max_edge_mass"] = std::to_string(edge);
    r.final_state = std::move(psi);
    return r;
}

MomentumAmplitudes chopping_momentum_map(const WaveFunction& psi0, double X, double dt_cut, double p_window) {
    const auto m0 = to_momentum(psi0);
    WaveFunction xpsi = psi0;
    for (std::size_t j = 0; j < xpsi.amps.size(); ++j) xpsi.amps[j] *= cplx(0.0, -psi0.grid.x(j) / psi0.units.hbar);
    const auto d0 = to_momentum(xpsi);
    const double hb = psi0.units.hbar, m = psi0.units.mass, dp = m0.dp;
    const std::size_t n = m0.p.size();
    cvec f(n), df(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = m0.p[i];
        const cplx ph = std::polar(1.0, -p * p * dt_cut / (2 * m * hb));
        f[i] = ph * m0.phi[i];
        df[i] = ph * (cplx(0.0, -p * dt_cut / (m * hb)) * m0.phi[i] + d0.phi[i]);
    }
    MomentumAmplitudes out{m0.p, cvec(n, 0.0), dp};
    parallel_for(n, [&](std::size_t k) {
        const double p = m0.p[k];
        if (std::abs(p) > p_window) return;
        // <p|Theta|p'> = delta/2 - (i/2pi) PV e^{i(p'-p)X/hbar}/(p'-p); the skipped diagonal
        // of the PV sum is restored by dp * d/dp' [e^{i(p'-p)X/hbar} f(p')] at p' = p
        cplx pv = 0.0;
        for (std::size_t q = 0; q < n; ++q) {
            if (q == k) continue;
            const double dq = m0.p[q] - p;
            pv += std::polar(1.0, dq * X / hb) * f[q] / dq;
        }
        pv = (pv + cplx(0.0, X / hb) * f[k] + df[k]) * dp;
        out.phi[k] = 0.5 * f[k] - cplx(0.0, 1.0 / (2 * pi)) * pv;
    });
    return out;
}

// ---- path-decomposition amplitude ----------------------------------------------------

ArrivalDistribution pde_amplitude(const WaveFunction& psi0, double X, const std::vector<double>& times,
                                  SupportPolicy policy) {
    if (policy == SupportPolicy::strict) {
        const double r = norm_right_of(psi0, X);
        if (r > 1e-10) {
            std::ostringstream os;
            os << "pde_amplitude: norm " << r << " right of X (strict support)";
            throw SupportError(os.str());
        }
    }
    const FreeEvolution fe(psi0);
    const double hb = psi0.units.hbar, m = psi0.units.mass;
    std::vector<double> A2(times.size());
    parallel_for(times.size(), [&](std::size_t i) {
        // A = (i hbar/2m) dK0/dX psi = -(i hbar/m) d_x psi_free(X,t)
        const cplx A = cplx(0.0, -hb / m) * fe.value_and_derivative(X, times[i]).second;
        A2[i] = std::norm(A);
    });
    auto d = make_dist(Method::pde_amp, X, times, std::move(A2));
    d = d.normalized_copy();
    d.metadata["heuristic"] = "true";
    d.metadata["support"] = policy == SupportPolicy::strict ? "strict" : "full_line";
    return d;
}

// ---- presence -------------------------------------------------------------------------

ArrivalDistribution presence_density(const WaveFunction& psi0, double X, const std::vector<double>& times) {
    const FreeEvolution fe(psi0);
    std::vector<double> rho(times.size());
    parallel_for(times.size(), [&](std::size_t i) { rho[i] = fe.density(X, times[i]); });
    return make_dist(Method::presence, X, times, std::move(rho));
}

MomentReport presence_time(const ArrivalDistribution& rho, double tol) {
    const double I = rho.integral();
    if (!(I >= 1e-14)) throw ZeroDensity("integral of rho(X,t) below 1e-14");
    double s = 0.0;
    for (std::size_t i = 0; i < rho.times.size(); ++i) s += rho.weights[i] * rho.density[i] * rho.times[i];
    MomentReport r;
    r.order = 1;
    r.value = s / I;
    r.tolerance = tol;
    r.tail_mass = rho.density.back() * rho.times.back() / I;
    r.converged = r.tail_mass < tol;
    return r;
}

// ---- backflow ---------------------------------------------------------------------------

WaveFunction two_component_state(const SpatialGrid& grid, const UnitSystem& u, const TwoComponentSpec& s,
                                 double X, double a, double phi) {
    const double hb = u.hbar, m = u.mass;
    const double x1 = X - s.p1 * s.t_focus / m, x2 = X - s.p2 * s.t_focus / m;
    auto g = [&](double p, double pc, double sg, double xc) {
        const double z = (p - pc) / sg;
        return std::pow(2 * pi * sg * sg, -0.25) * std::exp(-0.25 * z * z) * std::polar(1.0, -p * xc / hb);
    };
    auto psi = from_momentum_function(grid, u, [&](double p) -> cplx {
        if (p <= 0.0) return 0.0;
        const double cut = std::exp(-(s.p_cut / p) * (s.p_cut / p));
        return cut * (g(p, s.p1, s.sigma1, x1) + a * std::polar(1.0, phi) * g(p, s.p2, s.sigma2, x2));
    });
    psi.normalize();
    return psi;
}

NegativeInterval most_negative_interval(const std::vector<double>& t, const std::vector<double>& J) {
    NegativeInterval best;
    std::size_t i = 0;
    while (i < J.size()) {
        if (J[i] >= 0.0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < J.size() && J[j + 1] < 0.0) ++j;
        // trapezoid over the run, closing at the sign changes by linear interpolation
        double tb = t[i], te = t[j], s = 0.0;
        if (i > 0) {
            tb = t[i - 1] + (t[i] - t[i - 1]) * J[i - 1] / (J[i - 1] - J[i]);
            s += 0.5 * (t[i] - tb) * J[i];
        }
        for (std::size_t k = i; k < j; ++k) s += 0.5 * (t[k + 1] - t[k]) * (J[k] + J[k + 1]);
        if (j + 1 < J.size()) {
            te = t[j] + (t[j + 1] - t[j]) * J[j] / (J[j] - J[j + 1]);
            s += 0.5 * (te - t[j]) * J[j];
        }
        if (s < best.integral) best = {tb, te, s};
        i = j + 1;
    }
    return best;
}

BackflowResult backflow_search(const SpatialGrid& grid, const UnitSystem& u, const TwoComponentSpec& spec,
                               double X) {
    const auto times = uniform_times(0.0, spec.T, spec.n_t);
    auto scan = [&](const TwoComponentSpec& s) {
        // psi = psi1 + c psi2 is bilinear in c; evaluate both components once
        const auto psi1 = two_component_state(grid, u, s, X, 0.0, 0.0);
        TwoComponentSpec only2 = s;
        std::swap(only2.p1, only2.p2);
        std::swap(only2.sigma1, only2.sigma2);
        auto psi2 = two_component_state(grid, u, only2, X, 0.0, 0.0);
        const FreeEvolution f1(psi1), f2(psi2);
        cvec v1(times.size()), d1(times.size()), v2(times.size()), d2(times.size());
        parallel_for(times.size(), [&](std::size_t i) {
            std::tie(v1[i], d1[i]) = f1.value_and_derivative(X, times[i]);
            std::tie(v2[i], d2[i]) = f2.value_and_derivative(X, times[i]);
        });
        cplx ov = 0.0;
        for (std::size_t j = 0; j < grid.n(); ++j) ov += std::conj(psi1.amps[j]) * psi2.amps[j];
        ov *= grid.dx();
        // a is the amplitude ratio of the individually normalised components
        BackflowResult best;
        for (std::size_t ia = 0; ia < s.n_a; ++ia) {
            const double a = s.n_a > 1 ? s.a_min + (s.a_max - s.a_min) * static_cast<double>(ia) / static_cast<double>(s.n_a - 1)
                                       : s.a_min;
            for (std::size_t ip = 0; ip < s.n_phi; ++ip) {
                const double ph = 2 * pi * static_cast<double>(ip) / static_cast<double>(s.n_phi);
                const cplx c = a * std::polar(1.0, ph);
                const double nrm = 1.0 + a * a + 2.0 * std::real(c * ov);
                std::vector<double> J(times.size());
                for (std::size_t i = 0; i < times.size(); ++i)
                    J[i] = probability_current(v1[i] + c * v2[i], d1[i] + c * d2[i], u) / nrm;
                const auto neg = most_negative_interval(times, J);
                if (neg.integral < best.integral) {
                    best.integral = neg.integral;
                    best.t_begin = neg.t_begin;
                    best.t_end = neg.t_end;
                    best.a = a;
                    best.phi = ph;
                }
            }
        }
        return best;
    };
    BackflowResult best = scan(spec);
    if (!(best.integral < 0.0)) {
        TwoComponentSpec wide = spec;
        wide.a_min = 0.5 * spec.a_min;
        wide.a_max = 2.0 * spec.a_max;
        wide.n_a = 2 * spec.n_a;
        best = scan(wide);
        if (!(best.integral < 0.0)) throw NotFound("no negative-flux interval in the widened scan");
    }
    // the witness is rebuilt from scratch so its normalisation does not depend on the scan
    TwoComponentSpec w = spec;
    auto psi1 = two_component_state(grid, u, w, X, 0.0, 0.0);
    std::swap(w.p1, w.p2);
    std::swap(w.sigma1, w.sigma2);
    auto psi2 = two_component_state(grid, u, w, X, 0.0, 0.0);
    WaveFunction st = psi1;
    const cplx c = best.a * std::polar(1.0, best.phi);
    for (std::size_t j = 0; j < st.amps.size(); ++j) st.amps[j] += c * psi2.amps[j];
    st.normalize();
    best.state = std::move(st);
    best.negative_norm = momentum_norm_below(best.state, 0.0);
    return best;
}

} // namespace toa
