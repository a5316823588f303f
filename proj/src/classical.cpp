#include "toa/classical.hpp"

#include "toa/errors.hpp"
#include "toa/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace toa {

namespace {

constexpr std::uint64_t kBridgeOffset = 1ULL << 40;
constexpr std::size_t kChunks = 256;

// Accumulation runs over fixed chunks and is reduced in chunk order, so results do
// not depend on the number of threads.
template <class Acc, class Body>
std::vector<Acc> chunked(std::size_t n, const Acc& proto, Body body) {
    const std::size_t nc = std::min(kChunks, std::max<std::size_t>(n, 1));
    std::vector<Acc> acc(nc, proto);
    parallel_for(nc, [&](std::size_t c) {
        const std::size_t lo = n * c / nc, hi = n * (c + 1) / nc;
        for (std::size_t i = lo; i < hi; ++i) body(acc[c], i);
    });
    return acc;
}

void check_spec(const DiffusionSpec& s) {
    if (!(s.D > 0) || !(s.dt > 0) || !(s.T > 0) || !(s.x0 < s.X))
        throw std::invalid_argument("diffusion spec needs D > 0, dt > 0, T > 0, x0 < X");
}

// sequential normals along one path, using both halves of each Box-Muller pair
struct PathNormals {
    const CounterRng& r;
    std::uint64_t k = 0;
    double spare = 0.0;

    double next() {
        if (k & 1) {
            ++k;
            return spare;
        }
        auto [a, b] = r.normal_pair(k >> 1);
        spare = b;
        ++k;
        return a;
    }
};

// Brownian-bridge probability of touching X between two points below it
bool bridge_hit(const CounterRng& r, std::uint64_t k, double gap0, double gap1, double inv2Ddt) {
    const double e = 2.0 * gap0 * gap1 * inv2Ddt;
    if (e > 40.0) return false;
    return r.uniform(kBridgeOffset + k) < std::exp(-e);
}

} // namespace

std::pair<double, double> CounterRng::normal_pair(std::uint64_t c) const {
    const double u1 = uniform(2 * c), u2 = uniform(2 * c + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

double PhaseSpaceEnsemble::total_weight() const {
    double s = 0.0;
    for (const auto& x : samples) s += x.w;
    return s;
}

void PhaseSpaceEnsemble::normalize() {
    for (const auto& x : samples)
        if (!(x.w >= 0.0)) throw std::invalid_argument("ensemble weights must be nonnegative");
    const double s = total_weight();
    if (!(s > 0.0)) throw std::invalid_argument("ensemble has zero weight");
    for (auto& x : samples) x.w /= s;
}

double PassageRecord::absorbed_fraction() const {
    double s = 0.0;
    for (std::size_t i = 0; i < crossings.size(); ++i)
        if (!crossings[i].empty()) s += weights[i];
    return s;
}

PhaseSpaceEnsemble sample_gaussian_ensemble(double x0, double p0, double sigma_q, double sigma_p, std::size_t n,
                                            std::uint64_t seed, bool right_movers_only) {
    if (!(sigma_q > 0) || !(sigma_p > 0) || n == 0) throw std::invalid_argument("need sigma_q, sigma_p > 0 and n >= 1");
    if (right_movers_only) {
        const double acc = 0.5 * std::erfc(-p0 / (sigma_p * std::numbers::sqrt2));
        if (acc < 1e-3)
            throw RejectionStall("right-mover acceptance " + std::to_string(acc) + " below 1e-3");
    }
    PhaseSpaceEnsemble e;
    e.right_movers_only = right_movers_only;
    e.samples.resize(n);
    const double w = 1.0 / static_cast<double>(n);
    parallel_for(n, [&](std::size_t i) {
        CounterRng r(seed, i);
        const double q = x0 + sigma_q * r.normal(0);
        double p = 0.0;
        for (std::uint64_t c = 1;; ++c) {
            p = p0 + sigma_p * r.normal(c);
            if (!right_movers_only || p > 0.0) break;
        }
        e.samples[i] = {q, p, w};
    });
    return e;
}

PassageRecord passage_times_free(const PhaseSpaceEnsemble& ens, double X, double T, const UnitSystem& u) {
    PassageRecord rec;
    rec.X = X;
    rec.T = T;
    rec.crossings.resize(ens.samples.size());
    rec.weights.resize(ens.samples.size());
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        const auto& s = ens.samples[i];
        rec.weights[i] = s.w;
        if (s.p == 0.0) continue;
        const double t = (X - s.q) * u.mass / s.p;
        if (t > 0.0 && t <= T) rec.crossings[i].push_back(t);
    }
    return rec;
}

PassageRecord passage_times_potential(const PhaseSpaceEnsemble& ens, const std::function<double(double)>& V,
                                      double X, double dt, double T, const UnitSystem& u,
                                      const PotentialPassageOptions& opt) {
    if (!(dt > 0) || !(T > 0)) throw std::invalid_argument("dt and T must be positive");
    const std::size_t n = ens.samples.size();
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    const double h = opt.fd_step;
    auto force = [&](double q) { return -(V(q + h) - V(q - h)) / (2 * h); };

    PassageRecord rec;
    rec.X = X;
    rec.T = T;
    rec.crossings.resize(n);
    rec.weights.resize(n);
    std::vector<double> drift(n, 0.0);

    parallel_for(n, [&](std::size_t i) {
        const auto& s = ens.samples[i];
        rec.weights[i] = s.w;
        double q = s.q, p = s.p;
        const double E0 = p * p / (2 * u.mass) + V(q);
        double scale = std::max(std::abs(E0), p * p / (2 * u.mass));
        double worst = 0.0;
        int side = (q > X) - (q < X);
        double f = force(q);
        for (std::size_t k = 0; k < steps; ++k) {
            const double t0 = k * dt;
            const double tau = std::min(dt, T - t0);
            const double q_prev = q;
            p += 0.5 * tau * f;
            q += tau * p / u.mass;
            f = force(q);
            p += 0.5 * tau * f;
            const int now = (q > X) - (q < X);
            if (now != 0) {
                // a touch at X (now == 0) keeps the previous side: grazing is not a crossing
                if (side != 0 && now != side) rec.crossings[i].push_back(t0 + tau * (X - q_prev) / (q - q_prev));
                side = now;
            }
            const double E = p * p / (2 * u.mass) + V(q);
            scale = std::max(scale, p * p / (2 * u.mass));
            worst = std::max(worst, std::abs(E - E0));
        }
        drift[i] = scale > 0 ? worst / scale : worst;
    });
    const double d = *std::max_element(drift.begin(), drift.end());
    if (d > opt.energy_tol)
        throw StepSizeError("leapfrog relative energy drift " + std::to_string(d) + " exceeds tolerance; halve dt");
    return rec;
}

ArrivalDistribution absorbed_flux_histogram(const PassageRecord& rec, double t0, double t1, std::size_t bins,
                                            bool normalize) {
    if (rec.crossings.empty()) throw std::invalid_argument("empty passage record");
    if (bins == 0 || !(t1 > t0)) throw std::invalid_argument("need bins >= 1 and t1 > t0");
    const double w = (t1 - t0) / static_cast<double>(bins);
    std::vector<double> mass(bins, 0.0), m2(bins, 0.0);
    double absorbed = 0.0, total = 0.0;
    for (std::size_t i = 0; i < rec.crossings.size(); ++i) {
        total += rec.weights[i];
        if (rec.crossings[i].empty()) continue;
        absorbed += rec.weights[i];
        const double t = rec.crossings[i].front();
        if (t < t0 || t > t1) continue;
        auto b = static_cast<std::size_t>((t - t0) / w);
        if (b >= bins) b = bins - 1;
        mass[b] += rec.weights[i];
        m2[b] += rec.weights[i] * rec.weights[i];
    }
    if (absorbed <= 0.0) throw EmptyAbsorption("no sample reached X before the horizon");

    ArrivalDistribution d;
    d.method = Method::first_passage;
    d.X = rec.X;
    for (std::size_t b = 0; b < bins; ++b) {
        d.times.push_back(t0 + (b + 0.5) * w);
        d.weights.push_back(w);
        d.density.push_back(mass[b] / w);
        // weighted binomial error: sum w_i^2 scaled by (1 - bin share)
        const double share = total > 0 ? mass[b] / total : 0.0;
        d.sigma.push_back(std::sqrt(std::max(0.0, m2[b] * (1.0 - share))) / w);
    }
    d.captured = absorbed;
    d.metadata["absorbed_fraction"] = std::to_string(absorbed);
    d.metadata["horizon"] = std::to_string(rec.T);
    if (normalize) {
        for (auto& v : d.density) v /= absorbed;
        for (auto& v : d.sigma) v /= absorbed;
        d.normalized = true;
    }
    return d;
}

MomentReport mean_passage_time(const PassageRecord& rec, double tol) {
    double wt = 0.0, w = 0.0, pending = 0.0;
    for (std::size_t i = 0; i < rec.crossings.size(); ++i) {
        if (rec.crossings[i].empty()) {
            pending += rec.weights[i];
            continue;
        }
        wt += rec.weights[i] * rec.crossings[i].front();
        w += rec.weights[i];
    }
    if (w <= 0.0) throw EmptyAbsorption("no sample reached X before the horizon");
    MomentReport m;
    m.order = 1;
    m.tolerance = tol;
    m.value = wt / w;
    // samples still out at T contribute at least T each to the true mean
    m.tail_mass = pending * rec.T / wt;
    m.converged = m.tail_mass < tol;
    return m;
}

std::vector<double> diffusion_passage_samples(const DiffusionSpec& spec, std::size_t n) {
    check_spec(spec);
    const auto steps = static_cast<std::size_t>(std::llround(spec.T / spec.dt));
    const double sd = std::sqrt(2 * spec.D * spec.dt);
    const double inv2Ddt = 1.0 / (2 * spec.D * spec.dt);
    std::vector<double> out(n, -1.0);
    parallel_for(n, [&](std::size_t i) {
        const CounterRng r(spec.seed, i);
        PathNormals g{r};
        double x = spec.x0;
        for (std::size_t k = 0; k < steps; ++k) {
            const double y = x + sd * g.next();
            if (y >= spec.X) {
                out[i] = (k + (spec.X - x) / (y - x)) * spec.dt;
                return;
            }
            if (bridge_hit(r, k, spec.X - x, spec.X - y, inv2Ddt)) {
                out[i] = (k + 0.5) * spec.dt;
                return;
            }
            x = y;
        }
    });
    return out;
}

ArrivalDistribution diffusion_first_passage(const DiffusionSpec& spec, std::size_t n, std::size_t bins) {
    const auto t = diffusion_passage_samples(spec, n);
    PassageRecord rec;
    rec.X = spec.X;
    rec.T = spec.T;
    rec.crossings.resize(n);
    rec.weights.assign(n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        if (t[i] >= 0) rec.crossings[i].push_back(t[i]);
    auto d = absorbed_flux_histogram(rec, 0.0, spec.T, bins, false);
    d.metadata["D"] = std::to_string(spec.D);
    return d;
}

RenewalReport renewal_residual(const DiffusionSpec& spec, double x, std::size_t n, const RenewalOptions& opt) {
    check_spec(spec);
    if (!(x < spec.X)) throw std::invalid_argument("renewal point must lie below X");
    if (n < 2 || opt.n_times == 0) throw std::invalid_argument("need n >= 2 and at least one time");
    const auto steps = static_cast<std::size_t>(std::llround(spec.T / spec.dt));
    const double dt = spec.dt, sd = std::sqrt(2 * spec.D * dt), h = opt.bin_width;
    const double lo = x - 0.5 * h, hi = x + 0.5 * h;
    auto in_bin = [&](double y) { return y >= lo && y < hi; };

    std::vector<std::size_t> ks;
    for (std::size_t j = 1; j <= opt.n_times; ++j)
        ks.push_back(std::max<std::size_t>(1, steps * j / opt.n_times));
    const std::size_t nk = ks.size();
    const double dn = static_cast<double>(n);

    // Three independent path sets, distinguished by the stream index.
    // (a) free paths from x0, sampled exactly at the report times
    struct FreeAcc { std::vector<double> c; };
    auto fa = chunked(n, FreeAcc{std::vector<double>(nk, 0.0)}, [&](FreeAcc& a, std::size_t i) {
        const CounterRng r(spec.seed, 3 * i);
        double y = spec.x0;
        std::size_t prev = 0;
        for (std::size_t j = 0; j < nk; ++j) {
            y += std::sqrt(2 * spec.D * dt * (ks[j] - prev)) * r.normal(j);
            prev = ks[j];
            if (in_bin(y)) a.c[j] += 1.0;
        }
    });
    // (b) absorbed paths from x0: survivors in the bin, and first-passage mass per step
    struct AbsAcc { std::vector<double> surv, fp; };
    auto aa = chunked(n, AbsAcc{std::vector<double>(nk, 0.0), std::vector<double>(steps, 0.0)},
                      [&](AbsAcc& a, std::size_t i) {
        const CounterRng r(spec.seed, 3 * i + 1);
        PathNormals g{r};
        double y = spec.x0;
        std::size_t j = 0;
        const double inv2Ddt = 1.0 / (2 * spec.D * dt);
        for (std::size_t k = 0; k < steps; ++k) {
            const double z = y + sd * g.next();
            if (z >= spec.X || bridge_hit(r, k, spec.X - y, spec.X - z, inv2Ddt)) {
                a.fp[k] += 1.0;
                return;
            }
            y = z;
            if (j < nk && ks[j] == k + 1) {
                if (in_bin(y)) a.surv[j] += 1.0;
                ++j;
            }
        }
    });
    // (c) free restarts from X, sampled at lags (m + 1/2) dt
    struct ResAcc { std::vector<double> c; };
    auto ra = chunked(n, ResAcc{std::vector<double>(steps, 0.0)}, [&](ResAcc& a, std::size_t i) {
        const CounterRng r(spec.seed, 3 * i + 2);
        PathNormals g{r};
        double y = spec.X + std::sqrt(spec.D * dt) * g.next();
        for (std::size_t m = 0; m < steps; ++m) {
            if (m > 0) y += sd * g.next();
            if (in_bin(y)) a.c[m] += 1.0;
        }
    });

    std::vector<double> pf(nk, 0.0), p0(nk, 0.0), fp(steps, 0.0), rs(steps, 0.0);
    for (const auto& a : fa)
        for (std::size_t j = 0; j < nk; ++j) pf[j] += a.c[j];
    for (const auto& a : aa) {
        for (std::size_t j = 0; j < nk; ++j) p0[j] += a.surv[j];
        for (std::size_t k = 0; k < steps; ++k) fp[k] += a.fp[k];
    }
    for (const auto& a : ra)
        for (std::size_t m = 0; m < steps; ++m) rs[m] += a.c[m];
    for (auto& v : fp) v /= dn;  // first-passage mass per step
    std::vector<double> rs_sd(steps);
    for (std::size_t m = 0; m < steps; ++m) {
        const double q = rs[m] / dn;
        rs_sd[m] = std::sqrt(q * (1 - q) / dn) / h;
        rs[m] = q / h;
    }

    RenewalReport rep;
    double scale = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
        const std::size_t K = ks[j];
        const double qf = pf[j] / dn, qs = p0[j] / dn;
        double conv = 0.0, a2m = 0.0, rband = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double a = rs[K - k - 1];
            conv += fp[k] * a;
            a2m += a * a * fp[k];
            rband += fp[k] * rs_sd[K - k - 1];
        }
        const double lhs = qf / h, pabs = qs / h;
        // per-path variable of the absorbed set: 1/h if surviving in the bin, -a_k if absorbed in step k
        const double ey = pabs - conv;
        const double vy = (qs / (h * h) + a2m - ey * ey) / dn;
        const double vf = qf * (1 - qf) / dn / (h * h);
        const double sig = std::sqrt(vf + std::max(0.0, vy) + rband * rband);
        rep.times.push_back(K * dt);
        rep.lhs.push_back(lhs);
        rep.absorbed.push_back(pabs);
        rep.convolution.push_back(conv);
        rep.sigma.push_back(sig);
        const double r = std::abs(lhs - pabs - conv);
        rep.residual = std::max(rep.residual, r);
        rep.max_sigma = std::max(rep.max_sigma, sig);
        rep.max_ratio = std::max(rep.max_ratio, sig > 0 ? r / sig : (r > 0 ? INFINITY : 0.0));
        scale = std::max(scale, lhs);
    }
    if (!(scale > 0.0) || rep.max_sigma > 0.25 * scale)
        throw StatisticsError("Monte Carlo band " + std::to_string(rep.max_sigma) + " too wide against density scale " +
                              std::to_string(scale) + "; raise n");
    return rep;
}

} // namespace toa
