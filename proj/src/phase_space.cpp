#include "toa/phase_space.hpp"

#include "toa/arrival.hpp"
#include "toa/errors.hpp"
#include "toa/fft.hpp"
#include "toa/parallel.hpp"

#include <Eigen/QR>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace toa {

namespace {

using std::numbers::pi;

// 16-point Gauss-Legendre on [-1/2, 1/2]
const std::vector<std::pair<double, double>>& gl_half() {
    static const std::vector<std::pair<double, double>> nodes = [] {
        const int n = 16;
        std::vector<std::pair<double, double>> out;
        for (int i = 0; i < n; ++i) {
            double z = std::cos(pi * (i + 0.75) / (n + 0.5)), d = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (int k = 1; k <= n; ++k) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2 * k - 1) * z * p2 - (k - 1) * p3) / k;
                }
                d = n * (z * p1 - p2) / (z * z - 1);
                const double dz = p1 / d;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            out.emplace_back(0.5 * z, 1.0 / ((1 - z * z) * d * d));
        }
        return out;
    }();
    return nodes;
}

// Retained momenta p >= p_min on the ascending grid
struct Retained {
    std::size_t first = 0;
    std::vector<double> p;
};

Retained retained(const SpatialGrid& g, const UnitSystem& u, double p_min) {
    Retained r;
    const auto ps = g.ps(u);
    std::size_t i = 0;
    while (i < ps.size() && ps[i] < p_min) ++i;
    if (i == ps.size()) throw DomainError("no grid momentum at or above p_min");
    r.first = i;
    r.p.assign(ps.begin() + static_cast<std::ptrdiff_t>(i), ps.end());
    return r;
}

// Element tables for G_ab = sum_r T_r(a - b) V_r(a, b)
class Elements {
public:
    Elements(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u, const KernelSpec& k)
        : k_(k), r_(retained(grid, u, g.p_min)) {
        if (g.terms.empty()) throw std::invalid_argument("symbol has no separable terms");
        const std::size_t n = grid.n(), S = r_.p.size();
        const double dp = grid.dp(u);
        dp_ = dp;
        for (const auto& term : g.terms) {
            Table t;
            cvec uq(n);
            for (std::size_t j = 0; j < n; ++j) uq[j] = term.u(grid.x(j));
            const cvec f = fft_forward(uq);
            t.T.resize(2 * S - 1);
            for (std::ptrdiff_t d = -static_cast<std::ptrdiff_t>(S) + 1; d < static_cast<std::ptrdiff_t>(S); ++d) {
                const std::size_t bin = static_cast<std::size_t>(((d % static_cast<std::ptrdiff_t>(n)) + n) % n);
                t.T[d + S - 1] = f[bin] / static_cast<double>(n) * std::polar(1.0, -d * dp * grid.x_min() / u.hbar);
            }
            t.v.resize(S);
            for (std::size_t a = 0; a < S; ++a) t.v[a] = term.v(r_.p[a]);
            if (k.tag == KernelTag::weyl) {
                t.mid.resize(2 * S - 1);
                for (std::size_t s = 0; s < 2 * S - 1; ++s) t.mid[s] = term.v(0.5 * (r_.p[0] + r_.p[0]) + 0.5 * s * dp);
            }
            if (k.tag == KernelTag::born_jordan && term.v_integral) {
                t.V.resize(S);
                for (std::size_t a = 0; a < S; ++a) t.V[a] = term.v_integral(r_.p[a]);
            }
            t.fn = term.v;
            // u constant in q: the Toeplitz part is a multiple of the identity
            double off = 0.0;
            for (std::size_t i = 0; i < t.T.size(); ++i)
                if (i != S - 1) off = std::max(off, std::abs(t.T[i]));
            t.diagonal = off <= 1e-14 * std::max(std::abs(t.T[S - 1]), 1e-300);
            tables_.push_back(std::move(t));
        }
    }

    std::size_t size() const { return r_.p.size(); }
    const Retained& ret() const { return r_; }

    // row a of G times v
    cplx row_dot(std::size_t a, const cplx* v) const {
        const std::size_t S = r_.p.size();
        cplx s = 0.0;
        for (const auto& t : tables_) {
            if (t.diagonal) {
                s += t.T[S - 1] * t.v[a] * v[a];
                continue;
            }
            const cplx* T = t.T.data() + a + S - 1;  // T[-b] = T(a - b)
            cplx acc = 0.0;
            switch (k_.tag) {
            case KernelTag::weyl: {
                const double* m = t.mid.data() + a;
                for (std::size_t b = 0; b < S; ++b) acc += *(T - b) * (m[b] * v[b]);
                break;
            }
            case KernelTag::rivier: {
                const double va = t.v[a];
                for (std::size_t b = 0; b < S; ++b) acc += *(T - b) * (0.5 * (va + t.v[b]) * v[b]);
                break;
            }
            default:
                for (std::size_t b = 0; b < S; ++b) acc += *(T - b) * (weight(t, a, b) * v[b]);
            }
            s += acc;
        }
        return s;
    }

    cplx operator()(std::size_t a, std::size_t b) const {
        const std::size_t S = r_.p.size();
        cplx s = 0.0;
        for (const auto& t : tables_) s += t.T[a + S - 1 - b] * weight(t, a, b);
        return s;
    }

private:
    struct Table {
        cvec T;
        std::vector<double> v, mid, V;
        std::function<double(double)> fn;
        bool diagonal = false;
    };

    double weight(const Table& t, std::size_t a, std::size_t b) const {
        switch (k_.tag) {
        case KernelTag::weyl: return t.mid[a + b];
        case KernelTag::rivier: return 0.5 * (t.v[a] + t.v[b]);
        case KernelTag::born_jordan: {
            if (a == b) return t.v[a];
            if (!t.V.empty()) return (t.V[a] - t.V[b]) / (r_.p[a] - r_.p[b]);
            const double P = 0.5 * (r_.p[a] + r_.p[b]), D = r_.p[a] - r_.p[b];
            double s = 0.0;
            for (auto [x, w] : gl_half()) s += w * t.fn(P + x * D);
            return s;
        }
        case KernelTag::custom: {
            const double P = 0.5 * (r_.p[a] + r_.p[b]), D = r_.p[a] - r_.p[b];
            double s = 0.0;
            for (auto [x, w] : k_.nodes) s += w * t.fn(P + x * D);
            return s;
        }
        }
        return 0.0;
    }

    KernelSpec k_;
    Retained r_;
    double dp_ = 0.0;
    std::vector<Table> tables_;
};

} // namespace

double Symbol::operator()(double q, double p) const {
    if (p < p_min) return 0.0;
    double s = 0.0;
    for (const auto& t : terms) s += t.u(q) * t.v(p);
    return s;
}

double PhaseSpaceFunction::integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * dq * dp;
}

std::vector<double> PhaseSpaceFunction::q_marginal() const {
    std::vector<double> m(q.size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t k = 0; k < p.size(); ++k) m[i] += at(i, k) * dp;
    return m;
}

std::vector<double> PhaseSpaceFunction::p_marginal() const {
    std::vector<double> m(p.size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t k = 0; k < p.size(); ++k) m[k] += at(i, k) * dq;
    return m;
}

std::complex<double> KernelSpec::f(double theta, double tau, double hbar) const {
    const double z = theta * tau * hbar / 2;
    switch (tag) {
    case KernelTag::weyl: return 1.0;
    case KernelTag::rivier: return std::cos(z);
    case KernelTag::born_jordan: return std::abs(z) < 1e-8 ? 1.0 - z * z / 6 : std::sin(z) / z;
    case KernelTag::custom: {
        cplx s = 0.0;
        for (auto [x, w] : nodes) s += w * std::polar(1.0, 2 * z * x);
        return s;
    }
    }
    return 1.0;
}

std::string KernelSpec::name() const {
    switch (tag) {
    case KernelTag::weyl: return "weyl";
    case KernelTag::rivier: return "rivier";
    case KernelTag::born_jordan: return "born_jordan";
    case KernelTag::custom: return "custom";
    }
    return "custom";
}

KernelSpec kernel_from_name(const std::string& name) {
    if (name == "weyl") return KernelSpec::weyl();
    if (name == "rivier") return KernelSpec::rivier();
    if (name == "born_jordan") return KernelSpec::born_jordan();
    throw ConfigError("unknown kernel '" + name + "' (expected weyl, rivier or born_jordan)");
}

PhaseSpaceFunction wigner(const WaveFunction& psi) {
    const auto& g = psi.grid;
    const std::size_t n = g.n(), n2 = 2 * n;
    const double hb = psi.units.hbar;

    // spectral interpolation onto the half-spaced grid
    cvec f = fft_forward(psi.amps), up(n2, 0.0);
    for (std::size_t k = 0; k < n / 2; ++k) {
        up[k] = f[k];
        if (k > 0) up[n2 - k] = f[n - k];
    }
    up[n / 2] = 0.5 * f[n / 2];
    up[n2 - n / 2] = 0.5 * f[n / 2];
    cvec y = fft_backward(up);
    for (auto& c : y) c /= static_cast<double>(n);

    PhaseSpaceFunction W;
    W.q = g.xs();
    W.dq = g.dx();
    W.dp = 0.5 * g.dp(psi.units);
    W.p.resize(n2);
    for (std::size_t ip = 0; ip < n2; ++ip) W.p[ip] = (static_cast<double>(ip) - static_cast<double>(n)) * W.dp;
    W.values.assign(n * n2, 0.0);
    const double h = 0.5 * g.dx();
    const double c = h / (pi * hb);
    std::vector<double> worst(n, 0.0);
    parallel_for(n, [&](std::size_t j) {
        cvec a(n2, 0.0), out(n2);
        const auto m = static_cast<std::ptrdiff_t>(2 * j);
        for (std::ptrdiff_t l = -static_cast<std::ptrdiff_t>(n) + 1; l < static_cast<std::ptrdiff_t>(n); ++l) {
            const std::ptrdiff_t ip = m + l, im = m - l;
            if (ip < 0 || im < 0 || ip >= static_cast<std::ptrdiff_t>(n2) || im >= static_cast<std::ptrdiff_t>(n2)) continue;
            a[static_cast<std::size_t>((l + static_cast<std::ptrdiff_t>(n2)) % static_cast<std::ptrdiff_t>(n2))] =
                std::conj(y[ip]) * y[im];
        }
        fft_backward(a.data(), out.data(), n2);
        for (std::size_t ip = 0; ip < n2; ++ip) {
            // p index ip corresponds to k = ip - n
            const std::size_t k = (ip + n) % n2;
            const cplx v = c * out[k];
            W.values[j * n2 + ip] = v.real();
            const double im = std::abs(v.imag());
            if (!(im <= worst[j])) worst[j] = std::isnan(im) ? std::numeric_limits<double>::infinity() : im;
        }
    });
    const double w = *std::max_element(worst.begin(), worst.end());
    if (!(w <= 1e-10)) throw RealityError("Wigner imaginary residue " + std::to_string(w));
    return W;
}

PhaseSpaceFunction sample_symbol(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u) {
    const std::size_t n = grid.n(), n2 = 2 * n;
    PhaseSpaceFunction F;
    F.q = grid.xs();
    F.dq = grid.dx();
    F.dp = 0.5 * grid.dp(u);
    F.p.resize(n2);
    for (std::size_t ip = 0; ip < n2; ++ip) F.p[ip] = (static_cast<double>(ip) - static_cast<double>(n)) * F.dp;
    F.values.assign(n * n2, 0.0);
    // per term: u on q, v on p (zero below p_min), outer-product accumulate
    for (const auto& t : g.terms) {
        std::vector<double> uq(n), vp(n2, 0.0);
        for (std::size_t j = 0; j < n; ++j) uq[j] = t.u(F.q[j]);
        for (std::size_t k = 0; k < n2; ++k)
            if (F.p[k] >= g.p_min) vp[k] = t.v(F.p[k]);
        for (std::size_t j = 0; j < n; ++j) {
            if (uq[j] == 0.0) continue;
            for (std::size_t k = 0; k < n2; ++k) F.values[j * n2 + k] += uq[j] * vp[k];
        }
    }
    F.symbol = g;
    F.kernel = "symbol";
    return F;
}

double ps_expectation(const PhaseSpaceFunction& F, const PhaseSpaceFunction& g) {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); };
    if (F.q.size() != g.q.size() || F.p.size() != g.p.size() || F.values.size() != g.values.size() ||
        !close(F.dq, g.dq) || !close(F.dp, g.dp) || F.q.empty() || !close(F.q.front(), g.q.front()) ||
        !close(F.p.front(), g.p.front()))
        throw GridMismatch("phase-space grids differ");
    double s = 0.0;
    for (std::size_t i = 0; i < F.values.size(); ++i) s += F.values[i] * g.values[i];
    return s * F.dq * F.dp;
}

Symbol arrival_time_symbol(double X, double mass, double p_min) {
    if (!(p_min > 0)) throw DomainError("arrival-time symbol needs p_min > 0");
    Symbol g;
    g.name = "arrival_time";
    g.p_min = p_min;
    auto inv = [](double p) { return 1.0 / p; };
    auto lg = [](double p) { return std::log(p); };
    g.terms.push_back({[=](double) { return X * mass; }, inv, lg});
    g.terms.push_back({[=](double q) { return -q * mass; }, inv, lg});
    return g;
}

Symbol flux_symbol(const SpatialGrid& grid, double X, double mass) {
    const double xj = grid.x(grid.index_of(X)), dx = grid.dx();
    Symbol g;
    g.name = "flux";
    g.terms.push_back({[=](double q) { return std::abs(q - xj) < 0.5 * dx ? 1.0 / dx : 0.0; },
                       [=](double p) { return p / mass; }, [=](double p) { return 0.5 * p * p / mass; }});
    return g;
}

QuantizedOperator quantize(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u, const KernelSpec& k) {
    if (std::abs(k.f(0, 0) - 1.0) > 1e-12) throw std::invalid_argument("kernel must satisfy f(0,0) = 1");
    const Elements E(g, grid, u, k);
    const std::size_t S = E.size();
    QuantizedOperator op;
    op.p = E.ret().p;
    op.first = E.ret().first;
    op.kernel = k;
    op.matrix.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
    parallel_for(S, [&](std::size_t a) {
        for (std::size_t b = 0; b < S; ++b) op.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = E(a, b);
    });
    const double nrm = op.matrix.norm();
    op.hermiticity = nrm > 0 ? (op.matrix - op.matrix.adjoint()).norm() / nrm : 0.0;
    if (op.hermiticity > 1e-8)
        throw HermiticityError("kernel '" + k.name() + "' gives a non-hermitian operator (" +
                               std::to_string(op.hermiticity) + ")");
    return op;
}

QuantizedOperator quantize(const PhaseSpaceFunction& g, const SpatialGrid& grid, const UnitSystem& u,
                           const KernelSpec& k) {
    if (!g.symbol) throw std::invalid_argument("phase-space function carries no separable symbol");
    if (g.q.size() != grid.n()) throw GridMismatch("symbol sampled on a different grid");
    return quantize(*g.symbol, grid, u, k);
}

Eigen::VectorXcd apply_quantized(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u, const KernelSpec& k,
                                 const Eigen::VectorXcd& v) {
    const Elements E(g, grid, u, k);
    const std::size_t S = E.size();
    if (static_cast<std::size_t>(v.size()) != S) throw GridMismatch("vector length differs from retained momenta");
    Eigen::VectorXcd out(static_cast<Eigen::Index>(S));
    parallel_for(S, [&](std::size_t a) { out(static_cast<Eigen::Index>(a)) = E.row_dot(a, v.data()); });
    return out;
}

QuantizedOperator symmetric_time_operator(const SpatialGrid& grid, const UnitSystem& u, double X, double p_min) {
    // position operator in the momentum basis, built independently of the kernel tables
    const Retained r = retained(grid, u, p_min);
    const std::size_t n = grid.n(), S = r.p.size();
    Eigen::MatrixXcd F(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(S));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t a = 0; a < S; ++a)
            F(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) =
                std::polar(1.0 / std::sqrt(static_cast<double>(n)), r.p[a] * grid.x(j) / u.hbar);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) x(static_cast<Eigen::Index>(j)) = grid.x(j);
    const Eigen::MatrixXcd Q = F.adjoint() * x.asDiagonal() * F;
    Eigen::VectorXd inv(static_cast<Eigen::Index>(S));
    for (std::size_t a = 0; a < S; ++a) inv(static_cast<Eigen::Index>(a)) = 1.0 / r.p[a];
    QuantizedOperator op;
    op.p = r.p;
    op.first = r.first;
    op.kernel = KernelSpec::rivier();
    op.matrix = Eigen::MatrixXcd(u.mass * X * inv.asDiagonal()) -
                0.5 * u.mass * (Q * inv.asDiagonal() + inv.asDiagonal() * Q);
    return op;
}

double resolved_difference(const QuantizedOperator& a, const QuantizedOperator& b, const SpatialGrid& grid,
                           const UnitSystem& u, double width) {
    if (a.first != b.first || a.p.size() != b.p.size()) throw GridMismatch("operators on different momentum sets");
    const double sp = u.hbar / (2 * width);
    // frame tails must vanish at the momentum cut and at Nyquist
    const double p_lo = a.p.front() + 10 * sp, p_hi = grid.p_nyquist(u) - 10 * sp;
    if (!(p_hi > p_lo)) throw DomainError("no resolved momentum band on this grid");
    if (10 * width > grid.length() / 4) throw DomainError("coherent frame too wide for the box");
    const double L = grid.length(), c = 0.5 * (grid.x_min() + grid.x_max());
    std::vector<std::pair<double, double>> centres;
    for (double q = c - L / 4; q <= c + L / 4 + 1e-12; q += 2 * width)
        for (double p = p_lo; p <= p_hi + 1e-12; p += 2 * sp) centres.emplace_back(q, p);
    const auto S = static_cast<Eigen::Index>(a.p.size());
    const double dp = grid.dp(u);
    Eigen::MatrixXcd C(S, static_cast<Eigen::Index>(centres.size()));
    for (std::size_t k = 0; k < centres.size(); ++k) {
        const auto [q0, p0] = centres[k];
        for (Eigen::Index i = 0; i < S; ++i) {
            const double p = a.p[static_cast<std::size_t>(i)];
            C(i, static_cast<Eigen::Index>(k)) = std::sqrt(dp) * std::pow(2 * pi * sp * sp, -0.25) *
                                                 std::exp(-(p - p0) * (p - p0) / (4 * sp * sp)) *
                                                 std::polar(1.0, -p * q0 / u.hbar);
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(C);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    const Eigen::MatrixXcd B = Eigen::MatrixXcd(qr.householderQ()).leftCols(rank);
    const Eigen::MatrixXcd Da = B.adjoint() * (a.matrix - b.matrix) * B;
    const Eigen::MatrixXcd Db = B.adjoint() * b.matrix * B;
    auto spec = [](const Eigen::MatrixXcd& M) {
        const Eigen::MatrixXcd H = 0.5 * (M + M.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    };
    return spec(Da) / spec(Db);
}

Eigen::VectorXcd windowed_time_eigenstate(const SpatialGrid& grid, const UnitSystem& u, double X, double t,
                                          double p_min, std::size_t first) {
    const auto ps = grid.ps(u);
    const double top = 0.9 * std::min(grid.p_nyquist(u), (X - grid.x_min()) * u.mass / t);
    if (!(top > 4 * p_min)) throw DomainError("grid too small for a windowed time eigenstate");
    const double a0 = 0.15 * top, a1 = 0.45 * top, b0 = 0.7 * top, b1 = top;
    auto win = [&](double p) {
        if (p <= a0 || p >= b1) return 0.0;
        if (p < a1) return std::pow(std::sin(0.5 * pi * (p - a0) / (a1 - a0)), 2);
        if (p > b0) return std::pow(std::cos(0.5 * pi * (p - b0) / (b1 - b0)), 2);
        return 1.0;
    };
    const std::size_t S = ps.size() - first;
    Eigen::VectorXcd v(static_cast<Eigen::Index>(S));
    for (std::size_t a = 0; a < S; ++a) {
        const double p = ps[first + a];
        v(static_cast<Eigen::Index>(a)) =
            win(p) * std::sqrt(std::max(p, 0.0)) * std::polar(1.0, (p * p * t / (2 * u.mass) - p * X) / u.hbar);
    }
    return v;
}

double eigen_residual(const SpatialGrid& grid, const UnitSystem& u, double X, double t, const KernelSpec& k) {
    const double p_min = 0.5 * grid.dp(u);
    const Symbol g = arrival_time_symbol(X, u.mass, p_min);
    const Retained r = retained(grid, u, p_min);
    const auto v = windowed_time_eigenstate(grid, u, X, t, p_min, r.first);
    const auto Gv = apply_quantized(g, grid, u, k, v);
    return (Gv - t * v).norm() / v.norm();
}

ArrivalOperatorReport arrival_operator_check(const WaveFunction& psi0, double X, const ArrivalOperatorOptions& opt) {
    const auto& grid = psi0.grid;
    const auto& u = psi0.units;
    const double ex = excluded_momentum_norm(psi0);
    if (ex > 1e-4) throw DomainError("state has norm " + std::to_string(ex) + " near or below p = 0");
    const double p_min = 0.5 * grid.dp(u);
    const Symbol g = arrival_time_symbol(X, u.mass, p_min);
    const Retained r = retained(grid, u, p_min);
    const auto m = to_momentum(psi0);
    Eigen::VectorXcd v(static_cast<Eigen::Index>(r.p.size()));
    for (std::size_t a = 0; a < r.p.size(); ++a) v(static_cast<Eigen::Index>(a)) = std::sqrt(m.dp) * m.phi[r.first + a];
    const auto Gv = apply_quantized(g, grid, u, opt.kernel, v);

    ArrivalOperatorReport rep;
    rep.p_min = p_min;
    rep.average = psi0.t + v.dot(Gv).real() / v.squaredNorm();
    rep.reference = time_operator_average(psi0, X).value;
    rep.relative_gap = std::abs(rep.average - rep.reference) / std::abs(rep.reference);
    rep.eigen_time = opt.eigen_time;
    rep.eigen_residual = eigen_residual(grid, u, X, opt.eigen_time, opt.kernel);
    if (opt.refine) {
        const double c = 0.5 * (grid.x_min() + grid.x_max()), L = grid.length();
        const SpatialGrid fine(c - L, c + L, 4 * grid.n());
        rep.refined_residual = eigen_residual(fine, u, X, opt.eigen_time, opt.kernel);
        rep.refinement_ratio = rep.eigen_residual / rep.refined_residual;
    }
    return rep;
}

CrossingRecord heisenberg_crossings(const PhaseSpaceEnsemble& ens, double X, double T, const UnitSystem& u,
                                    const HeisenbergOptions& opt) {
    if (opt.kernel != KernelTag::weyl || !opt.free_motion)
        throw UnsupportedError("Heisenberg images are only available for free motion with the Weyl kernel");
    CrossingRecord c;
    c.X = X;
    c.T = T;
    const std::size_t n = ens.samples.size();
    c.t1.assign(n, std::numeric_limits<double>::quiet_NaN());
    c.domain.assign(n, false);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = ens.samples[i];
        if (e.p == 0.0) continue;
        const double t = (X - e.q) * u.mass / e.p;
        if (t > 0.0 && t <= T) {
            c.t1[i] = t;
            c.domain[i] = true;
            c.N1 += e.w;
            s += e.w * t;
        }
    }
    if (!(c.N1 > 0.0)) throw EmptyDomain("no sample reaches X within (0, T]");
    c.mean = s / c.N1;
    return c;
}

} // namespace toa
