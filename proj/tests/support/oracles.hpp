#pragma once
// Closed forms and brute-force references used as independent oracles.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using std::numbers::pi;

// free Gaussian flux at X = 0, closed form
inline double gaussian_flux_at_origin(double x0, double p0, double d, double t, double hb = 1, double m = 1) {
    const double alpha = t * x0 * hb * hb;
    const double D = (t * hb) * (t * hb) + (2 * d * d * m) * (2 * d * d * m);
    return std::sqrt(2 / pi) * (4 * d * d * d * d * p0 * m - alpha) * m * d * std::pow(D, -1.5) *
           std::exp(-2 * d * d * (x0 * x0 * m * m + 2 * m * p0 * t * x0 + p0 * p0 * t * t) / D);
}

// freely evolved minimum-uncertainty packet, psi(x,t)
inline cplx gaussian_free(double x, double t, double x0, double p0, double d, double hb = 1, double m = 1) {
    const cplx s = cplx(1.0, hb * t / (2 * m * d * d));
    const double xc = x - x0 - p0 * t / m;
    const cplx e = -xc * xc / (4 * d * d * s) + cplx(0, 1) * (p0 * (x - x0) / hb - p0 * p0 * t / (2 * m * hb)) +
                   cplx(0, 1) * p0 * x0 / hb;
    return std::pow(2 * pi * d * d, -0.25) / std::sqrt(s) * std::exp(e);
}

// free spreading law
inline double gaussian_var_x(double d, double t, double hb = 1, double m = 1) {
    const double s = hb * t / (2 * m * d);
    return d * d + s * s;
}

// Brownian first passage density from x0 to X
inline double brownian_first_passage(double L, double D, double t) {
    return std::abs(L) / std::sqrt(4 * pi * D * t * t * t) * std::exp(-L * L / (4 * D * t));
}

inline double brownian_first_passage_cdf(double L, double D, double t) {
    return std::erfc(std::abs(L) / std::sqrt(4 * D * t));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * pi); }

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5)), dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1, p2 = 0;
            for (int k = 1; k <= n; ++k) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2 * k - 1) * z * p2 - (k - 1) * p3) / k;
            }
            dp = n * (z * p1 - p2) / (z * z - 1);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = z;
        w[i] = 2 / ((1 - z * z) * dp * dp);
    }
}

// integral of f over [a, b] by composite Gauss-Legendre
template <class F>
double integrate(F f, double a, double b, int panels = 200, int order = 20) {
    std::vector<double> x, w;
    gauss_legendre(order, x, w);
    double s = 0, h = (b - a) / panels;
    for (int k = 0; k < panels; ++k) {
        const double c = a + (k + 0.5) * h;
        for (int i = 0; i < order; ++i) s += 0.5 * h * w[i] * f(c + 0.5 * h * x[i]);
    }
    return s;
}

// Classical free ensemble F = N(q; x0, sq) N(p; p0, sp) restricted to p > 0.
struct RightMoverGaussian {
    double x0, p0, sq, sp, m = 1;

    double Z() const { return normal_cdf(p0 / sp); }
    double fp(double p) const { return normal_pdf((p - p0) / sp) / sp / Z(); }
    double pmax() const { return p0 + 14 * sp; }

    // weight arriving at X during (ta, tb]: time integral of the flux over the bin
    double crossing_mass(double X, double ta, double tb) const {
        return integrate([&](double p) {
            return fp(p) * (normal_cdf((X - p * ta / m - x0) / sq) - normal_cdf((X - p * tb / m - x0) / sq));
        }, 0.0, pmax());
    }
    // flux J(X, t) = int F(X - pt/m, p) p/m dp
    double flux(double X, double t) const {
        return integrate([&](double p) { return fp(p) * normal_pdf((X - p * t / m - x0) / sq) / sq * p / m; }, 0.0,
                         pmax());
    }
    // int int F (X-q)m/p over arrivals within (0, T], closed form in q
    double first_moment(double X, double T) const {
        const double mu = X - x0;
        return integrate([&](double p) {
            const double a = -mu / sq, b = (p * T / m - mu) / sq;
            const double inner = mu * (normal_cdf(b) - normal_cdf(a)) - sq * (normal_pdf(b) - normal_pdf(a));
            return fp(p) * inner * m / p;
        }, 0.0, pmax());
    }
    double second_moment(double X, double T) const {
        const double mu = X - x0;
        return integrate([&](double p) {
            const double a = -mu / sq, b = (p * T / m - mu) / sq;
            // int_a^b (mu + sq z)^2 phi(z) dz
            const double inner = (mu * mu + sq * sq) * (normal_cdf(b) - normal_cdf(a)) -
                                 sq * ((2 * mu + sq * b) * normal_pdf(b) - (2 * mu + sq * a) * normal_pdf(a));
            return fp(p) * inner * (m / p) * (m / p);
        }, 0.0, pmax());
    }
    double arrived(double X, double T) const { return crossing_mass(X, 0.0, T); }
};

} // namespace oracle
