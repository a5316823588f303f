#include "toa/distribution.hpp"

#include "toa/errors.hpp"

#include <algorithm>
#include <cmath>

namespace toa {

namespace {
constexpr const char* kNames[] = {"flux", "kijowski", "abs_flux", "cap_rate", "chopping", "pde_amp", "presence", "first_passage"};
}

const char* method_name(Method m) { return kNames[static_cast<int>(m)]; }

std::optional<Method> method_from_name(const std::string& s) {
    for (int i = 0; i < 8; ++i)
        if (s == kNames[i]) return static_cast<Method>(i);
    return std::nullopt;
}

double ArrivalDistribution::integral() const {
    double s = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) s += weights[i] * density[i];
    return s;
}

std::vector<double> ArrivalDistribution::cumulative() const {
    // running sum of the quadrature, trapezoid-consistent for continuous curves
    std::vector<double> c(density.size(), 0.0);
    if (density.empty()) return c;
    if (atoms || times.size() < 2) {
        double s = 0.0;
        for (std::size_t i = 0; i < density.size(); ++i) c[i] = (s += weights[i] * density[i]);
        return c;
    }
    for (std::size_t i = 1; i < density.size(); ++i)
        c[i] = c[i - 1] + 0.5 * (times[i] - times[i - 1]) * (density[i] + density[i - 1]);
    return c;
}

ArrivalDistribution ArrivalDistribution::normalized_copy() const {
    const double I = integral();
    if (!(I > 0.0)) throw NotNormalizable(std::string(method_name(method)) + ": integral is not positive");
    ArrivalDistribution d = *this;
    for (auto& v : d.density) v /= I;
    for (auto& v : d.sigma) v /= I;
    d.captured = captured;
    d.normalized = true;
    return d;
}

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    std::vector<double> w(t.size(), 0.0);
    if (t.size() == 1) w[0] = 1.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double h = 0.5 * (t[i] - t[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    return w;
}

std::vector<double> uniform_times(double t0, double t1, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i)
        t[i] = n > 1 ? t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1) : t0;
    return t;
}

MomentReport moments(const ArrivalDistribution& d, int k, double tol) {
    if (k < 0) throw std::invalid_argument("moment order must be >= 0");
    const double I = d.integral();
    if (!(I > 0.0)) throw NotNormalizable(std::string(method_name(d.method)) + ": integral <= 0");
    double s = 0.0;
    for (std::size_t i = 0; i < d.density.size(); ++i) s += d.weights[i] * d.density[i] * std::pow(d.times[i], k);
    MomentReport r;
    r.order = k;
    r.value = s / I;
    r.tolerance = tol;
    // what a flat continuation of the last value over one more window would add
    const double tN = d.times.back();
    const double span = d.atoms ? 1.0 : tN - d.times.front();
    const double tail = std::abs(d.density.back()) * std::pow(std::abs(tN), k) * span;
    r.tail_mass = s != 0.0 ? tail / std::abs(s) : tail;
    r.converged = r.tail_mass < tol;
    return r;
}

double l1_distance(const ArrivalDistribution& a, const ArrivalDistribution& b) {
    const auto na = a.normalized ? a : a.normalized_copy();
    const auto nb = b.normalized ? b : b.normalized_copy();
    double s = 0.0;
    for (std::size_t i = 0; i < na.times.size(); ++i) {
        const double t = na.times[i];
        double vb = 0.0;
        if (t >= nb.times.front() && t <= nb.times.back()) {
            auto it = std::lower_bound(nb.times.begin(), nb.times.end(), t);
            std::size_t j = static_cast<std::size_t>(it - nb.times.begin());
            if (j == 0) vb = nb.density[0];
            else {
                const double f = (t - nb.times[j - 1]) / (nb.times[j] - nb.times[j - 1]);
                vb = (1 - f) * nb.density[j - 1] + f * nb.density[j];
            }
        }
        s += na.weights[i] * std::abs(na.density[i] - vb);
    }
    return s;
}

} // namespace toa
