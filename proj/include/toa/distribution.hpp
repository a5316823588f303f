#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toa {

// first_passage tags classical absorbed-flux histograms
enum class Method { flux, kijowski, abs_flux, cap_rate, chopping, pde_amp, presence, first_passage };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& s);

// Density on a time grid with explicit quadrature weights: integral = sum w_i rho_i.
// Continuous curves carry trapezoid weights, histograms their bin widths, atoms weight 1.
struct ArrivalDistribution {
    Method method = Method::flux;
    double X = 0.0;
    std::vector<double> times;
    std::vector<double> density;
    std::vector<double> weights;
    std::vector<double> sigma;  // one-standard-error band per point (Monte Carlo only)
    double captured = 0.0;  // integral before normalisation
    bool normalized = false;
    bool atoms = false;
    std::map<std::string, std::string> metadata;

    double integral() const;
    std::vector<double> cumulative() const;
    ArrivalDistribution normalized_copy() const;
};

std::vector<double> trapezoid_weights(const std::vector<double>& t);
std::vector<double> uniform_times(double t0, double t1, std::size_t n);

struct MomentReport {
    int order = 1;
    double value = 0.0;
    double tail_mass = 0.0;  // estimate of what lies beyond the horizon, relative to the moment
    bool converged = false;
    double tolerance = 1e-3;
};

MomentReport moments(const ArrivalDistribution& d, int k, double tol = 1e-3);

// L1 distance between two normalised densities; b is interpolated linearly onto a's grid
double l1_distance(const ArrivalDistribution& a, const ArrivalDistribution& b);

} // namespace toa
