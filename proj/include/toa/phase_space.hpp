#pragma once

#include "toa/classical.hpp"
#include "toa/grid.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace toa {

// g(q,p) = sum_r u_r(q) v_r(p). v_integral, when given, is an antiderivative of v and
// makes the Born-Jordan rule exact.
struct SymbolTerm {
    std::function<double(double)> u;
    std::function<double(double)> v;
    std::function<double(double)> v_integral;
};

struct Symbol {
    std::string name;
    std::vector<SymbolTerm> terms;
    // momenta below p_min are excluded (the symbol is singular there)
    double p_min = -std::numeric_limits<double>::infinity();

    double operator()(double q, double p) const;
};

// Values on the phase-space grid: q = spatial grid points, p = k dp/2 for k = -n..n-1.
// Row-major, values[iq * p.size() + ip].
struct PhaseSpaceFunction {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> values;
    double dq = 0.0;
    double dp = 0.0;
    std::string kernel = "weyl";
    std::optional<Symbol> symbol;

    double at(std::size_t iq, std::size_t ip) const { return values[iq * p.size() + ip]; }
    double integral() const;
    std::vector<double> q_marginal() const;  // integrate over p
    std::vector<double> p_marginal() const;  // integrate over q
};

enum class KernelTag { weyl, rivier, born_jordan, custom };

// Kernels of the form f(theta, tau) = sum_k mu_k exp(i theta tau hbar s_k): the rule then
// evaluates v at P + s_k (p' - p''), P the mean momentum. Born-Jordan is the uniform
// measure on [-1/2, 1/2]; a custom kernel lists its own nodes.
struct KernelSpec {
    KernelTag tag = KernelTag::weyl;
    std::vector<std::pair<double, double>> nodes;  // (s, mu), custom only

    static KernelSpec weyl() { return {KernelTag::weyl, {}}; }
    static KernelSpec rivier() { return {KernelTag::rivier, {}}; }
    static KernelSpec born_jordan() { return {KernelTag::born_jordan, {}}; }
    static KernelSpec custom(std::vector<std::pair<double, double>> nodes) { return {KernelTag::custom, std::move(nodes)}; }

    std::complex<double> f(double theta, double tau, double hbar = 1.0) const;
    std::string name() const;
};

KernelSpec kernel_from_name(const std::string& name);

PhaseSpaceFunction wigner(const WaveFunction& psi);
PhaseSpaceFunction sample_symbol(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u = {});
double ps_expectation(const PhaseSpaceFunction& F, const PhaseSpaceFunction& g);

// (X - q) m / p on p >= p_min
Symbol arrival_time_symbol(double X, double mass, double p_min);
// normalised single-column indicator at the grid point nearest X, times p/m
Symbol flux_symbol(const SpatialGrid& grid, double X, double mass);

struct QuantizedOperator {
    std::vector<double> p;       // retained momenta, ascending
    std::size_t first = 0;       // grid index of p[0]
    Eigen::MatrixXcd matrix;     // in the orthonormal discrete momentum basis
    double hermiticity = 0.0;    // ||G - G^+||_F / ||G||_F
    KernelSpec kernel;
};

// Dense operator on the momentum grid; HermiticityError past 1e-8.
QuantizedOperator quantize(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u, const KernelSpec& k);
QuantizedOperator quantize(const PhaseSpaceFunction& g, const SpatialGrid& grid, const UnitSystem& u,
                           const KernelSpec& k);

// Matrix-free action of the same operator on a vector over the retained momenta.
Eigen::VectorXcd apply_quantized(const Symbol& g, const SpatialGrid& grid, const UnitSystem& u, const KernelSpec& k,
                                 const Eigen::VectorXcd& v);

// X m / p - (m/2)(q 1/p + 1/p q) compressed onto p >= p_min
QuantizedOperator symmetric_time_operator(const SpatialGrid& grid, const UnitSystem& u, double X, double p_min);

// Spectral norm of a - b relative to b, compressed onto the span of coherent states
// (position width `width`) centred in the inner half of the box, with momenta at least
// ten momentum widths away from the cut and from Nyquist.
double resolved_difference(const QuantizedOperator& a, const QuantizedOperator& b, const SpatialGrid& grid,
                           const UnitSystem& u, double width = 1.0);

struct ArrivalOperatorReport {
    double average = 0.0;            // <t-hat> from the quantized matrix
    double reference = 0.0;          // time_operator_average
    double relative_gap = 0.0;
    double eigen_time = 5.0;
    double eigen_residual = 0.0;     // ||(G - t)|t>|| / |||t>|| on the given grid
    double refined_residual = 0.0;   // same on (2L, 4n)
    double refinement_ratio = 0.0;
    double p_min = 0.0;
};

struct ArrivalOperatorOptions {
    double eigen_time = 5.0;
    bool refine = true;
    KernelSpec kernel = KernelSpec::weyl();
};

// Windowed <p|t> on the grid: sin^2 ramps, support kept inside the box and below Nyquist
Eigen::VectorXcd windowed_time_eigenstate(const SpatialGrid& grid, const UnitSystem& u, double X, double t,
                                          double p_min, std::size_t first);
double eigen_residual(const SpatialGrid& grid, const UnitSystem& u, double X, double t, const KernelSpec& k);

ArrivalOperatorReport arrival_operator_check(const WaveFunction& psi0, double X,
                                             const ArrivalOperatorOptions& opt = {});

struct CrossingRecord {
    double X = 0.0;
    double T = 0.0;
    std::vector<double> t1;       // NaN outside D_1
    std::vector<bool> domain;     // D_1 mask
    double N1 = 0.0;
    double mean = 0.0;            // <t_1>
};

struct HeisenbergOptions {
    KernelTag kernel = KernelTag::weyl;
    bool free_motion = true;
};

CrossingRecord heisenberg_crossings(const PhaseSpaceEnsemble& ens, double X, double T, const UnitSystem& u = {},
                                    const HeisenbergOptions& opt = {});

} // namespace toa
