#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfp/polynomial.hpp"

namespace lfp {

inline constexpr double kDefaultBoundaryThreshold = 1e-8;

struct Params {
    double h = 1.0;
    double gamma = 0.0;
    double rho = 0.5;

    // eps^2 = gamma * h / 2, always recomputed from (h, gamma).
    double eps2() const { return gamma * h / 2.0; }
    double eps() const;
};

Params make_params(double h, double gamma, double rho = 0.5);

// Uniform periodic phase-space grid. x_m = -L + m dx and xi_k = (pi h / L) k
// with k = j - N/2 for storage index j.
struct PhaseGrid {
    int n = 0;
    double L = 0.0;
    double h = 0.0;

    double dx() const { return 2.0 * L / n; }
    double dxi() const;
    double x(int m) const { return -L + m * dx(); }
    double xi(int j) const { return (j - n / 2) * dxi(); }
    double xi_max() const { return (n / 2) * dxi(); }
    double cell_area() const { return dx() * dxi(); }
    Eigen::VectorXd x_nodes() const;
    Eigen::VectorXd xi_nodes() const;

    bool operator==(const PhaseGrid& o) const { return n == o.n && L == o.L && h == o.h; }
};

PhaseGrid build_grid(int n_points, double halfwidth, double h);

// Non-fatal resolution advice (N >= 16 L^2 / (pi h)).
std::vector<std::string> grid_warnings(const PhaseGrid& grid);

// Real field on the grid, values(m, j) = a(x_m, xi_j). When the field was
// sampled from a closed form, the samples at the half-step points
// (x_m + dx/2, xi_j) are kept for quantization, and a polynomial source keeps
// derivatives exact.
struct SymbolField {
    PhaseGrid grid;
    Eigen::MatrixXd values;
    std::optional<double> time_tag;
    std::optional<Eigen::MatrixXd> midpoint_values;
    std::optional<Polynomial2> source;
};

struct ComplexField {
    PhaseGrid grid;
    Eigen::MatrixXcd values;
};

SymbolField make_field(const PhaseGrid& grid, Eigen::MatrixXd values);

struct Monomial {
    int j = 0;  // power of x
    int k = 0;  // power of xi
    double c = 0.0;
};

struct HamiltonianSpec {
    std::vector<Monomial> coeffs;

    Polynomial2 polynomial() const;
    int degree() const { return polynomial().degree(); }
    void validate() const;
};

struct AffineJump {
    double alpha = 0.0;  // coefficient of x
    double beta = 0.0;   // coefficient of xi
    double delta = 0.0;

    Polynomial2 polynomial() const;
};

struct JumpSpec {
    std::vector<AffineJump> components;

    void validate() const;
};

struct VectorFieldSpec {
    Polynomial2 vx;
    Polynomial2 vxi;

    std::array<double, 2> operator()(double x, double xi) const { return {vx(x, xi), vxi(x, xi)}; }
    Polynomial2 divergence() const { return vx.d_x() + vxi.d_xi(); }
    // Jacobian [[dvx/dx, dvx/dxi], [dvxi/dx, dvxi/dxi]].
    Eigen::Matrix2d jacobian(double x, double xi) const;
};

using PhasePoint = std::array<double, 2>;

SymbolField sample_symbol(const Polynomial2& p, const PhaseGrid& grid);
SymbolField sample_symbol(const HamiltonianSpec& p, const PhaseGrid& grid);
SymbolField sample_symbol(const AffineJump& l, const PhaseGrid& grid);
SymbolField sample_symbol(const std::function<double(double, double)>& f, const PhaseGrid& grid);

// Standard coherent symbol 2 exp(-((x-x0)^2 + (xi-xi0)^2)/h).
SymbolField coherent_symbol(const PhaseGrid& grid, double x0, double xi0);

double integral(const SymbolField& a);
double l1_norm(const SymbolField& a);
double l1_norm(const ComplexField& a);
double boundary_mass_fraction(const Eigen::MatrixXd& values);
double boundary_mass_fraction(const SymbolField& a);
void require_boundary_gate(const SymbolField& a, double threshold, const std::string& context);

// Trigonometric-interpolation derivative d^ax/dx^ax d^axi/dxi^axi. Fields
// with a polynomial source are differentiated exactly.
SymbolField spectral_derivative(const SymbolField& a, int ax, int axi,
                                double boundary_threshold = kDefaultBoundaryThreshold);

// sum over multi-indices |alpha| <= r of ||(scale d)^alpha a||_{L1}.
double sobolev_norm(const SymbolField& a, int r, double scale,
                    double boundary_threshold = kDefaultBoundaryThreshold);

VectorFieldSpec hamiltonian_vector_field(const HamiltonianSpec& p);
VectorFieldSpec hamiltonian_vector_field(const Polynomial2& p);

// RK4 with fixed substep min(1e-3, |t|/100). Throws FlowEscapeError when a
// trajectory leaves the disc of radius escape_radius.
std::vector<PhasePoint> flow_map(const VectorFieldSpec& v, double t,
                                 const std::vector<PhasePoint>& points,
                                 double escape_radius = 1e3);
PhasePoint flow_point(const VectorFieldSpec& v, double t, PhasePoint z,
                      double escape_radius = 1e3);

// Truncated Moyal expansion sum_{j<order} (1/j!) (h/2i)^j sigma(D)^j a(x)b(y)|_{y=x}.
ComplexField moyal_product(const SymbolField& a, const SymbolField& b, int order, double h);

// Poisson bracket {a, b} = d_xi a d_x b - d_x a d_xi b.
SymbolField poisson_bracket(const SymbolField& a, const SymbolField& b);

// Smallest eigenvalue of H H^T with columns H_l = (beta, -alpha).
double validate_ellipticity(const JumpSpec& jumps);

} // namespace lfp
