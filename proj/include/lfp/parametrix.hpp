#pragma once

#include <array>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "lfp/phasespace.hpp"

namespace lfp {

enum class DiffusionProfile {
    Identity,  // A = I
    Tanh,      // A(x) = diag(1 + a tanh(x1), 1 + a tanh(x2))
};

// Q = eps^2 div(A grad) + v . grad on R^2.
struct ParabolicProblem {
    std::string name;
    VectorFieldSpec v;
    DiffusionProfile profile = DiffusionProfile::Identity;
    double amplitude = 0.3;
    double eps = 0.25;
};

// Cases "heat" (v = 0), "linear-hyperbolic" (v = (x, -xi)) and "variable-A"
// (v = (x, -xi) with the tanh profile).
ParabolicProblem make_problem(const std::string& case_name, double eps);
void validate(const ParabolicProblem& prob);
Eigen::Matrix2d diffusion_tensor(const ParabolicProblem& prob, PhasePoint x);

// phi^{-t}(y) for the field v.
PhasePoint backward_center(const ParabolicProblem& prob, PhasePoint y, double t);

// Periodic n x n sampling box used for kernels in x.
struct KernelGrid {
    int n = 64;
    PhasePoint center{0.0, 0.0};
    std::array<double, 2> halfwidth{1.0, 1.0};

    double spacing(int axis) const { return 2.0 * halfwidth[axis] / n; }
    double coord(int axis, int i) const { return center[axis] - halfwidth[axis] + i * spacing(axis); }
    PhasePoint point(int i, int j) const { return {coord(0, i), coord(1, j)}; }
    double cell_area() const { return spacing(0) * spacing(1); }
};

// Box centered at phi^{-t}(y) covering `widths` standard deviations of both
// K0 and the Gaussian moment solution of the full equation.
KernelGrid kernel_grid_for(const ParabolicProblem& prob, PhasePoint y, double t, int n = 64,
                           double widths = 8.0);

enum class KernelKind { K0, R1, Rk, Kj };

struct KernelField {
    KernelGrid grid;
    PhasePoint y{0.0, 0.0};
    double t = 0.0;
    Eigen::MatrixXd values;
    KernelKind kind = KernelKind::K0;
    int order = 0;
};

double l1_norm(const KernelField& k);
double mass(const KernelField& k);

struct Quadrature {
    int n_t = 32;   // midpoint nodes in theta, s = t sin^2(pi theta / 2)
    int q = 8;      // Gauss-Hermite nodes per axis in z
    bool verify_halving = true;
    double halving_tol = 0.01;
};

double k0_value(const ParabolicProblem& prob, PhasePoint x, PhasePoint y, double t);
// R1 = -(d_t - Q) K0 by exact differentiation.
double r1_value(const ParabolicProblem& prob, PhasePoint x, PhasePoint y, double t);

KernelField k0_kernel(const ParabolicProblem& prob, PhasePoint y, double t, const KernelGrid& grid);

// R1 on the grid: Q applied spectrally in x, d_t by a centered difference of width 1e-4.
KernelField residual_r1(const ParabolicProblem& prob, PhasePoint y, double t, const KernelGrid& grid);
KernelField residual_r1_pointwise(const ParabolicProblem& prob, PhasePoint y, double t,
                                  const KernelGrid& grid);

// Spectral Q K on the kernel grid.
Eigen::MatrixXd apply_generator(const ParabolicProblem& prob, const KernelGrid& grid,
                                const Eigen::MatrixXd& values);

// (d_t - Q) applied to a kernel family on one grid.
KernelField heat_residual(const ParabolicProblem& prob, const std::function<KernelField(double)>& family,
                          double t, double delta = 1e-4);

// R_k for k in {1, 2}: Duhamel convolution of R1 with R1.
KernelField rk_iterate(const ParabolicProblem& prob, int k, PhasePoint y, double t, const KernelGrid& grid,
                       const Quadrature& quad = {});

// K_j for j in {0, 1}.
KernelField kj_assemble(const ParabolicProblem& prob, int j, PhasePoint y, double t, const KernelGrid& grid,
                        const Quadrature& quad = {});

struct BoundFit {
    double C = 0.0;  // prefactor, normalized by (eps^2 t)
    double c = 0.0;  // Gaussian rate in |x - phi^{-t} y|^2 / (eps^2 t)
    int points = 0;
};

// Least squares fit of log|K| = log(C / (eps^2 t)) - c |x - phi^{-t} y|^2 / (eps^2 t)
// over |K| > 1e-12 max|K|.
BoundFit gaussian_bound_fit(const KernelField& field, const ParabolicProblem& prob);

} // namespace lfp
