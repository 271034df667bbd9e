#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lfp/phasespace.hpp"

namespace lfp {

struct GaussianState {
    double weight = 1.0;
    PhasePoint center{0.0, 0.0};
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
    bool pure_flag = false;
};

// Validates symmetry, positive definiteness and, for pure states,
// det(2 Sigma / h) = 1 within 1e-8.
GaussianState make_gaussian_state(double weight, PhasePoint center, const Eigen::Matrix2d& covariance,
                                  bool pure_flag, double h);

// Pure state with covariance (h/2) I.
GaussianState coherent_state(PhasePoint center, double h, double weight = 1.0);

struct GaussianMixture {
    std::vector<GaussianState> components;
};

GaussianMixture make_mixture(std::vector<GaussianState> components);

// Explicit widths (a(t), b(t)) of the solvable example p = x xi with jumps {x, xi}.
std::pair<double, double> example_widths(double h, double eps, double t);

// Exact Gaussian solution for quadratic p and affine jumps:
// m(t) = phi^{-t}(m0), Sigma' = -F Sigma - Sigma F^T + 2 eps^2 D.
GaussianState moment_flow(const GaussianState& g, const HamiltonianSpec& p, const JumpSpec& jumps,
                          const Params& params, double t);

// sum_i w_i (h / sqrt(det Sigma_i)) exp(-<r, Sigma_i^{-1} r>/2), with exact
// half-step samples, so that the integral over 2 pi h is the total weight.
SymbolField mixture_field(const GaussianMixture& mix, const PhaseGrid& grid, double h,
                          double boundary_threshold = kDefaultBoundaryThreshold);

} // namespace lfp
