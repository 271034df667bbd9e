#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfp/phasespace.hpp"

namespace lfp {

// D = sum_j w_j w_j^T with w_j = H_{l_j} = (beta_j, -alpha_j).
struct DiffusionMatrix {
    Eigen::Matrix2d D;
};

DiffusionMatrix diffusion_matrix(const JumpSpec& jumps);

// Q a = H_p a + eps^2 div(D grad a).
SymbolField generator_apply(const SymbolField& a, const HamiltonianSpec& p, const JumpSpec& jumps,
                            const Params& params,
                            double boundary_threshold = kDefaultBoundaryThreshold);

enum class FpScheme {
    Spectral,        // exact diffusion, Fourier-shift shears, pseudo-spectral mixed transport
    SemiLagrangian,  // exact diffusion, interpolation at flowed departure points
};

FpScheme parse_fp_scheme(const std::string& name);
std::string to_string(FpScheme s);

struct ClassicalEvolveOptions {
    double t_final = 1.0;
    double dt = 1e-3;
    int snapshot_stride = 100;
    FpScheme scheme = FpScheme::Spectral;
    int interpolation_order = 3;  // semi-Lagrangian only: 1 or 3
    double boundary_threshold = kDefaultBoundaryThreshold;
    double mass_drift_limit = 1e-8;  // relative to the initial L1 mass, per unit (1 + t)
    double l1_growth_limit = 1e-8;
    bool keep_fields = true;
    std::function<void(double, const SymbolField&)> observer;
};

struct ClassicalTrajectory {
    std::vector<double> times;
    std::vector<SymbolField> fields;
    std::vector<double> masses;
    std::vector<double> l1_norms;
    SymbolField final_field;
    double dt_used = 0.0;
};

ClassicalTrajectory evolve(const SymbolField& a0, const HamiltonianSpec& p, const JumpSpec& jumps,
                           const Params& params, const ClassicalEvolveOptions& opt);

// Exact transport a(t, z) = a0(phi^t z) for gamma = 0 with closed-form data;
// samples node and half-step values at each requested time.
std::vector<SymbolField> transport_characteristics(const std::function<double(double, double)>& a0,
                                                   const HamiltonianSpec& p, const PhaseGrid& grid,
                                                   const std::vector<double>& times);

// ||(eps d_x)^k a(t)||_{L1} / ||a0||_{L1}.
double smoothing_probe(const SymbolField& a0, const HamiltonianSpec& p, const JumpSpec& jumps,
                       const Params& params, double t, int k, double dt = 1e-3);

// Second moment of the x-marginal about its mean.
double x_marginal_variance(const SymbolField& a);

} // namespace lfp
