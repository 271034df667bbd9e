#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lfp/phasespace.hpp"
#include "lfp/weyl.hpp"

namespace lfp {

struct LindbladSystem {
    PhaseGrid grid;
    Params params;
    HamiltonianSpec p;
    JumpSpec jumps;
    Operator P;
    std::vector<Operator> Ls;
};

enum class LindbladMethod { Split, RK4, ExpmKrylov, EigClosed };

LindbladMethod parse_lindblad_method(const std::string& name);
std::string to_string(LindbladMethod m);

LindbladSystem assemble(const HamiltonianSpec& p, const JumpSpec& jumps, const Params& params,
                        const PhaseGrid& grid);

// (i/h)[P, A] - (gamma / 2h) sum_j [L_j, [L_j, A]], applied with FFTs.
Operator generator_apply(const LindbladSystem& sys, const Operator& A);

// Same generator from dense matrix products (reference implementation).
Operator generator_apply_dense(const LindbladSystem& sys, const Operator& A);

struct QuantumEvolveOptions {
    double t_final = 1.0;
    double dt = 1e-3;
    LindbladMethod method = LindbladMethod::Split;
    int snapshot_stride = 100;
    bool keep_states = true;
    bool compute_diagnostics = true;
    double c_stab = 1.5;
    double trace_drift_limit = 1e-8;  // per unit (1 + t)
    double herm_defect_limit = 1e-8;
    double positivity_limit = 1e-4;
    int krylov_dim = 30;
    // Called at every snapshot; the diagnostics pointer is null when they are not computed.
    std::function<void(double, const Operator&, const Diagnostics*)> observer;
};

struct QuantumTrajectory {
    std::vector<double> times;
    std::vector<Operator> states;
    std::vector<Diagnostics> diagnostics;
    Operator final_state;
    double dt_used = 0.0;
};

QuantumTrajectory evolve(const LindbladSystem& sys, const Operator& A0,
                         const QuantumEvolveOptions& opt);

// Largest |p| over the grid box, used for the rk4 step restriction.
double max_abs_symbol(const HamiltonianSpec& p, const PhaseGrid& grid);

} // namespace lfp
