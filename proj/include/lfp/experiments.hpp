#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfp/fokker_planck.hpp"
#include "lfp/io.hpp"
#include "lfp/lindblad.hpp"
#include "lfp/oracle.hpp"
#include "lfp/parametrix.hpp"

namespace lfp {

struct InitialSpec {
    std::string kind = "mixture";  // "mixture" or "identity"
    GaussianMixture mixture;
};

struct TimeSpec {
    double dt = 1e-3;
    double t_final = 1.0;
    int snapshot_stride = 100;
};

struct SolverOptions {
    LindbladMethod lindblad_method = LindbladMethod::Split;
    std::string fp_scheme = "auto";  // auto, spectral, semi-lagrangian
    int fp_interpolation_order = 3;
    std::string initial_state = "quantized";  // quantized or projector
    bool write_operator_snapshots = false;
    int krylov_dim = 30;
};

struct Thresholds {
    double boundary_mass = kDefaultBoundaryThreshold;
    double positivity = 1e-4;
    double trace_drift = 1e-8;
    double herm_defect = 1e-8;
    double mass_drift = 1e-8;
    double memory_cap_mb = 8192.0;
};

struct RunConfig {
    Params params;
    int n_points = 256;
    double halfwidth = 4.0;
    HamiltonianSpec hamiltonian;
    JumpSpec jumps;
    InitialSpec initial;
    TimeSpec time;
    SolverOptions solver;
    Thresholds thresholds;
};

// Field-for-field JSON mapping; unknown keys are rejected with ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Checks every invariant of the referenced modules; returns non-fatal warnings.
std::vector<std::string> validate_config(const RunConfig& c);

PhaseGrid config_grid(const RunConfig& c);
SymbolField initial_field(const RunConfig& c);
Operator initial_operator(const RunConfig& c, const SymbolField& a0);
double estimated_memory_mb(const RunConfig& c);

struct RunResult {
    std::vector<io::MetricsRow> metrics;
    std::vector<std::string> warnings;
    std::vector<SymbolField> fields;    // classical snapshots
    std::vector<Operator> states;       // quantum snapshots (when kept)
    double wall_seconds = 0.0;
};

struct RunOptions {
    bool keep_states = false;
    bool keep_fields = false;
    bool write_snapshots = true;
};

// Evolves both pictures and records the distance series. With a non-empty
// out_dir writes snapshots/, metrics.csv and provenance.json; a FAILED marker
// is left next to partial artifacts when a gate trips.
RunResult run(const RunConfig& config, const std::filesystem::path& out_dir, const RunOptions& opt = {});

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r2 = 0.0;
    int points = 0;
};

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct SweepPoint {
    double h = 0.0;
    double gamma = 0.0;
    int n_points = 0;
    double halfwidth = 0.0;
    double t = 0.0;
    double trace_dist = 0.0;
};

struct SweepReport {
    std::vector<SweepPoint> points;
    std::vector<std::pair<double, LinearFit>> h_fits;  // per gamma: log td vs log h at t_eval
    std::vector<SweepPoint> time_series;               // all snapshot rows of every run
    bool floor_detected = false;
    bool complete = true;
    std::string failure;
};

// Grid rule for each h: n_points scaled as 1/h from the base config,
// halfwidth fixed. An explicit list overrides it.
struct SweepGrid {
    double h = 0.0;
    int n_points = 0;
    double halfwidth = 0.0;
};

SweepReport scaling_sweep(const RunConfig& base, const std::vector<double>& h_list,
                          const std::vector<double>& gamma_list, double t_eval,
                          const std::vector<SweepGrid>& grids = {},
                          const std::filesystem::path& out_dir = {});

struct CorrectionReport {
    std::vector<double> times;
    std::vector<double> uncorrected;
    std::vector<double> corrected;
    double halving_change = 0.0;  // relative L1 change of the final correction under stride halving
    int order = 2;
};

// a2(t) = a(t) - int_0^t e^{(t-s)Q} e1(s) ds with e1 = Q a - dequantize(L quantize a),
// trapezoid rule over `checkpoints` equally spaced times.
CorrectionReport higher_order_correction(const RunConfig& config, int order = 2, int checkpoints = 32);

struct KernelRow {
    std::string kernel;  // K0, R1, R2, K1
    double l1 = 0.0;
    double mass = 0.0;
    std::optional<BoundFit> fit;
};

struct ParametrixCaseRow {
    double eps = 0.0;
    double t = 1.0;
    std::vector<KernelRow> kernels;
    double r2_over_r1 = 0.0;
    double identity_rel = 0.0;      // ||(d_t - Q) K1 + R2|| / ||R2||
    double r1_constant = 0.0;       // max_t ||R1|| / (1 + eps t^{-1/2}) over t in {0.1, ..., 1}
    double r1_grid_mismatch = 0.0;  // grid residual vs exact differentiation, relative L1
};

struct ParametrixReport {
    std::string case_name;
    PhasePoint y{1.0, 0.0};
    std::vector<ParametrixCaseRow> rows;
    double r1_constant_band = 0.0;  // max / min of r1_constant over eps
    bool all_fits_positive = true;
};

ParametrixReport parametrix_report(const std::string& case_name, const std::vector<double>& eps_list,
                                   const std::filesystem::path& out_dir = {}, PhasePoint y = {1.0, 0.0},
                                   double t = 1.0, int grid_n = 64, const Quadrature& quad = {});

nlohmann::json to_json(const ParametrixReport& r);
nlohmann::json to_json(const SweepReport& r);
nlohmann::json to_json(const CorrectionReport& r);

struct OracleCheck {
    double l1_error = 0.0;       // relative to the initial L1 norm
    double width_error = 0.0;    // |x variance - Sigma_xx|
    std::vector<double> times;
    std::vector<double> errors;
};

// Fokker-Planck solver against the Gaussian moment flow for quadratic p.
OracleCheck oracle_check(const RunConfig& config);

struct Figure1Report {
    double trace_dist_open = 0.0;
    double trace_dist_closed = 0.0;
    double ratio = 0.0;
};

// Quartic p, jumps {x, xi}: runs gamma = 1 and gamma = 0 and compares the final trace distances.
Figure1Report figure1(const RunConfig& base, const std::filesystem::path& out_dir = {});

// Configurations used by the headline experiments.
RunConfig quadratic_example_config(double h, double gamma, int n_points, double halfwidth, double t_final);
RunConfig quartic_config(double h, double gamma, int n_points, double halfwidth, double t_final,
                         PhasePoint z0 = {0.5, 0.5});

} // namespace lfp
