#include "lfp/experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lfp/errors.hpp"

#ifndef LFP_VERSION
#define LFP_VERSION "0.0.0"
#endif

namespace lfp {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::function<double(double, double)> mixture_evaluator(const GaussianMixture& mix, double h) {
    return [mix, h](double x, double xi) {
        double v = 0.0;
        for (const auto& g : mix.components) {
            const Eigen::Vector2d r(x - g.center[0], xi - g.center[1]);
            v += g.weight * h / std::sqrt(g.covariance.determinant()) *
                 std::exp(-0.5 * r.dot(g.covariance.inverse() * r));
        }
        return v;
    };
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback) {
    return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
    return obj.at(key);
}

FpScheme resolve_scheme(const std::string& name) {
    if (name == "auto") return FpScheme::Spectral;
    return parse_fp_scheme(name);
}

int snapshot_count(const RunConfig& c) {
    const int steps = std::max(1, static_cast<int>(std::ceil(c.time.t_final / c.time.dt - 1e-9)));
    return steps / c.time.snapshot_stride + 2;
}

std::string snapshot_name(const std::string& stem, int index) {
    std::ostringstream os;
    os << stem << '_' << std::setw(4) << std::setfill('0') << index << ".lfps";
    return os.str();
}

int power_of_two_at_least(double n) {
    int p = 16;
    while (p < n - 1e-9) p *= 2;
    return p;
}

} // namespace

RunConfig parse_config(const json& j) {
    try {
        check_keys(j, {"params", "grid", "hamiltonian", "jumps", "initial", "time", "solver", "thresholds"},
                   "config");
        RunConfig c;
        const json& pj = require(j, "params", "config");
        check_keys(pj, {"h", "gamma", "rho"}, "params");
        c.params = make_params(require(pj, "h", "params").get<double>(), require(pj, "gamma", "params").get<double>(),
                               get_or(pj, "rho", 0.5));

        const json& gj = require(j, "grid", "config");
        check_keys(gj, {"n_points", "halfwidth"}, "grid");
        c.n_points = require(gj, "n_points", "grid").get<int>();
        c.halfwidth = require(gj, "halfwidth", "grid").get<double>();

        const json& hj = require(j, "hamiltonian", "config");
        check_keys(hj, {"coeffs"}, "hamiltonian");
        for (const auto& m : require(hj, "coeffs", "hamiltonian")) {
            check_keys(m, {"j", "k", "c"}, "hamiltonian coefficient");
            c.hamiltonian.coeffs.push_back({require(m, "j", "coefficient").get<int>(),
                                            require(m, "k", "coefficient").get<int>(),
                                            require(m, "c", "coefficient").get<double>()});
        }

        const json& jj = require(j, "jumps", "config");
        check_keys(jj, {"components"}, "jumps");
        for (const auto& l : require(jj, "components", "jumps")) {
            check_keys(l, {"alpha", "beta", "delta"}, "jump component");
            c.jumps.components.push_back({get_or(l, "alpha", 0.0), get_or(l, "beta", 0.0), get_or(l, "delta", 0.0)});
        }

        const json& ij = require(j, "initial", "config");
        check_keys(ij, {"kind", "components"}, "initial");
        c.initial.kind = get_or<std::string>(ij, "kind", "mixture");
        if (c.initial.kind == "mixture") {
            std::vector<GaussianState> comps;
            for (const auto& g : require(ij, "components", "initial")) {
                check_keys(g, {"weight", "center", "covariance", "pure"}, "initial component");
                const auto center = require(g, "center", "initial component").get<std::vector<double>>();
                if (center.size() != 2) throw ConfigError("component center must have two entries");
                const double w = get_or(g, "weight", 1.0);
                if (g.contains("covariance")) {
                    const auto cov = g.at("covariance").get<std::vector<std::vector<double>>>();
                    if (cov.size() != 2 || cov[0].size() != 2 || cov[1].size() != 2) {
                        throw ConfigError("component covariance must be 2x2");
                    }
                    Eigen::Matrix2d S;
                    S << cov[0][0], cov[0][1], cov[1][0], cov[1][1];
                    comps.push_back(make_gaussian_state(w, {center[0], center[1]}, S, get_or(g, "pure", false),
                                                        c.params.h));
                } else {
                    comps.push_back(coherent_state({center[0], center[1]}, c.params.h, w));
                }
            }
            c.initial.mixture = make_mixture(std::move(comps));
        } else if (c.initial.kind != "identity") {
            throw ConfigError("initial.kind must be 'mixture' or 'identity'");
        }

        const json& tj = require(j, "time", "config");
        check_keys(tj, {"dt", "t_final", "snapshot_stride"}, "time");
        c.time.dt = require(tj, "dt", "time").get<double>();
        c.time.t_final = require(tj, "t_final", "time").get<double>();
        c.time.snapshot_stride = get_or(tj, "snapshot_stride", 100);

        if (j.contains("solver")) {
            const json& sj = j.at("solver");
            check_keys(sj, {"lindblad_method", "fp_scheme", "fp_interpolation_order", "initial_state",
                            "write_operator_snapshots", "krylov_dim"},
                       "solver");
            c.solver.lindblad_method = parse_lindblad_method(get_or<std::string>(sj, "lindblad_method", "split"));
            c.solver.fp_scheme = get_or<std::string>(sj, "fp_scheme", "auto");
            c.solver.fp_interpolation_order = get_or(sj, "fp_interpolation_order", 3);
            c.solver.initial_state = get_or<std::string>(sj, "initial_state", "quantized");
            c.solver.write_operator_snapshots = get_or(sj, "write_operator_snapshots", false);
            c.solver.krylov_dim = get_or(sj, "krylov_dim", 30);
        }
        if (j.contains("thresholds")) {
            const json& th = j.at("thresholds");
            check_keys(th, {"boundary_mass", "positivity", "trace_drift", "herm_defect", "mass_drift", "memory_cap_mb"},
                       "thresholds");
            c.thresholds.boundary_mass = get_or(th, "boundary_mass", c.thresholds.boundary_mass);
            c.thresholds.positivity = get_or(th, "positivity", c.thresholds.positivity);
            c.thresholds.trace_drift = get_or(th, "trace_drift", c.thresholds.trace_drift);
            c.thresholds.herm_defect = get_or(th, "herm_defect", c.thresholds.herm_defect);
            c.thresholds.mass_drift = get_or(th, "mass_drift", c.thresholds.mass_drift);
            c.thresholds.memory_cap_mb = get_or(th, "memory_cap_mb", c.thresholds.memory_cap_mb);
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

RunConfig load_config(const fs::path& path) { return parse_config(io::read_json(path)); }

json to_json(const RunConfig& c) {
    json j;
    j["params"] = {{"h", c.params.h}, {"gamma", c.params.gamma}, {"rho", c.params.rho}};
    j["grid"] = {{"n_points", c.n_points}, {"halfwidth", c.halfwidth}};
    j["hamiltonian"]["coeffs"] = json::array();
    for (const auto& m : c.hamiltonian.coeffs) j["hamiltonian"]["coeffs"].push_back({{"j", m.j}, {"k", m.k}, {"c", m.c}});
    j["jumps"]["components"] = json::array();
    for (const auto& l : c.jumps.components) {
        j["jumps"]["components"].push_back({{"alpha", l.alpha}, {"beta", l.beta}, {"delta", l.delta}});
    }
    j["initial"]["kind"] = c.initial.kind;
    if (c.initial.kind == "mixture") {
        j["initial"]["components"] = json::array();
        for (const auto& g : c.initial.mixture.components) {
            const auto& S = g.covariance;
            j["initial"]["components"].push_back({{"weight", g.weight},
                                                  {"center", {g.center[0], g.center[1]}},
                                                  {"covariance", {{S(0, 0), S(0, 1)}, {S(1, 0), S(1, 1)}}},
                                                  {"pure", g.pure_flag}});
        }
    }
    j["time"] = {{"dt", c.time.dt}, {"t_final", c.time.t_final}, {"snapshot_stride", c.time.snapshot_stride}};
    j["solver"] = {{"lindblad_method", to_string(c.solver.lindblad_method)},
                   {"fp_scheme", c.solver.fp_scheme},
                   {"fp_interpolation_order", c.solver.fp_interpolation_order},
                   {"initial_state", c.solver.initial_state},
                   {"write_operator_snapshots", c.solver.write_operator_snapshots},
                   {"krylov_dim", c.solver.krylov_dim}};
    j["thresholds"] = {{"boundary_mass", c.thresholds.boundary_mass},
                       {"positivity", c.thresholds.positivity},
                       {"trace_drift", c.thresholds.trace_drift},
                       {"herm_defect", c.thresholds.herm_defect},
                       {"mass_drift", c.thresholds.mass_drift},
                       {"memory_cap_mb", c.thresholds.memory_cap_mb}};
    return j;
}

PhaseGrid config_grid(const RunConfig& c) { return build_grid(c.n_points, c.halfwidth, c.params.h); }

double estimated_memory_mb(const RunConfig& c) {
    const double mat = 16.0 * c.n_points * static_cast<double>(c.n_points);
    return (20.0 * mat + 8.0 * mat / 16.0 * snapshot_count(c)) / 1e6;
}

std::vector<std::string> validate_config(const RunConfig& c) {
    make_params(c.params.h, c.params.gamma, c.params.rho);
    const PhaseGrid grid = config_grid(c);
    c.hamiltonian.validate();
    c.jumps.validate();
    if (!(validate_ellipticity(c.jumps) > 0.0)) throw ConfigError("jump functions are not elliptic");
    if (c.initial.kind == "mixture") make_mixture(c.initial.mixture.components);
    if (!(c.time.dt > 0.0) || !(c.time.t_final >= 0.0) || c.time.snapshot_stride < 1) {
        throw ConfigError("time: need dt > 0, t_final >= 0, snapshot_stride >= 1");
    }
    resolve_scheme(c.solver.fp_scheme);
    if (c.solver.fp_interpolation_order != 1 && c.solver.fp_interpolation_order != 3) {
        throw ConfigError("fp_interpolation_order must be 1 or 3");
    }
    if (c.solver.initial_state != "quantized" && c.solver.initial_state != "projector") {
        throw ConfigError("solver.initial_state must be 'quantized' or 'projector'");
    }
    if (c.solver.initial_state == "projector" && c.initial.kind != "mixture") {
        throw ConfigError("projector initial state needs mixture initial data");
    }
    const Thresholds& t = c.thresholds;
    if (!(t.boundary_mass > 0) || !(t.positivity > 0) || !(t.trace_drift > 0) || !(t.herm_defect > 0) ||
        !(t.mass_drift > 0) || !(t.memory_cap_mb > 0)) {
        throw ConfigError("thresholds must be positive");
    }
    const double mem = estimated_memory_mb(c);
    if (mem > t.memory_cap_mb) {
        std::ostringstream os;
        os << "estimated memory " << mem << " MB exceeds the cap of " << t.memory_cap_mb << " MB";
        throw ConfigError(os.str());
    }
    return grid_warnings(grid);
}

SymbolField initial_field(const RunConfig& c) {
    const PhaseGrid grid = config_grid(c);
    if (c.initial.kind == "identity") return sample_symbol(Polynomial2::constant(1.0), grid);
    return mixture_field(c.initial.mixture, grid, c.params.h, c.thresholds.boundary_mass);
}

Operator initial_operator(const RunConfig& c, const SymbolField& a0) {
    if (c.solver.initial_state == "quantized") return quantize(a0, c.thresholds.boundary_mass);
    const PhaseGrid& g = a0.grid;
    const double h = c.params.h;
    Operator op{g, Eigen::MatrixXcd::Zero(g.n, g.n)};
    for (const auto& comp : c.initial.mixture.components) {
        if (!comp.pure_flag || (comp.covariance - 0.5 * h * Eigen::Matrix2d::Identity()).norm() > 1e-12 * h) {
            throw UnsupportedError("projector initial state supports coherent components only");
        }
        Eigen::VectorXcd psi(g.n);
        for (int m = 0; m < g.n; ++m) {
            const double x = g.x(m) - comp.center[0];
            psi(m) = std::exp(std::complex<double>(-x * x / (2.0 * h), comp.center[1] * g.x(m) / h));
        }
        psi /= psi.norm();
        op.M += comp.weight * psi * psi.adjoint();
    }
    return op;
}

RunResult run(const RunConfig& config, const fs::path& out_dir, const RunOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    RunResult result;
    result.warnings = validate_config(config);
    const bool write = !out_dir.empty() && opt.write_snapshots;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        fs::remove(out_dir / "FAILED");
        if (write) fs::create_directories(out_dir / "snapshots");
    }
    const PhaseGrid grid = config_grid(config);
    const double h = config.params.h, gamma = config.params.gamma;
    const double norm = kTwoPi * h;
    double last_time = 0.0;

    auto finish = [&](const std::string* failure) {
        result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (out_dir.empty()) return;
        io::write_metrics_csv(out_dir / "metrics.csv", result.metrics);
        int threads = 1;
#ifdef _OPENMP
        threads = omp_get_max_threads();
#endif
        json prov{{"config", to_json(config)},
                  {"code_version", LFP_VERSION},
                  {"wall_seconds", result.wall_seconds},
                  {"threads", threads},
                  {"warnings", result.warnings},
                  {"status", failure ? "failed" : "ok"}};
        io::write_json(out_dir / "provenance.json", prov);
        if (failure) io::write_json(out_dir / "FAILED", json{{"error", *failure}, {"time", last_time}});
    };

    try {
        const LindbladSystem sys = assemble(config.hamiltonian, config.jumps, config.params, grid);
        const SymbolField a0 = initial_field(config);
        const Operator A0 = initial_operator(config, a0);

        ClassicalEvolveOptions co;
        co.t_final = config.time.t_final;
        co.dt = config.time.dt;
        co.snapshot_stride = config.time.snapshot_stride;
        co.scheme = resolve_scheme(config.solver.fp_scheme);
        co.interpolation_order = config.solver.fp_interpolation_order;
        co.boundary_threshold = config.thresholds.boundary_mass;
        co.mass_drift_limit = config.thresholds.mass_drift;
        co.keep_fields = true;
        co.observer = [&](double t, const SymbolField&) { last_time = t; };
        ClassicalTrajectory fp;
        if (gamma == 0.0 && config.initial.kind == "mixture") {
            // Closed classical dynamics is pure transport; grid schemes cannot follow the filamentation.
            const int steps = static_cast<int>(std::llround(config.time.t_final / config.time.dt));
            fp.times.push_back(0.0);
            for (int s = 1; s <= steps; ++s) {
                if (s % config.time.snapshot_stride == 0 || s == steps) fp.times.push_back(s * config.time.dt);
            }
            fp.fields = transport_characteristics(mixture_evaluator(config.initial.mixture, h), config.hamiltonian,
                                                  grid, fp.times);
            for (auto& a : fp.fields) {
                require_boundary_gate(a, config.thresholds.boundary_mass, "closed transport");
                last_time = a.time_tag.value_or(0.0);
            }
        } else {
            fp = evolve(a0, config.hamiltonian, config.jumps, config.params, co);
        }

        QuantumEvolveOptions qo;
        qo.t_final = config.time.t_final;
        qo.dt = config.time.dt;
        qo.method = config.solver.lindblad_method;
        qo.snapshot_stride = config.time.snapshot_stride;
        qo.keep_states = false;
        qo.compute_diagnostics = true;
        qo.trace_drift_limit = config.thresholds.trace_drift;
        qo.herm_defect_limit = config.thresholds.herm_defect;
        qo.positivity_limit = config.thresholds.positivity;
        qo.krylov_dim = config.solver.krylov_dim;
        std::size_t index = 0;
        qo.observer = [&](double t, const Operator& A, const Diagnostics* d) {
            last_time = t;
            if (index >= fp.fields.size() || std::abs(fp.times[index] - t) > 1e-9) {
                throw NumericalError("classical and quantum snapshot times disagree");
            }
            const SymbolField& a = fp.fields[index];
            const Operator qa = quantize(a, config.thresholds.boundary_mass);
            const Eigen::MatrixXcd diff = A.M - qa.M;
            io::MetricsRow row;
            row.t = t;
            row.trace_dist = trace_norm(diff);
            row.hs_dist = diff.norm();
            row.trace_re = d->trace.real();
            row.trace_im = d->trace.imag();
            row.herm_defect = d->herm_defect;
            row.min_eig = d->min_eigenvalue;
            row.mass = integral(a) / norm;
            row.l1_norm = l1_norm(a) / norm;
            row.w11_eps = sobolev_norm(a, 1, config.params.eps(), config.thresholds.boundary_mass) / norm;
            result.metrics.push_back(row);
            if (write) {
                io::write_field_snapshot(out_dir / "snapshots" / snapshot_name("classical", int(index)), a, gamma, t);
                io::write_field_snapshot(out_dir / "snapshots" / snapshot_name("quantum_field", int(index)),
                                         dequantize(A), gamma, t);
                if (config.solver.write_operator_snapshots) {
                    io::write_operator_snapshot(out_dir / "snapshots" / snapshot_name("operator", int(index)), A,
                                                gamma, t);
                }
            }
            if (opt.keep_states) result.states.push_back(A);
            ++index;
        };
        evolve(sys, A0, qo);
        if (opt.keep_fields) result.fields = std::move(fp.fields);
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        finish(&msg);
        throw;
    }
    finish(nullptr);
    return result;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    if (n < 2 || y.size() != x.size()) throw ConfigError("fit_line needs at least two paired points");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("fit_line: abscissae are all equal");
    LinearFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        sse += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_stderr = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return f;
}

namespace {

RunConfig with_physics(const RunConfig& base, double h, double gamma, int n_points, double halfwidth) {
    RunConfig c = base;
    c.params = make_params(h, gamma, base.params.rho);
    c.n_points = n_points;
    c.halfwidth = halfwidth;
    if (c.initial.kind == "mixture") {
        std::vector<GaussianState> comps;
        for (const auto& g : base.initial.mixture.components) {
            comps.push_back(make_gaussian_state(g.weight, g.center, g.covariance * (h / base.params.h), g.pure_flag, h));
        }
        c.initial.mixture = make_mixture(std::move(comps));
    }
    return c;
}

std::string tag(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

} // namespace

SweepReport scaling_sweep(const RunConfig& base, const std::vector<double>& h_list,
                          const std::vector<double>& gamma_list, double t_eval, const std::vector<SweepGrid>& grids,
                          const fs::path& out_dir) {
    if (h_list.size() < 4) throw ConfigError("scaling_sweep needs at least four h values");
    const double hmin = *std::min_element(h_list.begin(), h_list.end());
    const double hmax = *std::max_element(h_list.begin(), h_list.end());
    if (hmax / hmin < 8.0 - 1e-12) throw ConfigError("scaling_sweep h values must span at least three octaves");
    if (gamma_list.empty() || !(t_eval > 0.0)) throw ConfigError("scaling_sweep needs gammas and t_eval > 0");

    SweepReport report;
    report.floor_detected = base.hamiltonian.degree() <= 2;
    for (double gamma : gamma_list) {
        std::vector<double> lx, ly;
        for (double h : h_list) {
            int n = power_of_two_at_least(base.n_points * base.params.h / h);
            double L = base.halfwidth;
            for (const auto& g : grids) {
                if (std::abs(g.h - h) <= 1e-12 * h) {
                    n = g.n_points;
                    L = g.halfwidth;
                }
            }
            RunConfig c = with_physics(base, h, gamma, n, L);
            c.time.t_final = t_eval;
            const int steps = std::max(1, static_cast<int>(std::ceil(t_eval / c.time.dt - 1e-9)));
            c.time.snapshot_stride = std::max(1, steps / 10);
            const fs::path dir = out_dir.empty() ? fs::path{} : out_dir / ("run_h" + tag(h) + "_g" + tag(gamma));
            RunResult r;
            try {
                r = run(c, dir);
            } catch (const std::exception& e) {
                report.complete = false;
                report.failure = e.what();
                return report;
            }
            const io::MetricsRow& last = r.metrics.back();
            report.points.push_back({h, gamma, n, L, last.t, last.trace_dist});
            for (const auto& row : r.metrics) report.time_series.push_back({h, gamma, n, L, row.t, row.trace_dist});
            lx.push_back(std::log(h));
            ly.push_back(std::log(std::max(last.trace_dist, 1e-300)));
        }
        report.h_fits.emplace_back(gamma, fit_line(lx, ly));
    }
    double worst = 0.0;
    for (const auto& p : report.points) worst = std::max(worst, p.trace_dist);
    if (worst < 1e-6) report.floor_detected = true;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        io::write_json(out_dir / "sweep.json", to_json(report));
    }
    return report;
}

CorrectionReport higher_order_correction(const RunConfig& config, int order, int checkpoints) {
    if (order < 1 || order > 2) throw UnsupportedError("higher_order_correction supports order 1 and 2");
    if (checkpoints < 8 || checkpoints % 2 != 0) throw ConfigError("need an even number of at least 8 checkpoints");
    RunConfig c = config;
    const int base_steps = std::max(1, static_cast<int>(std::ceil(c.time.t_final / c.time.dt - 1e-9)));
    const int stride = std::max(1, static_cast<int>(std::lround(double(base_steps) / checkpoints)));
    const int steps = stride * checkpoints;
    c.time.dt = c.time.t_final / steps;
    c.time.snapshot_stride = stride;

    RunOptions ro;
    ro.keep_states = true;
    ro.keep_fields = true;
    ro.write_snapshots = false;
    RunResult r = run(c, {}, ro);

    CorrectionReport rep;
    rep.order = order;
    for (const auto& row : r.metrics) {
        rep.times.push_back(row.t);
        rep.uncorrected.push_back(row.trace_dist);
    }
    if (order == 1) {
        rep.corrected = rep.uncorrected;
        return rep;
    }

    const int K = checkpoints;
    const double delta = c.time.t_final / K;
    const LindbladSystem sys = assemble(c.hamiltonian, c.jumps, c.params, config_grid(c));
    const double thr = c.thresholds.boundary_mass;

    // propagated[j][k - j] = e^{(t_k - s_j) Q} e1(s_j)
    std::vector<std::vector<Eigen::MatrixXd>> propagated(K + 1);
    for (int j = 0; j <= K; ++j) {
        const SymbolField& a = r.fields[j];
        SymbolField e1 = generator_apply(a, c.hamiltonian, c.jumps, c.params, thr);
        const double scale = e1.values.cwiseAbs().maxCoeff();
        e1.values -= dequantize(generator_apply(sys, quantize(a, thr))).values;
        e1.source.reset();
        e1.midpoint_values.reset();
        // Quadratic p and affine jumps: both generators agree and the difference is discretization noise.
        if (e1.values.cwiseAbs().maxCoeff() <= 1e-6 * scale) e1.values.setZero();
        propagated[j].push_back(e1.values);
        if (j == K || e1.values.cwiseAbs().maxCoeff() == 0.0) {
            for (int k = j + 1; k <= K; ++k) propagated[j].push_back(Eigen::MatrixXd::Zero(e1.values.rows(), e1.values.cols()));
            continue;
        }
        ClassicalEvolveOptions co;
        co.t_final = (K - j) * delta;
        co.dt = c.time.dt;
        co.snapshot_stride = stride;
        co.scheme = resolve_scheme(c.solver.fp_scheme);
        co.interpolation_order = c.solver.fp_interpolation_order;
        co.boundary_threshold = thr;
        co.l1_growth_limit = 1e-6 * l1_norm(e1);
        co.keep_fields = true;
        const ClassicalTrajectory tr = evolve(e1, c.hamiltonian, c.jumps, c.params, co);
        for (std::size_t k = 1; k < tr.fields.size(); ++k) propagated[j].push_back(tr.fields[k].values);
    }

    auto correction = [&](int k, int step) {
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(r.fields[0].values.rows(), r.fields[0].values.cols());
        if (k == 0) return sum;
        for (int j = 0; j <= k; j += step) {
            const double w = (j == 0 || j == k) ? 0.5 : 1.0;
            sum += w * step * delta * propagated[j][k - j];
        }
        return sum;
    };

    for (int k = 0; k <= K; ++k) {
        SymbolField a2 = r.fields[k];
        a2.values -= correction(k, 1);
        a2.source.reset();
        a2.midpoint_values.reset();
        rep.corrected.push_back(trace_norm(r.states[k].M - quantize(a2, thr).M));
    }
    const Eigen::MatrixXd fine = correction(K, 1), coarse = correction(K, 2);
    const double scale = fine.cwiseAbs().sum();
    rep.halving_change = scale > 0.0 ? (fine - coarse).cwiseAbs().sum() / scale : 0.0;
    if (rep.halving_change > 0.02) {
        std::ostringstream os;
        os << "Duhamel checkpoint quadrature not converged: halving changes the correction by "
           << rep.halving_change;
        throw NumericalError(os.str());
    }
    return rep;
}

ParametrixReport parametrix_report(const std::string& case_name, const std::vector<double>& eps_list,
                                   const fs::path& out_dir, PhasePoint y, double t, int grid_n,
                                   const Quadrature& quad) {
    if (eps_list.empty()) throw ConfigError("parametrix_report needs at least one eps");
    ParametrixReport rep;
    rep.case_name = case_name;
    rep.y = y;
    auto fit_if = [&](const KernelField& k, const ParabolicProblem& prob) -> std::optional<BoundFit> {
        if (l1_norm(k) < 1e-10) return std::nullopt;
        const BoundFit f = gaussian_bound_fit(k, prob);
        if (!(f.c > 0.0)) rep.all_fits_positive = false;
        return f;
    };
    for (double eps : eps_list) {
        const ParabolicProblem prob = make_problem(case_name, eps);
        const KernelGrid grid = kernel_grid_for(prob, y, t, grid_n);
        ParametrixCaseRow row;
        row.eps = eps;
        row.t = t;

        const KernelField k0 = k0_kernel(prob, y, t, grid);
        const KernelField r1 = residual_r1_pointwise(prob, y, t, grid);
        const KernelField r1_grid = residual_r1(prob, y, t, grid);
        const KernelField r2 = rk_iterate(prob, 2, y, t, grid, quad);
        const KernelField k1 = kj_assemble(prob, 1, y, t, grid, quad);
        Quadrature fast = quad;
        fast.verify_halving = false;
        KernelField ident = heat_residual(prob, [&](double s) { return kj_assemble(prob, 1, y, s, grid, fast); }, t);
        ident.values += r2.values;

        const double n1 = l1_norm(r1), n2 = l1_norm(r2);
        row.r1_grid_mismatch = n1 > 1e-10 ? (r1.values - r1_grid.values).cwiseAbs().sum() * grid.cell_area() / n1
                                          : (r1.values - r1_grid.values).cwiseAbs().sum() * grid.cell_area();
        row.r2_over_r1 = n1 > 1e-10 ? n2 / n1 : 0.0;
        row.identity_rel = n2 > 1e-10 ? l1_norm(ident) / n2 : 0.0;
        row.kernels.push_back({"K0", l1_norm(k0), mass(k0), fit_if(k0, prob)});
        row.kernels.push_back({"R1", n1, mass(r1), fit_if(r1, prob)});
        row.kernels.push_back({"R2", n2, mass(r2), fit_if(r2, prob)});
        row.kernels.push_back({"K1", l1_norm(k1), mass(k1), fit_if(k1, prob)});

        for (int i = 1; i <= 10; ++i) {
            const double ti = 0.1 * i;
            const KernelGrid gi = kernel_grid_for(prob, y, ti, grid_n);
            const double ni = l1_norm(residual_r1_pointwise(prob, y, ti, gi));
            row.r1_constant = std::max(row.r1_constant, ni / (1.0 + eps / std::sqrt(ti)));
        }
        rep.rows.push_back(row);
    }
    double cmin = 1e300, cmax = 0.0;
    for (const auto& r : rep.rows) {
        cmin = std::min(cmin, r.r1_constant);
        cmax = std::max(cmax, r.r1_constant);
    }
    rep.r1_constant_band = cmax < 1e-10 ? 1.0 : cmax / cmin;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        io::write_json(out_dir / ("parametrix_" + case_name + ".json"), to_json(rep));
    }
    return rep;
}

json to_json(const ParametrixReport& r) {
    json j{{"case", r.case_name},
           {"y", {r.y[0], r.y[1]}},
           {"r1_constant_band", r.r1_constant_band},
           {"all_fits_positive", r.all_fits_positive}};
    j["rows"] = json::array();
    for (const auto& row : r.rows) {
        json jr{{"eps", row.eps},
                {"t", row.t},
                {"r2_over_r1", row.r2_over_r1},
                {"identity_rel", row.identity_rel},
                {"r1_constant", row.r1_constant},
                {"r1_grid_mismatch", row.r1_grid_mismatch}};
        jr["kernels"] = json::array();
        for (const auto& k : row.kernels) {
            json jk{{"kernel", k.kernel}, {"l1", k.l1}, {"mass", k.mass}};
            if (k.fit) jk["fit"] = {{"C", k.fit->C}, {"c", k.fit->c}, {"points", k.fit->points}};
            else jk["fit"] = nullptr;
            jr["kernels"].push_back(jk);
        }
        j["rows"].push_back(jr);
    }
    return j;
}

json to_json(const SweepReport& r) {
    json j{{"floor_detected", r.floor_detected}, {"complete", r.complete}, {"failure", r.failure}};
    j["points"] = json::array();
    for (const auto& p : r.points) {
        j["points"].push_back({{"h", p.h}, {"gamma", p.gamma}, {"n_points", p.n_points}, {"halfwidth", p.halfwidth},
                               {"t", p.t}, {"trace_dist", p.trace_dist}});
    }
    j["h_fits"] = json::array();
    for (const auto& [gamma, f] : r.h_fits) {
        j["h_fits"].push_back({{"gamma", gamma}, {"slope", f.slope}, {"slope_stderr", f.slope_stderr},
                               {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}});
    }
    j["time_series"] = json::array();
    for (const auto& p : r.time_series) {
        j["time_series"].push_back({{"h", p.h}, {"gamma", p.gamma}, {"t", p.t}, {"trace_dist", p.trace_dist}});
    }
    return j;
}

json to_json(const CorrectionReport& r) {
    return json{{"order", r.order},
                {"times", r.times},
                {"uncorrected", r.uncorrected},
                {"corrected", r.corrected},
                {"halving_change", r.halving_change}};
}

OracleCheck oracle_check(const RunConfig& config) {
    validate_config(config);
    if (config.initial.kind != "mixture") throw ConfigError("oracle_check needs mixture initial data");
    if (config.hamiltonian.degree() > 2) throw UnsupportedError("oracle_check needs a quadratic Hamiltonian");
    const PhaseGrid grid = config_grid(config);
    const SymbolField a0 = initial_field(config);
    ClassicalEvolveOptions co;
    co.t_final = config.time.t_final;
    co.dt = config.time.dt;
    co.snapshot_stride = config.time.snapshot_stride;
    co.scheme = resolve_scheme(config.solver.fp_scheme);
    co.interpolation_order = config.solver.fp_interpolation_order;
    co.boundary_threshold = config.thresholds.boundary_mass;
    co.keep_fields = true;
    const ClassicalTrajectory tr = evolve(a0, config.hamiltonian, config.jumps, config.params, co);
    const double l10 = l1_norm(a0);
    OracleCheck out;
    for (std::size_t k = 0; k < tr.fields.size(); ++k) {
        GaussianMixture mix;
        for (const auto& g : config.initial.mixture.components) {
            mix.components.push_back(moment_flow(g, config.hamiltonian, config.jumps, config.params, tr.times[k]));
        }
        const SymbolField exact = mixture_field(mix, grid, config.params.h, config.thresholds.boundary_mass);
        const double err = (exact.values - tr.fields[k].values).cwiseAbs().sum() * grid.cell_area() / l10;
        out.times.push_back(tr.times[k]);
        out.errors.push_back(err);
        out.l1_error = std::max(out.l1_error, err);
        if (mix.components.size() == 1) {
            out.width_error = std::max(out.width_error,
                                       std::abs(x_marginal_variance(tr.fields[k]) - mix.components[0].covariance(0, 0)));
        }
    }
    return out;
}

Figure1Report figure1(const RunConfig& base, const fs::path& out_dir) {
    RunConfig open = base, closed = base;
    closed.params = make_params(base.params.h, 0.0, base.params.rho);
    const RunResult ro = run(open, out_dir.empty() ? fs::path{} : out_dir / "gamma_open");
    const RunResult rc = run(closed, out_dir.empty() ? fs::path{} : out_dir / "gamma_0");
    Figure1Report rep;
    rep.trace_dist_open = ro.metrics.back().trace_dist;
    rep.trace_dist_closed = rc.metrics.back().trace_dist;
    rep.ratio = rep.trace_dist_open / rep.trace_dist_closed;
    if (!out_dir.empty()) {
        io::write_json(out_dir / "figure1.json", json{{"trace_dist_open", rep.trace_dist_open},
                                                      {"trace_dist_closed", rep.trace_dist_closed},
                                                      {"gamma_open", base.params.gamma},
                                                      {"ratio", rep.ratio}});
    }
    return rep;
}

namespace {

RunConfig gaussian_config(const HamiltonianSpec& p, double h, double gamma, int n_points, double halfwidth,
                          double t_final, PhasePoint z0) {
    RunConfig c;
    c.params = make_params(h, gamma);
    c.n_points = n_points;
    c.halfwidth = halfwidth;
    c.hamiltonian = p;
    c.jumps.components = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    c.initial.kind = "mixture";
    c.initial.mixture = make_mixture({coherent_state(z0, h)});
    c.time.dt = 1e-3;
    c.time.t_final = t_final;
    const int steps = std::max(1, static_cast<int>(std::ceil(t_final / c.time.dt - 1e-9)));
    c.time.snapshot_stride = std::max(1, steps / 10);
    return c;
}

} // namespace

RunConfig quadratic_example_config(double h, double gamma, int n_points, double halfwidth, double t_final) {
    return gaussian_config(HamiltonianSpec{{{1, 1, 1.0}}}, h, gamma, n_points, halfwidth, t_final, {0.0, 0.0});
}

RunConfig quartic_config(double h, double gamma, int n_points, double halfwidth, double t_final, PhasePoint z0) {
    const HamiltonianSpec p{{{0, 2, 1.0}, {4, 0, 1.0}, {2, 0, -1.0}, {0, 0, 0.25}}};
    return gaussian_config(p, h, gamma, n_points, halfwidth, t_final, z0);
}

} // namespace lfp
