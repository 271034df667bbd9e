#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lfp/errors.hpp"
#include "lfp/experiments.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalidConfig = 1;
constexpr int kNumerical = 2;
constexpr int kAcceptanceFailed = 3;

struct Common {
    std::string config;
    std::string out;
    int threads = 0;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
    auto* opt = app->add_option("--config", c.config, "run configuration (JSON)");
    if (config_required) opt->required();
    app->add_option("--out", c.out, "output directory");
    app->add_option("--threads", c.threads, "worker threads (0 keeps the default)");
}

void apply_threads(const Common& c) {
#ifdef _OPENMP
    if (c.threads > 0) omp_set_num_threads(c.threads);
#else
    (void)c;
#endif
}

int print_json(const nlohmann::json& j, bool ok) {
    std::cout << j.dump(2) << '\n';
    return ok ? kOk : kAcceptanceFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lindblad / Fokker-Planck correspondence laboratory"};
    app.require_subcommand(1);

    Common validate_opts, run_opts, sweep_opts, correct_opts, param_opts, oracle_opts, fig_opts;

    auto* validate = app.add_subcommand("validate", "check a configuration and print warnings");
    add_common(validate, validate_opts, true);

    auto* run = app.add_subcommand("run", "evolve both pictures and write artifacts");
    add_common(run, run_opts, true);

    auto* sweep = app.add_subcommand("sweep", "h / gamma scaling sweep");
    add_common(sweep, sweep_opts, true);
    std::vector<double> h_list{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    std::vector<double> gamma_list{1.0};
    double t_eval = 1.0;
    sweep->add_option("--h-list", h_list, "h values")->delimiter(',');
    sweep->add_option("--gamma-list", gamma_list, "gamma values")->delimiter(',');
    sweep->add_option("--t-eval", t_eval, "evaluation time");

    auto* correct = app.add_subcommand("correct", "second-order Duhamel correction of the classical symbol");
    add_common(correct, correct_opts, true);
    int checkpoints = 32, order = 2;
    correct->add_option("--checkpoints", checkpoints, "number of checkpoint intervals");
    correct->add_option("--order", order, "correction order (1 or 2)");

    auto* param = app.add_subcommand("parametrix-check", "parametrix residuals and Gaussian bound fits");
    add_common(param, param_opts, false);
    std::string case_name = "linear-hyperbolic";
    std::vector<double> eps_list{0.25, 0.125, 0.0625};
    param->add_option("--case", case_name, "heat, linear-hyperbolic or variable-A");
    param->add_option("--eps", eps_list, "diffusion scales")->delimiter(',');

    auto* oracle = app.add_subcommand("oracle-check", "Fokker-Planck solver against the Gaussian moment flow");
    add_common(oracle, oracle_opts, true);

    auto* fig = app.add_subcommand("figure1", "open versus closed system comparison for a quartic well");
    add_common(fig, fig_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            apply_threads(validate_opts);
            const lfp::RunConfig c = lfp::load_config(validate_opts.config);
            for (const auto& w : lfp::validate_config(c)) std::cerr << "warning: " << w << '\n';
            std::cout << "ok: estimated memory " << lfp::estimated_memory_mb(c) << " MB\n";
            return kOk;
        }
        if (*run) {
            apply_threads(run_opts);
            const lfp::RunConfig c = lfp::load_config(run_opts.config);
            const fs::path out = run_opts.out.empty() ? fs::path("run_out") : fs::path(run_opts.out);
            const lfp::RunResult r = lfp::run(c, out);
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
            const auto& last = r.metrics.back();
            std::printf("t = %.6g  trace_dist = %.6e  wall = %.2fs  -> %s\n", last.t, last.trace_dist,
                        r.wall_seconds, out.string().c_str());
            return kOk;
        }
        if (*sweep) {
            apply_threads(sweep_opts);
            const lfp::RunConfig c = lfp::load_config(sweep_opts.config);
            const lfp::SweepReport r = lfp::scaling_sweep(c, h_list, gamma_list, t_eval, {}, sweep_opts.out);
            if (!r.complete) {
                std::cerr << "sweep incomplete: " << r.failure << '\n';
                return kNumerical;
            }
            return print_json(lfp::to_json(r), true);
        }
        if (*correct) {
            apply_threads(correct_opts);
            const lfp::RunConfig c = lfp::load_config(correct_opts.config);
            const lfp::CorrectionReport r = lfp::higher_order_correction(c, order, checkpoints);
            if (!correct_opts.out.empty()) {
                fs::create_directories(correct_opts.out);
                lfp::io::write_json(fs::path(correct_opts.out) / "correction.json", lfp::to_json(r));
            }
            return print_json(lfp::to_json(r), r.corrected.back() <= r.uncorrected.back());
        }
        if (*param) {
            apply_threads(param_opts);
            const lfp::ParametrixReport r = lfp::parametrix_report(case_name, eps_list, param_opts.out);
            return print_json(lfp::to_json(r), r.all_fits_positive);
        }
        if (*oracle) {
            apply_threads(oracle_opts);
            const lfp::RunConfig c = lfp::load_config(oracle_opts.config);
            const lfp::OracleCheck r = lfp::oracle_check(c);
            nlohmann::json j{{"l1_error", r.l1_error}, {"width_error", r.width_error}, {"times", r.times},
                             {"errors", r.errors}};
            return print_json(j, r.l1_error <= 1e-4);
        }
        if (*fig) {
            apply_threads(fig_opts);
            const lfp::RunConfig c = fig_opts.config.empty() ? lfp::quartic_config(1.0 / 16, 1.0, 256, 3.0, 2.0)
                                                             : lfp::load_config(fig_opts.config);
            const fs::path out = fig_opts.out.empty() ? fs::path("figure1_out") : fs::path(fig_opts.out);
            const lfp::Figure1Report r = lfp::figure1(c, out);
            nlohmann::json j{{"trace_dist_open", r.trace_dist_open},
                             {"trace_dist_closed", r.trace_dist_closed},
                             {"ratio", r.ratio}};
            return print_json(j, r.trace_dist_open < r.trace_dist_closed);
        }
    } catch (const lfp::ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kInvalidConfig;
    } catch (const lfp::NumericalError& e) {
        std::cerr << "numerical gate failed: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kOk;
}
