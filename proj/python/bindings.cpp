#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lfp/errors.hpp"
#include "lfp/experiments.hpp"
#include "lfp/io.hpp"
#include "lfp/oracle.hpp"
#include "lfp/weyl.hpp"

namespace py = pybind11;
using namespace lfp;

namespace {

RunConfig config_from(const std::string& text) { return parse_config(nlohmann::json::parse(text)); }

py::dict metrics_dict(const io::MetricsRow& r) {
    py::dict d;
    d["t"] = r.t;
    d["trace_dist"] = r.trace_dist;
    d["hs_dist"] = r.hs_dist;
    d["trace_re"] = r.trace_re;
    d["trace_im"] = r.trace_im;
    d["herm_defect"] = r.herm_defect;
    d["min_eig"] = r.min_eig;
    d["mass"] = r.mass;
    d["l1_norm"] = r.l1_norm;
    d["w11_eps"] = r.w11_eps;
    return d;
}

py::list metrics_list(const std::vector<io::MetricsRow>& rows) {
    py::list out;
    for (const auto& r : rows) out.append(metrics_dict(r));
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", config_error.ptr());
    auto numerical_error = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<BoundaryMassError>(m, "BoundaryMassError", numerical_error.ptr());
    py::register_exception<FlowEscapeError>(m, "FlowEscapeError", numerical_error.ptr());

    py::class_<PhaseGrid>(m, "PhaseGrid")
        .def_readonly("n", &PhaseGrid::n)
        .def_readonly("L", &PhaseGrid::L)
        .def_readonly("h", &PhaseGrid::h)
        .def_property_readonly("dx", &PhaseGrid::dx)
        .def_property_readonly("dxi", &PhaseGrid::dxi)
        .def_property_readonly("cell_area", &PhaseGrid::cell_area)
        .def("x_nodes", &PhaseGrid::x_nodes)
        .def("xi_nodes", &PhaseGrid::xi_nodes)
        .def("__repr__", [](const PhaseGrid& g) {
            return "PhaseGrid(n=" + std::to_string(g.n) + ", L=" + std::to_string(g.L) + ", h=" + std::to_string(g.h) + ")";
        });

    m.def("build_grid", &build_grid, py::arg("n_points"), py::arg("halfwidth"), py::arg("h"));
    m.def("coherent_symbol", [](const PhaseGrid& g, double x0, double xi0) { return coherent_symbol(g, x0, xi0).values; },
          py::arg("grid"), py::arg("x0"), py::arg("xi0"));
    m.def("quantize", [](const PhaseGrid& g, const Eigen::MatrixXd& values) { return quantize(make_field(g, values)).M; },
          py::arg("grid"), py::arg("values"));
    m.def("dequantize", [](const PhaseGrid& g, const Eigen::MatrixXcd& M) { return dequantize(Operator{g, M}).values; },
          py::arg("grid"), py::arg("matrix"));
    m.def("trace_norm", [](const Eigen::MatrixXcd& M) { return trace_norm(M); }, py::arg("matrix"));
    m.def("example_widths", &example_widths, py::arg("h"), py::arg("eps"), py::arg("t"));

    m.def("quadratic_example_config",
          [](double h, double gamma, int n, double L, double t) {
              return to_json(quadratic_example_config(h, gamma, n, L, t)).dump();
          },
          py::arg("h"), py::arg("gamma"), py::arg("n_points"), py::arg("halfwidth"), py::arg("t_final"));
    m.def("quartic_config",
          [](double h, double gamma, int n, double L, double t) { return to_json(quartic_config(h, gamma, n, L, t)).dump(); },
          py::arg("h"), py::arg("gamma"), py::arg("n_points"), py::arg("halfwidth"), py::arg("t_final"));
    m.def("validate_config", [](const std::string& text) { return validate_config(config_from(text)); });

    m.def(
        "run",
        [](const std::string& text, const std::string& out_dir) {
            const RunConfig c = config_from(text);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run(c, out_dir);
            }
            py::dict d;
            d["metrics"] = metrics_list(r.metrics);
            d["warnings"] = r.warnings;
            d["wall_seconds"] = r.wall_seconds;
            return d;
        },
        py::arg("config"), py::arg("out_dir") = "");

    m.def("oracle_check", [](const std::string& text) {
        const OracleCheck r = oracle_check(config_from(text));
        py::dict d;
        d["l1_error"] = r.l1_error;
        d["width_error"] = r.width_error;
        d["times"] = r.times;
        d["errors"] = r.errors;
        return d;
    });

    m.def("read_metrics_csv", [](const std::filesystem::path& p) { return metrics_list(io::read_metrics_csv(p)); });
    m.def("read_snapshot", [](const std::filesystem::path& p) -> py::tuple {
        const io::Snapshot s = io::read_snapshot(p);
        const std::string header = s.header.dump();
        if (s.header.value("kind", "") == "operator") return py::make_tuple(header, s.complex);
        return py::make_tuple(header, s.real);
    });
}
