#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "lfp/errors.hpp"
#include "lfp/experiments.hpp"

using namespace lfp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "lfp_test_experiments" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// L = sqrt(pi h N / 2) gives equal steps in x and xi.
RunConfig small_quadratic(double t_final = 0.2) { return quadratic_example_config(0.125, 1.0, 64, 3.5, t_final); }

int cli(const std::string& args) {
    const std::string cmd = std::string(LFP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config round trip and key checking") {
    const RunConfig c = quartic_config(1.0 / 16, 1.0, 128, 2.5, 1.0);
    const json j = to_json(c);
    CHECK(to_json(parse_config(j)) == j);

    json extra = j;
    extra["colour"] = "blue";
    CHECK_THROWS_AS(parse_config(extra), ConfigError);
    json nested = j;
    nested["time"]["substeps"] = 4;
    CHECK_THROWS_AS(parse_config(nested), ConfigError);
    json missing = j;
    missing.erase("jumps");
    CHECK_THROWS_AS(parse_config(missing), ConfigError);
    json heavy = j;
    heavy["initial"]["components"][0]["weight"] = 0.4;
    CHECK_THROWS_AS(parse_config(heavy), ConfigError);
}

TEST_CASE("config validation") {
    RunConfig c = small_quadratic();
    CHECK_NOTHROW(validate_config(c));
    RunConfig degenerate = c;
    degenerate.jumps.components = {{1.0, 0.0, 0.0}};
    CHECK_THROWS_AS(validate_config(degenerate), ConfigError);
    RunConfig greedy = c;
    greedy.thresholds.memory_cap_mb = 1e-3;
    CHECK_THROWS_AS(validate_config(greedy), ConfigError);
    RunConfig odd = c;
    odd.n_points = 100;
    CHECK_THROWS_AS(validate_config(odd), ConfigError);
}

TEST_CASE("field and operator snapshots") {
    const fs::path dir = scratch("snap");
    const PhaseGrid g = build_grid(32, 2.0, 0.125);
    SymbolField a = coherent_symbol(g, 0.3, -0.1);
    a.values(3, 7) = -1.25;
    io::write_field_snapshot(dir / "f.lfps", a, 0.5, 1.5);

    std::ifstream in(dir / "f.lfps", std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::memcmp(magic, "LFPSNP01", 8) == 0);
    unsigned char len_bytes[8];
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | len_bytes[i];
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    const json hj = json::parse(header);
    CHECK(hj["kind"] == "field");
    CHECK(hj["dtype"] == "f64le");
    CHECK(hj["layout"] == "row-major");
    CHECK(hj["grid"]["n"] == 32);
    double first[8];
    in.read(reinterpret_cast<char*>(first), sizeof first);
    for (int j = 0; j < 8; ++j) CHECK(first[j] == a.values(0, j));

    const io::Snapshot s = io::read_snapshot(dir / "f.lfps");
    CHECK(s.header["h"] == 0.125);
    CHECK(s.header["gamma"] == 0.5);
    CHECK(s.header["t"] == 1.5);
    CHECK(s.real == a.values);

    Operator A = quantize(a);
    A.M(2, 5) = std::complex<double>(0.5, -2.0);
    io::write_operator_snapshot(dir / "o.lfps", A, 0.5, 1.5);
    const io::Snapshot so = io::read_snapshot(dir / "o.lfps");
    CHECK(so.header["kind"] == "operator");
    CHECK(so.header["dtype"] == "c128le");
    CHECK(so.complex == A.M);

    std::ofstream(dir / "junk.lfps") << "NOTASNAPSHOT";
    CHECK_THROWS_AS(io::read_snapshot(dir / "junk.lfps"), ConfigError);
}

TEST_CASE("metrics table") {
    const fs::path dir = scratch("metrics");
    std::vector<io::MetricsRow> rows(3);
    for (int i = 0; i < 3; ++i) {
        rows[i].t = 0.1 * i;
        rows[i].trace_dist = 1.0 / 3.0 + i;
        rows[i].min_eig = -1e-17 * (i + 1);
        rows[i].w11_eps = std::nextafter(2.0, 3.0);
    }
    io::write_metrics_csv(dir / "m.csv", rows);
    std::ifstream in(dir / "m.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == io::kMetricsHeader);
    const auto back = io::read_metrics_csv(dir / "m.csv");
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(back[i].t == rows[i].t);
        CHECK(back[i].trace_dist == rows[i].trace_dist);
        CHECK(back[i].min_eig == rows[i].min_eig);
        CHECK(back[i].w11_eps == rows[i].w11_eps);
    }
}

TEST_CASE("run writes consistent artifacts") {
    const fs::path dir = scratch("run");
    const RunConfig c = small_quadratic();
    const RunResult r = run(c, dir);
    REQUIRE(r.metrics.size() == 11);
    CHECK(r.metrics.front().trace_dist <= 1e-6);
    for (std::size_t i = 1; i < r.metrics.size(); ++i) CHECK(r.metrics[i].t > r.metrics[i - 1].t);
    for (const auto& row : r.metrics) CHECK(row.trace_dist <= 1e-3);

    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "snapshots" / "classical_0010.lfps"));
    CHECK(fs::exists(dir / "snapshots" / "quantum_field_0000.lfps"));
    CHECK(!fs::exists(dir / "FAILED"));
    const json prov = io::read_json(dir / "provenance.json");
    CHECK(prov["status"] == "ok");
    CHECK(prov["config"] == to_json(c));
    CHECK(prov.contains("code_version"));

    const io::Snapshot last = io::read_snapshot(dir / "snapshots" / "classical_0010.lfps");
    CHECK(last.header["t"].get<double>() == doctest::Approx(0.2));

    const RunResult again = run(c, {});
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
        CHECK(again.metrics[i].trace_dist == r.metrics[i].trace_dist);
        CHECK(again.metrics[i].w11_eps == r.metrics[i].w11_eps);
    }
}

TEST_CASE("identity initial state stays put on both sides") {
    RunConfig c = quartic_config(0.125, 1.0, 64, 2.0, 0.3);
    c.initial.kind = "identity";
    const RunResult r = run(c, {});
    for (const auto& row : r.metrics) CHECK(row.trace_dist <= 1e-6);
}

TEST_CASE("failed runs leave a marker") {
    const fs::path dir = scratch("failed");
    // The momentum width grows like e^t and leaves the box before t = 4.
    RunConfig c = quadratic_example_config(1.0 / 16, 1.0, 64, 2.5, 4.0);
    c.time.dt = 1e-2;
    c.time.snapshot_stride = 10;
    CHECK_THROWS_AS(run(c, dir), BoundaryMassError);
    REQUIRE(fs::exists(dir / "FAILED"));
    const json f = io::read_json(dir / "FAILED");
    CHECK(f["time"].get<double>() > 0.0);
    CHECK(f["error"].get<std::string>().find("boundary") != std::string::npos);
    CHECK(io::read_json(dir / "provenance.json")["status"] == "failed");
}

TEST_CASE("line fits") {
    const LinearFit f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
    CHECK(f.slope_stderr == doctest::Approx(0.0));
    CHECK_THROWS_AS(fit_line({1, 1}, {0, 2}), ConfigError);
}

TEST_CASE("sweep preconditions") {
    const RunConfig c = small_quadratic();
    CHECK_THROWS_AS(scaling_sweep(c, {0.125, 0.0625, 0.03125}, {1.0}, 0.2), ConfigError);
    CHECK_THROWS_AS(scaling_sweep(c, {0.125, 0.1, 0.09, 0.08}, {1.0}, 0.2), ConfigError);
}

TEST_CASE("quadratic runs sit at the floor") {
    const RunConfig c = small_quadratic(0.1);
    const SweepReport s = scaling_sweep(c, {0.125, 0.0625, 0.03125, 0.015625}, {1.0}, 0.1);
    REQUIRE(s.complete);
    CHECK(s.floor_detected);
    REQUIRE(s.points.size() == 4);
    CHECK(s.points.back().n_points == 512);
}

TEST_CASE("higher-order correction") {
    const CorrectionReport quad = higher_order_correction(small_quadratic(0.4), 2, 8);
    for (std::size_t i = 0; i < quad.times.size(); ++i) {
        CHECK(std::abs(quad.corrected[i] - quad.uncorrected[i]) <= 1e-6);
    }
    const CorrectionReport first = higher_order_correction(small_quadratic(0.4), 1, 8);
    CHECK(first.corrected == first.uncorrected);
    CHECK_THROWS_AS(higher_order_correction(small_quadratic(), 3, 8), UnsupportedError);
    CHECK_THROWS_AS(higher_order_correction(small_quadratic(), 2, 6), ConfigError);
}

TEST_CASE("oracle check for the solvable example") {
    RunConfig c = quadratic_example_config(1.0 / 16, 1.0, 128, 2.5, 1.0);
    const OracleCheck r = oracle_check(c);
    CHECK(r.l1_error <= 1e-4);
    CHECK(r.width_error <= 1e-6);
    CHECK_THROWS_AS(oracle_check(quartic_config(1.0 / 16, 1.0, 128, 2.5, 1.0)), UnsupportedError);
}

TEST_CASE("parametrix report for the heat case") {
    Quadrature q;
    q.n_t = 8;
    q.q = 4;
    const ParametrixReport r = parametrix_report("heat", {0.25}, {}, {1.0, 0.0}, 1.0, 32, q);
    REQUIRE(r.rows.size() == 1);
    const ParametrixCaseRow& row = r.rows.front();
    CHECK(row.kernels[1].kernel == "R1");
    CHECK(row.kernels[1].l1 <= 1e-6);
    CHECK(row.kernels[2].l1 <= 1e-10);
    CHECK(row.kernels[0].mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("command line exit codes") {
    const fs::path dir = scratch("cli");
    io::write_json(dir / "good.json", to_json(small_quadratic(0.05)));
    json bad = to_json(small_quadratic());
    bad["mystery"] = 1;
    io::write_json(dir / "bad.json", bad);
    json gate = to_json(small_quadratic());
    gate["initial"]["components"][0]["center"] = {3.3, 0.0};
    io::write_json(dir / "gate.json", gate);

    CHECK(cli("validate --config " + (dir / "good.json").string()) == 0);
    CHECK(cli("validate --config " + (dir / "bad.json").string()) == 1);
    CHECK(cli("run --config " + (dir / "good.json").string() + " --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "metrics.csv"));
    CHECK(cli("run --config " + (dir / "gate.json").string() + " --out " + (dir / "out2").string()) == 2);
    CHECK(cli("oracle-check --config " + (dir / "good.json").string()) == 0);
}
