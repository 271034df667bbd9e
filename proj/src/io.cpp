#include "lfp/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lfp/errors.hpp"

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace lfp::io {

namespace {

void write_snapshot(const std::filesystem::path& path, const nlohmann::json& header, const double* data,
                    std::size_t count) {
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open snapshot for writing: " + path.string());
    out.write(kSnapshotMagic, 8);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw NumericalError("failed writing snapshot " + path.string());
}

nlohmann::json base_header(const std::string& kind, const PhaseGrid& g, double gamma, double t,
                           const std::string& dtype) {
    return nlohmann::json{{"kind", kind},
                          {"h", g.h},
                          {"gamma", gamma},
                          {"t", t},
                          {"grid", {{"n", g.n}, {"L", g.L}}},
                          {"dtype", dtype},
                          {"layout", "row-major"}};
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

void write_field_snapshot(const std::filesystem::path& path, const SymbolField& a, double gamma, double t) {
    const int n = a.grid.n;
    std::vector<double> buf(static_cast<std::size_t>(n) * n);
    for (int m = 0; m < n; ++m) {
        for (int j = 0; j < n; ++j) buf[static_cast<std::size_t>(m) * n + j] = a.values(m, j);
    }
    write_snapshot(path, base_header("field", a.grid, gamma, t, "f64le"), buf.data(), buf.size());
}

void write_operator_snapshot(const std::filesystem::path& path, const Operator& A, double gamma, double t) {
    const int n = A.grid.n;
    std::vector<double> buf(2 * static_cast<std::size_t>(n) * n);
    for (int m = 0; m < n; ++m) {
        for (int k = 0; k < n; ++k) {
            const std::size_t idx = 2 * (static_cast<std::size_t>(m) * n + k);
            buf[idx] = A.M(m, k).real();
            buf[idx + 1] = A.M(m, k).imag();
        }
    }
    write_snapshot(path, base_header("operator", A.grid, gamma, t, "c128le"), buf.data(), buf.size());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kSnapshotMagic, 8) != 0) throw ConfigError("bad snapshot magic in " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1u << 20)) throw ConfigError("bad snapshot header length in " + path.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    Snapshot s;
    try {
        s.header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad snapshot header: ") + e.what());
    }
    const int n = s.header.at("grid").at("n").get<int>();
    const std::string kind = s.header.at("kind").get<std::string>();
    const std::size_t count = static_cast<std::size_t>(n) * n * (kind == "operator" ? 2 : 1);
    std::vector<double> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ConfigError("truncated snapshot payload in " + path.string());
    if (kind == "field") {
        s.real.resize(n, n);
        for (int m = 0; m < n; ++m) {
            for (int j = 0; j < n; ++j) s.real(m, j) = buf[static_cast<std::size_t>(m) * n + j];
        }
    } else if (kind == "operator") {
        s.complex.resize(n, n);
        for (int m = 0; m < n; ++m) {
            for (int k = 0; k < n; ++k) {
                const std::size_t idx = 2 * (static_cast<std::size_t>(m) * n + k);
                s.complex(m, k) = {buf[idx], buf[idx + 1]};
            }
        }
    } else {
        throw ConfigError("unknown snapshot kind '" + kind + "'");
    }
    return s;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open metrics file: " + path.string());
    out << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        const double vals[] = {r.t,         r.trace_dist, r.hs_dist, r.trace_re, r.trace_im,
                               r.herm_defect, r.min_eig,  r.mass,    r.l1_norm,  r.w11_eps};
        for (std::size_t i = 0; i < std::size(vals); ++i) out << (i ? "," : "") << format_double(vals[i]);
        out << '\n';
    }
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open metrics file: " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kMetricsHeader) throw ConfigError("unexpected metrics header in " + path.string());
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 10) throw ConfigError("metrics row with wrong column count in " + path.string());
        rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
    }
    return rows;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace lfp::io
