#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lfp/phasespace.hpp"
#include "lfp/weyl.hpp"

namespace lfp::io {

// Binary snapshot: magic "LFPSNP01", u64 little-endian header length, UTF-8
// JSON header, then the payload row-major with x as the major axis.
inline constexpr char kSnapshotMagic[9] = "LFPSNP01";

void write_field_snapshot(const std::filesystem::path& path, const SymbolField& a, double gamma, double t);
void write_operator_snapshot(const std::filesystem::path& path, const Operator& A, double gamma, double t);

struct Snapshot {
    nlohmann::json header;
    Eigen::MatrixXd real;      // kind == "field"
    Eigen::MatrixXcd complex;  // kind == "operator"
};

Snapshot read_snapshot(const std::filesystem::path& path);

struct MetricsRow {
    double t = 0.0;
    double trace_dist = 0.0;
    double hs_dist = 0.0;
    double trace_re = 0.0;
    double trace_im = 0.0;
    double herm_defect = 0.0;
    double min_eig = 0.0;
    double mass = 0.0;
    double l1_norm = 0.0;
    double w11_eps = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "t,trace_dist,hs_dist,trace_re,trace_im,herm_defect,min_eig,mass,l1_norm,w11_eps";

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace lfp::io
