#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lfp/errors.hpp"
#include "lfp/weyl.hpp"

using namespace lfp;
using std::numbers::pi;
using cd = std::complex<double>;

namespace {

SymbolField bump(const PhaseGrid& g, double x0, double xi0, double sx, double sxi) {
    return sample_symbol(
        [=](double x, double xi) {
            const double u = (x - x0) / sx, v = (xi - xi0) / sxi;
            return std::exp(-u * u - v * v) * (1.0 + 0.3 * u * v);
        },
        g);
}

} // namespace

TEST_CASE("quantize constants and multiplication symbols") {
    const PhaseGrid g = build_grid(64, 2.0, 1.0 / 16);
    const Operator one = quantize(sample_symbol(Polynomial2::constant(1.0), g));
    CHECK((one.M - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff() <= 1e-12);

    const Operator one_exact = quantize(Polynomial2::constant(1.0), g);
    CHECK((one_exact.M - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff() <= 1e-12);

    const Operator X = quantize(Polynomial2::monomial(1, 0), g);
    Eigen::MatrixXcd diag = Eigen::MatrixXcd::Zero(64, 64);
    for (int m = 0; m < 64; ++m) diag(m, m) = g.x(m);
    CHECK((X.M - diag).cwiseAbs().maxCoeff() <= 1e-12);

    const SymbolField back = dequantize(Operator{g, diag});
    for (int m = 0; m < 64; m += 7) {
        for (int j = 0; j < 64; j += 9) CHECK(std::abs(back.values(m, j) - g.x(m)) <= 1e-12);
    }
    const SymbolField flat = dequantize(Operator{g, Eigen::MatrixXcd::Identity(64, 64)});
    CHECK((flat.values.array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("coherent state quantization") {
    const double h = 1.0 / 16;
    const PhaseGrid g = build_grid(128, 3.0, h);
    const SymbolField a = coherent_symbol(g, 0.4, -0.3);
    const Operator A = quantize(a);
    const Diagnostics d = diagnostics(A);
    CHECK(std::abs(d.trace - cd(1.0)) <= 1e-8);
    CHECK(d.trace_norm == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(d.herm_defect <= 1e-10);
    CHECK(d.min_eigenvalue >= -1e-6);
    CHECK(std::abs(d.trace) <= d.trace_norm + 1e-8);
    CHECK(d.hs_norm <= d.trace_norm + 1e-8);

    const SymbolField back = dequantize(A);
    CHECK((back.values - a.values).norm() <= 1e-8 * a.values.norm());
}

TEST_CASE("diagnostics of simple matrices") {
    const PhaseGrid g = build_grid(256, 4.0, 1.0 / 16);
    const Diagnostics id = diagnostics(Operator{g, Eigen::MatrixXcd::Identity(256, 256)});
    CHECK(id.trace.real() == doctest::Approx(256.0));
    CHECK(id.hs_norm == doctest::Approx(16.0));

    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd u(256);
    for (int i = 0; i < 256; ++i) u(i) = cd(nd(rng), nd(rng));
    u.normalize();
    const Diagnostics proj = diagnostics(Operator{g, u * u.adjoint()});
    CHECK(proj.trace_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(proj.hs_norm == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::MatrixXcd skew = Eigen::MatrixXcd::Zero(4, 4);
    skew(0, 1) = 1.0;
    CHECK(trace_norm(skew) == doctest::Approx(1.0));
    CHECK(herm_defect(skew) > 0.5);
}

TEST_CASE("linearity, hermiticity, trace and Hilbert-Schmidt identities") {
    const double h = 1.0 / 16;
    const PhaseGrid g = build_grid(128, 3.0, h);
    const SymbolField a = bump(g, 0.3, 0.2, 0.5, 0.4);
    const SymbolField b = bump(g, -0.6, -0.1, 0.3, 0.7);
    SymbolField combo = make_field(g, 2.0 * a.values - 0.7 * b.values);

    const Operator Qa = quantize(a), Qb = quantize(b), Qc = quantize(combo);
    CHECK((Qc.M - (2.0 * Qa.M - 0.7 * Qb.M)).norm() <= 1e-12 * Qc.M.norm());
    CHECK(herm_defect(Qa.M) <= 1e-10);

    const double quad = integral(a) / (2 * pi * h);
    CHECK(std::abs(Qa.M.trace() - cd(quad)) <= 1e-8 * std::abs(quad));

    const double l2 = a.values.squaredNorm() * g.cell_area() / (2 * pi * h);
    CHECK(Qa.M.squaredNorm() == doctest::Approx(l2).epsilon(1e-8));

    const SymbolField back = dequantize(Qa);
    CHECK((back.values - a.values).norm() <= 1e-8 * a.values.norm());
}

TEST_CASE("exact polynomial quantization") {
    const PhaseGrid g = build_grid(64, 2.0, 1.0 / 8);
    const Eigen::MatrixXcd D = momentum_power(g, 1);
    Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(64, 64);
    for (int m = 0; m < 64; ++m) X(m, m) = g.x(m);

    const Operator xxi = quantize(Polynomial2::monomial(1, 1), g);
    CHECK((xxi.M - 0.5 * (X * D + D * X)).norm() <= 1e-10 * xxi.M.norm());
    CHECK((momentum_power(g, 2) - D * D).norm() <= 1e-10 * D.squaredNorm());
    CHECK(herm_defect(quantize(Polynomial2::monomial(4, 0) + Polynomial2::monomial(0, 2), g).M) <= 1e-10);
}

TEST_CASE("composition against the Moyal expansion") {
    const double h = 1.0 / 16;
    const PhaseGrid g = build_grid(128, 3.0, h);
    const SymbolField a = coherent_symbol(g, 0.2, 0.1);
    const SymbolField x = sample_symbol(Polynomial2::monomial(1, 0), g);
    const Operator prod{g, quantize(a).M * quantize(Polynomial2::monomial(1, 0), g).M};
    const ComplexField lhs = dequantize_complex(prod);
    const ComplexField rhs = moyal_product(a, x, 3, h);
    // Compare where the coherent factor lives; the linear factor wraps at the box edge.
    double err = 0.0, ref = 0.0;
    for (int m = 0; m < g.n; ++m) {
        for (int j = 0; j < g.n; ++j) {
            if (std::abs(g.x(m)) > 1.5) continue;
            err = std::max(err, std::abs(lhs.values(m, j) - rhs.values(m, j)));
            ref = std::max(ref, std::abs(rhs.values(m, j)));
        }
    }
    CHECK(err <= 1e-6 * ref);
}

TEST_CASE("trace-norm upper bound") {
    const PhaseGrid g0 = build_grid(64, 2.0, 1.0 / 16);
    CHECK(trace_norm_upper_bound(make_field(g0, Eigen::MatrixXd::Zero(64, 64)), 1.0 / 16) == 0.0);

    const SymbolField a = coherent_symbol(g0, 0.0, 0.0);
    SymbolField twice = a;
    twice.values *= 2.0;
    twice.midpoint_values.reset();
    SymbolField once = a;
    once.midpoint_values.reset();
    CHECK(trace_norm_upper_bound(twice, 1.0 / 16) == doctest::Approx(2.0 * trace_norm_upper_bound(once, 1.0 / 16)));

    // With J_k = int |d^k exp(-u^2)| du the coherent-state bound is 2 sum_{i+j<=3} J_i J_j,
    // independent of h; J_k from Hermite quadrature at u-step 1.2e-5.
    const double continuum = 133.90729880210145;
    const auto hermite = [](int k, double u) {
        double p = 1.0, q = 2.0 * u;
        if (k == 0) return p;
        for (int n = 1; n < k; ++n) {
            const double r = 2.0 * u * q - 2.0 * n * p;
            p = q;
            q = r;
        }
        return q;
    };
    for (int e = 4; e <= 8; ++e) {
        const double h = std::ldexp(1.0, -e);
        // Equal steps of about 0.11 in both scaled variables; kinks of |d a| cost O(step^2).
        const double L = 256.0 * std::sqrt(2 * pi / 512) * std::sqrt(h);
        const PhaseGrid g = build_grid(512, L, h);
        const SymbolField c = coherent_symbol(g, 0.0, 0.0);
        const double tn = trace_norm(quantize(c).M);
        CHECK(tn == doctest::Approx(1.0).epsilon(1e-8));

        double grid_bound = 0.0;
        for (int i = 0; i <= 3; ++i) {
            for (int j = 0; i + j <= 3; ++j) {
                double s = 0.0;
                for (int m = 0; m < g.n; ++m) {
                    const double u = g.x(m) / std::sqrt(h);
                    const double fu = hermite(i, u) * std::exp(-u * u);
                    for (int k = 0; k < g.n; ++k) {
                        const double v = g.xi(k) / std::sqrt(h);
                        s += std::abs(fu * hermite(j, v) * std::exp(-v * v));
                    }
                }
                grid_bound += 2.0 * s * g.cell_area() / h;
            }
        }
        const double ratio = trace_norm_upper_bound(c, h) / tn;
        CHECK(ratio == doctest::Approx(grid_bound).epsilon(1e-8));
        CHECK(ratio == doctest::Approx(continuum).epsilon(5e-3));
    }
}
