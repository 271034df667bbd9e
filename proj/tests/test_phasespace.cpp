#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lfp/errors.hpp"
#include "lfp/phasespace.hpp"

using namespace lfp;
using std::numbers::pi;

TEST_CASE("grid spacings and cell identity") {
    const PhaseGrid g = build_grid(256, 4.0, 1.0 / 16);
    CHECK(g.dx() == doctest::Approx(1.0 / 32).epsilon(1e-15));
    CHECK(g.dxi() == doctest::Approx(pi / 64).epsilon(1e-15));

    for (auto [n, L, h] : {std::tuple{16, pi, 1.0}, {64, 2.5, 0.03}, {1024, 3.0, 1.0 / 128}}) {
        const PhaseGrid q = build_grid(n, L, h);
        CHECK(std::abs(q.dx() * q.dxi() * n - 2 * pi * h) <= 1e-14 * h);
    }
    CHECK_THROWS_AS(build_grid(15, 4.0, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid(8, 4.0, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid(64, 0.0, 1.0), ConfigError);
}

TEST_CASE("sampling constants and coherent symbols") {
    const PhaseGrid g = build_grid(128, 3.0, 1.0 / 16);
    const SymbolField one = sample_symbol(Polynomial2::constant(1.0), g);
    CHECK(one.values.minCoeff() == 1.0);
    CHECK(one.values.maxCoeff() == 1.0);

    const SymbolField a = coherent_symbol(g, 0.0, 0.0);
    CHECK(a.values.maxCoeff() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(integral(a) / (2 * pi * g.h) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(boundary_mass_fraction(a) < 1e-12);
}

TEST_CASE("boundary gate refuses fields that touch the box edge") {
    const PhaseGrid g = build_grid(64, 1.0, 0.5);
    const SymbolField wide = coherent_symbol(g, 0.0, 0.0);
    CHECK_THROWS_AS(require_boundary_gate(wide, 1e-8, "test"), BoundaryMassError);
    CHECK_THROWS_AS(spectral_derivative(wide, 1, 0), BoundaryMassError);
}

namespace {

// Exact L1 norm on the grid of d_x^i d_xi^j of the standard coherent symbol at the origin,
// using physicists' Hermite polynomials: d^k exp(-u^2/h) = (-1)^k h^{-k/2} H_k(u/sqrt h) exp(-u^2/h).
double coherent_derivative_l1(const PhaseGrid& g, int i, int j) {
    const auto hermite = [](int k, double u) {
        double a = 1.0, b = 2.0 * u;
        if (k == 0) return a;
        for (int n = 1; n < k; ++n) {
            const double c = 2.0 * u * b - 2.0 * n * a;
            a = b;
            b = c;
        }
        return b;
    };
    const double sh = std::sqrt(g.h);
    double s = 0.0;
    for (int m = 0; m < g.n; ++m) {
        const double u = g.x(m) / sh;
        const double fx = hermite(i, u) * std::exp(-u * u) / std::pow(sh, i);
        for (int k = 0; k < g.n; ++k) {
            const double v = g.xi(k) / sh;
            s += std::abs(fx * hermite(j, v) * std::exp(-v * v) / std::pow(sh, j));
        }
    }
    return 2.0 * s * g.cell_area();
}

} // namespace

TEST_CASE("spectral derivatives of coherent symbols") {
    const double h = 1.0 / 16;
    const PhaseGrid g = build_grid(128, 3.0, h);
    const SymbolField a = coherent_symbol(g, 0.0, 0.0);
    const SymbolField ax = spectral_derivative(a, 1, 0);
    CHECK(std::abs(ax.values(64, 64)) <= 1e-8);
    CHECK(l1_norm(ax) == doctest::Approx(coherent_derivative_l1(g, 1, 0)).epsilon(1e-10));

    // Continuum value: the weighted mean of |2x/h| under exp(-x^2/h) is 2/sqrt(pi h).
    // The grid sum of a kinked integrand converges only at second order.
    const double ratio = l1_norm(ax) / l1_norm(a);
    CHECK(ratio == doctest::Approx(2.0 / std::sqrt(pi * h)).epsilon(1e-2));

    const SymbolField xy = spectral_derivative(ax, 0, 1);
    const SymbolField yx = spectral_derivative(spectral_derivative(a, 0, 1), 1, 0);
    CHECK((xy.values - yx.values).norm() <= 1e-12 * xy.values.norm());
    CHECK(l1_norm(xy) == doctest::Approx(coherent_derivative_l1(g, 1, 1)).epsilon(1e-10));
    CHECK(l1_norm(spectral_derivative(a, 0, 3)) == doctest::Approx(coherent_derivative_l1(g, 0, 3)).epsilon(1e-10));

    // A constant is band limited; the periodic box is then exact and the gate can be lifted.
    const SymbolField c = sample_symbol([](double, double) { return 3.0; }, g);
    CHECK(spectral_derivative(c, 1, 0, 1.0).values.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("semiclassical Sobolev norm") {
    const double h = 1.0 / 16;
    const PhaseGrid g = build_grid(128, 3.0, h);
    const SymbolField a = coherent_symbol(g, 0.0, 0.0);
    const double l1 = l1_norm(a);
    CHECK(sobolev_norm(a, 0, 0.3) == doctest::Approx(l1).epsilon(1e-14));

    const double eps = std::sqrt(h);
    const double c1 = sobolev_norm(a, 1, eps) / l1 - 1.0;
    const double grid_c1 = eps * (coherent_derivative_l1(g, 1, 0) + coherent_derivative_l1(g, 0, 1)) / l1;
    CHECK(c1 == doctest::Approx(grid_c1).epsilon(1e-10));
    CHECK(c1 == doctest::Approx(4.0 / std::sqrt(pi)).epsilon(1e-2));

    const double semi = sobolev_norm(a, 1, eps) - l1;
    CHECK(sobolev_norm(a, 1, 2 * eps) - l1 == doctest::Approx(2 * semi).epsilon(1e-12));

    double prev = 0.0;
    for (int r = 0; r <= 4; ++r) {
        const double v = sobolev_norm(a, r, eps);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("hamiltonian vector fields") {
    const VectorFieldSpec v1 = hamiltonian_vector_field(HamiltonianSpec{{{1, 1, 1.0}}});
    CHECK(v1.vx(0.7, -0.2) == doctest::Approx(0.7));
    CHECK(v1.vxi(0.7, -0.2) == doctest::Approx(0.2));

    const VectorFieldSpec v2 = hamiltonian_vector_field(HamiltonianSpec{{{2, 0, 0.5}, {0, 2, 0.5}}});
    CHECK(v2.vx(0.3, 1.1) == doctest::Approx(1.1));
    CHECK(v2.vxi(0.3, 1.1) == doctest::Approx(-0.3));

    const HamiltonianSpec quartic{{{0, 2, 1.0}, {4, 0, 1.0}, {2, 0, -1.0}, {0, 0, 0.25}}};
    const VectorFieldSpec v3 = hamiltonian_vector_field(quartic);
    for (double x : {-1.3, 0.0, 0.4, 2.0}) {
        for (double xi : {-0.5, 0.9}) {
            CHECK(v3.vx(x, xi) == doctest::Approx(2 * xi));
            CHECK(v3.vxi(x, xi) == doctest::Approx(-4 * x * (x * x - 0.5)));
        }
    }
    CHECK(v3.divergence().is_zero());
}

TEST_CASE("flow maps") {
    const VectorFieldSpec hyper = hamiltonian_vector_field(HamiltonianSpec{{{1, 1, 1.0}}});
    const PhasePoint z{0.8, -0.6};
    const PhasePoint e = flow_point(hyper, 1.3, z);
    CHECK(std::abs(e[0] - 0.8 * std::exp(1.3)) <= 1e-8);
    CHECK(std::abs(e[1] + 0.6 * std::exp(-1.3)) <= 1e-8);

    const PhasePoint same = flow_point(hyper, 0.0, z);
    CHECK(same[0] == z[0]);
    CHECK(same[1] == z[1]);

    const VectorFieldSpec rot = hamiltonian_vector_field(HamiltonianSpec{{{2, 0, 0.5}, {0, 2, 0.5}}});
    const PhasePoint back = flow_point(rot, 2 * pi, {1.0, 0.25});
    CHECK(std::abs(back[0] - 1.0) <= 1e-8);
    CHECK(std::abs(back[1] - 0.25) <= 1e-8);

    const VectorFieldSpec quartic =
        hamiltonian_vector_field(HamiltonianSpec{{{0, 2, 1.0}, {4, 0, 1.0}, {2, 0, -1.0}}});
    const PhasePoint ab = flow_point(quartic, 0.7, flow_point(quartic, 0.5, z));
    const PhasePoint direct = flow_point(quartic, 1.2, z);
    CHECK(std::abs(ab[0] - direct[0]) <= 1e-8);
    CHECK(std::abs(ab[1] - direct[1]) <= 1e-8);

    CHECK_THROWS_AS(flow_point(hyper, 10.0, {1.0, 0.0}, 100.0), FlowEscapeError);
}

TEST_CASE("hamiltonian flows preserve volume") {
    const VectorFieldSpec v =
        hamiltonian_vector_field(HamiltonianSpec{{{0, 2, 1.0}, {4, 0, 1.0}, {2, 0, -1.0}}});
    const double d = 1e-5;
    for (PhasePoint z : {PhasePoint{0.5, 0.5}, PhasePoint{-0.9, 0.1}, PhasePoint{0.2, -0.7}}) {
        const auto f = [&](double dx, double dxi) { return flow_point(v, 1.5, {z[0] + dx, z[1] + dxi}); };
        const PhasePoint xp = f(d, 0), xm = f(-d, 0), yp = f(0, d), ym = f(0, -d);
        const double j11 = (xp[0] - xm[0]) / (2 * d), j21 = (xp[1] - xm[1]) / (2 * d);
        const double j12 = (yp[0] - ym[0]) / (2 * d), j22 = (yp[1] - ym[1]) / (2 * d);
        CHECK(std::abs(j11 * j22 - j12 * j21 - 1.0) <= 1e-6);
    }
}

TEST_CASE("moyal product") {
    const double h = 1.0 / 16;
    const PhaseGrid g = build_grid(64, 2.0, h);
    const SymbolField x = sample_symbol(Polynomial2::monomial(1, 0), g);
    const SymbolField xi = sample_symbol(Polynomial2::monomial(0, 1), g);
    const ComplexField prod = moyal_product(x, xi, 2, h);
    for (int m : {3, 30, 50}) {
        for (int j : {5, 32, 60}) {
            CHECK(std::abs(prod.values(m, j) - std::complex<double>(g.x(m) * g.xi(j), h / 2)) <= 1e-12);
        }
    }

    const SymbolField a = coherent_symbol(g, 0.2, -0.1);
    const SymbolField one = sample_symbol(Polynomial2::constant(1.0), g);
    for (int order = 1; order <= 4; ++order) {
        CHECK((moyal_product(one, a, order, h).values - a.values.cast<std::complex<double>>()).norm() <=
              1e-12 * a.values.norm());
    }
    const ComplexField pointwise = moyal_product(a, x, 1, h);
    CHECK((pointwise.values - a.values.cwiseProduct(x.values).cast<std::complex<double>>()).norm() == 0.0);

    const ComplexField ab = moyal_product(a, x, 3, h), ba = moyal_product(x, a, 3, h);
    CHECK((ab.values.conjugate() - ba.values).norm() <= 1e-12 * ab.values.norm());

    // For quadratic p the commutator symbol is (h/i){p, a}.
    const SymbolField p = sample_symbol(Polynomial2::monomial(1, 1), g);
    const Eigen::MatrixXcd comm = moyal_product(p, a, 3, h).values - moyal_product(a, p, 3, h).values;
    const Eigen::MatrixXcd expected =
        std::complex<double>(0.0, -h) * poisson_bracket(p, a).values.cast<std::complex<double>>();
    CHECK((comm - expected).norm() <= 1e-10 * expected.norm());
}

TEST_CASE("ellipticity constant") {
    CHECK(validate_ellipticity(JumpSpec{{{1, 0, 0}, {0, 1, 0}}}) == doctest::Approx(1.0));
    CHECK(validate_ellipticity(JumpSpec{{{1, 0, 0}}}) == doctest::Approx(0.0));
    CHECK(validate_ellipticity(JumpSpec{{{1, 1, 0}, {1, -1, 0}}}) == doctest::Approx(2.0));
}
