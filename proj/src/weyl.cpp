#include "lfp/weyl.hpp"

#include <cmath>
#include <numbers>

#include "lfp/errors.hpp"
#include "lfp/fft.hpp"
#include "lfp/linalg.hpp"

namespace lfp {

namespace {

constexpr double kPi = std::numbers::pi;

int pmod(int a, int n) { return ((a % n) + n) % n; }

Eigen::VectorXcd half_shift_multiplier(int n, double dx, int sign) {
    Eigen::VectorXcd mult(n);
    const double k0 = 2.0 * kPi / (n * dx);
    for (int q = 0; q < n; ++q) {
        const int f = fft::bin_frequency(q, n);
        const double phase = k0 * f * dx / 2.0;
        mult(q) = (f == -n / 2) ? std::complex<double>(std::cos(phase), 0.0)
                                : std::polar(1.0, sign * phase);
    }
    return mult;
}

Operator quantize_rows(const PhaseGrid& grid, const Eigen::MatrixXd& rows) {
    const int n = grid.n;
    Eigen::MatrixXcd c = rows.cast<std::complex<double>>();
    fft::rows(c, fft::Direction::Backward);
    for (int d = 0; d < n; ++d) c.col(d) *= (d % 2 == 0 ? 1.0 : -1.0) / n;

    Operator op{grid, Eigen::MatrixXcd(n, n)};
    for (int mp = 0; mp < n; ++mp) {
        for (int m = 0; m < n; ++m) {
            const int d0 = m - mp;
            const int d = pmod(d0 + n / 2, n) - n / 2;
            const int s = pmod(m + mp - (d0 - d), 2 * n);
            op.M(m, mp) = c(s, pmod(d, n));
        }
    }
    for (int m = 0; m < n; ++m) {
        const int mp = m + n / 2;
        if (mp < n) {
            const auto avg = 0.5 * (op.M(m, mp) + op.M(mp, m));
            op.M(m, mp) = avg;
            op.M(mp, m) = avg;
        }
    }
    return op;
}

} // namespace

Eigen::MatrixXcd half_shift(const Eigen::MatrixXcd& a, double dx, int sign) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXcd w = a;
    fft::columns(w, fft::Direction::Forward);
    const Eigen::VectorXcd mult = half_shift_multiplier(n, dx, sign);
    for (int j = 0; j < w.cols(); ++j) w.col(j).array() *= mult.array() / static_cast<double>(n);
    fft::columns(w, fft::Direction::Backward);
    return w;
}

Eigen::MatrixXd half_shift(const Eigen::MatrixXd& a, double dx, int sign) {
    return half_shift(Eigen::MatrixXcd(a.cast<std::complex<double>>()), dx, sign).real();
}

Eigen::MatrixXcd momentum_power(const PhaseGrid& grid, int k) {
    const int n = grid.n;
    Eigen::VectorXcd v(n);
    for (int q = 0; q < n; ++q) v(q) = std::pow(fft::bin_frequency(q, n) * grid.dxi(), k);
    fft::vector(v, fft::Direction::Backward);
    v /= static_cast<double>(n);
    Eigen::MatrixXcd dk(n, n);
    for (int mp = 0; mp < n; ++mp) {
        for (int m = 0; m < n; ++m) dk(m, mp) = v(pmod(m - mp, n));
    }
    return dk;
}

Operator quantize(const Polynomial2& p, const PhaseGrid& grid) {
    const int n = grid.n;
    const Eigen::VectorXd x = grid.x_nodes();
    Operator op{grid, Eigen::MatrixXcd::Zero(n, n)};
    for (const auto& [e, c] : p.terms()) {
        const int j = e.first, k = e.second;
        const Eigen::MatrixXcd dk = momentum_power(grid, k);
        double binom = 1.0;
        for (int i = 0; i <= j; ++i) {
            const double w = c * binom / std::pow(2.0, j);
            const Eigen::ArrayXd left = x.array().pow(i);
            const Eigen::ArrayXd right = x.array().pow(j - i);
            for (int mp = 0; mp < n; ++mp) {
                op.M.col(mp).array() += w * right(mp) * left * dk.col(mp).array();
            }
            binom = binom * (j - i) / (i + 1);
        }
    }
    return op;
}

Operator quantize(const SymbolField& a, double boundary_threshold) {
    if (a.source) return quantize(*a.source, a.grid);
    require_boundary_gate(a, boundary_threshold, "quantize");
    const int n = a.grid.n;
    const Eigen::MatrixXd mid =
        a.midpoint_values ? *a.midpoint_values : half_shift(a.values, a.grid.dx(), +1);
    Eigen::MatrixXd rows(2 * n, n);
    for (int m = 0; m < n; ++m) {
        rows.row(2 * m) = a.values.row(m);
        rows.row(2 * m + 1) = mid.row(m);
    }
    return quantize_rows(a.grid, rows);
}

namespace {

// Even- and odd-midpoint Wigner sums; the odd part lives at x_m + dx/2.
void wigner_parts(const Operator& A, Eigen::MatrixXcd& we, Eigen::MatrixXcd& wo) {
    const int n = A.grid.n;
    we = Eigen::MatrixXcd::Zero(n, n);
    wo = Eigen::MatrixXcd::Zero(n, n);
    for (int j = -n / 4; j < n / 4; ++j) {
        const int ce = pmod(2 * j, n), co = pmod(2 * j + 1, n);
        for (int m = 0; m < n; ++m) {
            we(m, ce) = A.M(pmod(m + j, n), pmod(m - j, n));
            wo(m, co) = -A.M(pmod(m + j + 1, n), pmod(m - j, n));
        }
    }
    fft::rows(we, fft::Direction::Forward);
    fft::rows(wo, fft::Direction::Forward);
}

} // namespace

ComplexField dequantize_complex(const Operator& A) {
    Eigen::MatrixXcd we, wo;
    wigner_parts(A, we, wo);
    return ComplexField{A.grid, we + half_shift(wo, A.grid.dx(), -1)};
}

SymbolField dequantize(const Operator& A) {
    Eigen::MatrixXcd we, wo;
    wigner_parts(A, we, wo);
    const Eigen::MatrixXd odd = wo.real();
    SymbolField a = make_field(A.grid, we.real() + half_shift(odd, A.grid.dx(), -1));
    a.midpoint_values = odd + half_shift(Eigen::MatrixXd(we.real()), A.grid.dx(), +1);
    return a;
}

double herm_defect(const Eigen::MatrixXcd& A) {
    const double norm = A.norm();
    if (norm == 0.0) return 0.0;
    return (A - A.adjoint()).norm() / norm;
}

double min_eigenvalue(const Eigen::MatrixXcd& A) {
    const Eigen::MatrixXcd herm = 0.5 * (A + A.adjoint());
    return linalg::hermitian_eigenvalues(herm)(0);
}

namespace {

double trace_norm_from(const Eigen::MatrixXcd& A, const Eigen::VectorXd& herm_eigs) {
    const double herm_sum = herm_eigs.cwiseAbs().sum();
    const double anti = 0.5 * (A - A.adjoint()).norm();
    // |tr-norm(A) - tr-norm(H)| <= tr-norm(A - H) <= sqrt(N) ||A - H||_F.
    if (anti * std::sqrt(static_cast<double>(A.rows())) <= 1e-13 * std::max(herm_sum, 1e-300)) {
        return herm_sum;
    }
    return linalg::singular_values(A).sum();
}

} // namespace

double trace_norm(const Eigen::MatrixXcd& A) {
    const Eigen::MatrixXcd herm = 0.5 * (A + A.adjoint());
    return trace_norm_from(A, linalg::hermitian_eigenvalues(herm));
}

double trace_distance(const Operator& A, const Operator& B) {
    if (!(A.grid == B.grid)) throw ConfigError("trace_distance: grid mismatch");
    return trace_norm(A.M - B.M);
}

Diagnostics diagnostics(const Operator& A) {
    Diagnostics d;
    d.trace = A.M.trace();
    d.hs_norm = A.M.norm();
    d.herm_defect = herm_defect(A.M);
    const Eigen::MatrixXcd herm = 0.5 * (A.M + A.M.adjoint());
    const Eigen::VectorXd eigs = linalg::hermitian_eigenvalues(herm);
    if (!eigs.allFinite()) throw NumericalError("diagnostics: non-finite eigenvalues");
    d.min_eigenvalue = eigs(0);
    d.trace_norm = trace_norm_from(A.M, eigs);
    return d;
}

double trace_norm_upper_bound(const SymbolField& a, double h, double boundary_threshold) {
    double s = 0.0;
    for (int total = 0; total <= 3; ++total) {
        for (int i = 0; i <= total; ++i) {
            const double w = std::pow(h, total / 2.0);
            s += w * l1_norm(total == 0 ? a : spectral_derivative(a, i, total - i, boundary_threshold));
        }
    }
    return s / h;
}

} // namespace lfp
