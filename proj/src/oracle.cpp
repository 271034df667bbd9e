#include "lfp/oracle.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "lfp/errors.hpp"

namespace lfp {

GaussianState make_gaussian_state(double weight, PhasePoint center, const Eigen::Matrix2d& cov,
                                  bool pure_flag, double h) {
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw ConfigError("gaussian weight must be >= 0");
    if (!cov.allFinite() || std::abs(cov(0, 1) - cov(1, 0)) > 1e-14 * cov.norm()) {
        throw ConfigError("gaussian covariance must be finite and symmetric");
    }
    const Eigen::Matrix2d sym = 0.5 * (cov + cov.transpose());
    if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(sym).eigenvalues()(0) <= 0.0) {
        throw ConfigError("gaussian covariance must be positive definite");
    }
    if (pure_flag) {
        const double det = (2.0 * sym / h).determinant();
        if (std::abs(det - 1.0) > 1e-8) {
            std::ostringstream os;
            os << "pure gaussian state needs det(2 Sigma / h) = 1, got " << det;
            throw ConfigError(os.str());
        }
    }
    return GaussianState{weight, center, sym, pure_flag};
}

GaussianState coherent_state(PhasePoint center, double h, double weight) {
    return make_gaussian_state(weight, center, 0.5 * h * Eigen::Matrix2d::Identity(), true, h);
}

GaussianMixture make_mixture(std::vector<GaussianState> components) {
    if (components.empty()) throw ConfigError("gaussian mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
        if (c.weight < 0.0) throw ConfigError("mixture weights must be >= 0");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "mixture weights must sum to 1, got " << total;
        throw ConfigError(os.str());
    }
    return GaussianMixture{std::move(components)};
}

std::pair<double, double> example_widths(double h, double eps, double t) {
    if (!(h > 0.0) || !(eps > 0.0) || !(t >= 0.0)) throw ConfigError("example_widths: need h, eps > 0, t >= 0");
    const double e2 = eps * eps;
    return {(h - 2.0 * e2) * std::exp(-2.0 * t) + 2.0 * e2, (h + 2.0 * e2) * std::exp(2.0 * t) - 2.0 * e2};
}

GaussianState moment_flow(const GaussianState& g, const HamiltonianSpec& p, const JumpSpec& jumps,
                          const Params& params, double t) {
    p.validate();
    jumps.validate();
    if (p.degree() > 2) throw UnsupportedError("moment_flow needs a Hamiltonian of degree <= 2");
    const VectorFieldSpec v = hamiltonian_vector_field(p);
    const Eigen::Matrix2d F = v.jacobian(0.0, 0.0);
    const Eigen::Vector2d c(v.vx(0.0, 0.0), v.vxi(0.0, 0.0));

    Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
    for (const auto& l : jumps.components) {
        const Eigen::Vector2d w(l.beta, -l.alpha);
        D += w * w.transpose();
    }

    // m' = -(F m + c) as one linear system on (m, 1).
    Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
    aug.topLeftCorner<2, 2>() = -F * t;
    aug.topRightCorner<2, 1>() = -c * t;
    const Eigen::Vector3d m = aug.exp() * Eigen::Vector3d(g.center[0], g.center[1], 1.0);

    // Van Loan block exponential for int_0^t e^{-Fs} Q e^{-F^T s} ds.
    const Eigen::Matrix2d B = -F;
    Eigen::Matrix4d vl = Eigen::Matrix4d::Zero();
    vl.topLeftCorner<2, 2>() = -B * t;
    vl.topRightCorner<2, 2>() = 2.0 * params.eps2() * D * t;
    vl.bottomRightCorner<2, 2>() = B.transpose() * t;
    const Eigen::Matrix4d ev = vl.exp();
    const Eigen::Matrix2d eb = ev.bottomRightCorner<2, 2>().transpose();  // e^{B t}
    const Eigen::Matrix2d noise = eb * ev.topRightCorner<2, 2>();
    Eigen::Matrix2d sigma = eb * g.covariance * eb.transpose() + noise;
    sigma = 0.5 * (sigma + sigma.transpose());

    GaussianState out = g;
    out.center = {m(0), m(1)};
    out.covariance = sigma;
    // Diffusion mixes the state, so purity is only kept by the closed flow.
    out.pure_flag = g.pure_flag && params.eps2() == 0.0;
    return out;
}

SymbolField mixture_field(const GaussianMixture& mix, const PhaseGrid& grid, double h,
                          double boundary_threshold) {
    const int n = grid.n;
    Eigen::MatrixXd val = Eigen::MatrixXd::Zero(n, n), mid = Eigen::MatrixXd::Zero(n, n);
    for (const auto& g : mix.components) {
        const Eigen::Matrix2d inv = g.covariance.inverse();
        const double amp = g.weight * h / std::sqrt(g.covariance.determinant());
        auto eval = [&](double x, double xi) {
            const Eigen::Vector2d r(x - g.center[0], xi - g.center[1]);
            return amp * std::exp(-0.5 * r.dot(inv * r));
        };
        Eigen::MatrixXd part(n, n), part_mid(n, n);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                part(i, j) = eval(grid.x(i), grid.xi(j));
                part_mid(i, j) = eval(grid.x(i) + grid.dx() / 2.0, grid.xi(j));
            }
        }
        require_boundary_gate(make_field(grid, part), boundary_threshold, "mixture_field component");
        val += part;
        mid += part_mid;
    }
    SymbolField a = make_field(grid, val);
    a.midpoint_values = mid;
    return a;
}

} // namespace lfp
