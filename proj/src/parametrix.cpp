#include "lfp/parametrix.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "lfp/errors.hpp"
#include "lfp/fft.hpp"
#include "lfp/jet.hpp"

namespace lfp {

namespace {

constexpr double kPi = std::numbers::pi;
using J3 = Jet<3>;

bool is_affine(const VectorFieldSpec& v) { return v.vx.degree() <= 1 && v.vxi.degree() <= 1; }

// The time-t flow map of v. Affine fields use the exact exponential.
class FlowStep {
public:
    FlowStep(const VectorFieldSpec& v, double t) : v_(&v), t_(t), affine_(is_affine(v)) {
        if (affine_) {
            Eigen::Matrix3d gen = Eigen::Matrix3d::Zero();
            gen.topLeftCorner<2, 2>() = v.jacobian(0.0, 0.0) * t;
            gen(0, 2) = v.vx(0.0, 0.0) * t;
            gen(1, 2) = v.vxi(0.0, 0.0) * t;
            map_ = exponential(gen);
        }
    }

    PhasePoint apply(PhasePoint z) const {
        if (!affine_) return flow_point(*v_, t_, z);
        return {map_(0, 0) * z[0] + map_(0, 1) * z[1] + map_(0, 2),
                map_(1, 0) * z[0] + map_(1, 1) * z[1] + map_(1, 2)};
    }

    Eigen::Matrix2d jacobian(PhasePoint z) const {
        if (affine_) return map_.topLeftCorner<2, 2>();
        const double d = 1e-6;
        Eigen::Matrix2d jac;
        for (int a = 0; a < 2; ++a) {
            PhasePoint zp = z, zm = z;
            zp[a] += d;
            zm[a] -= d;
            const PhasePoint fp = apply(zp), fm = apply(zm);
            jac(0, a) = (fp[0] - fm[0]) / (2 * d);
            jac(1, a) = (fp[1] - fm[1]) / (2 * d);
        }
        return jac;
    }

private:
    static Eigen::Matrix3d exponential(const Eigen::Matrix3d& a) {
        // Scaling and squaring with a Taylor core; the generators here are small and well conditioned.
        int squarings = 0;
        const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
        while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
        const Eigen::Matrix3d b = a / std::pow(2.0, squarings);
        Eigen::Matrix3d term = Eigen::Matrix3d::Identity(), sum = Eigen::Matrix3d::Identity();
        for (int k = 1; k <= 18; ++k) {
            term = term * b / k;
            sum += term;
        }
        for (int s = 0; s < squarings; ++s) sum = sum * sum;
        return sum;
    }

    const VectorFieldSpec* v_;
    double t_;
    bool affine_;
    Eigen::Matrix3d map_ = Eigen::Matrix3d::Identity();
};

template <class T>
struct DiagA {
    T a11, a22;
};

template <class T>
DiagA<T> diffusion_diag(const ParabolicProblem& prob, const T& x1, const T& x2) {
    if (prob.profile == DiffusionProfile::Identity) return {T(1.0), T(1.0)};
    using std::tanh;
    return {T(1.0) + prob.amplitude * tanh(x1), T(1.0) + prob.amplitude * tanh(x2)};
}

template <class T>
T k0_core(const ParabolicProblem& prob, const T& x1, const T& x2, const T& m1, const T& m2, const T& tau) {
    using std::exp;
    using std::sqrt;
    const DiagA<T> a = diffusion_diag(prob, x1, x2);
    const double e2 = prob.eps * prob.eps;
    const T r1 = x1 - m1, r2 = x2 - m2;
    const T quad = r1 * r1 / a.a11 + r2 * r2 / a.a22;
    const T scale = 4.0 * e2 * tau;
    return (1.0 / (4.0 * kPi * e2)) * exp(-(quad / scale)) / (tau * sqrt(a.a11 * a.a22));
}

// R1 at x for a source whose backward image m = phi^{-tau}(z) is known.
double r1_from_center(const ParabolicProblem& prob, PhasePoint x, PhasePoint m, double tau) {
    const auto vm = prob.v(m[0], m[1]);
    const J3 x1 = J3::variable(x[0], 0), x2 = J3::variable(x[1], 1), t = J3::variable(tau, 2);
    J3 m1(m[0]), m2(m[1]);
    m1.g[2] = -vm[0];
    m2.g[2] = -vm[1];
    const J3 k = k0_core(prob, x1, x2, m1, m2, t);

    const auto vx = prob.v(x[0], x[1]);
    const DiagA<double> a = diffusion_diag(prob, x[0], x[1]);
    double da11 = 0.0, da22 = 0.0;
    if (prob.profile == DiffusionProfile::Tanh) {
        da11 = prob.amplitude * (1.0 - std::tanh(x[0]) * std::tanh(x[0]));
        da22 = prob.amplitude * (1.0 - std::tanh(x[1]) * std::tanh(x[1]));
    }
    const double div = a.a11 * k.hess(0, 0) + a.a22 * k.hess(1, 1) + da11 * k.g[0] + da22 * k.g[1];
    const double qk = vx[0] * k.g[0] + vx[1] * k.g[1] + prob.eps * prob.eps * div;
    return -(k.g[2] - qk);
}

double k0_from_center(const ParabolicProblem& prob, PhasePoint x, PhasePoint m, double tau) {
    return k0_core<double>(prob, x[0], x[1], m[0], m[1], tau);
}

struct GaussHermite {
    std::vector<double> nodes, weights;
};

GaussHermite gauss_hermite(int q) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q, q);
    for (int k = 1; k < q; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    GaussHermite gh;
    for (int k = 0; k < q; ++k) {
        gh.nodes.push_back(es.eigenvalues()(k));
        gh.weights.push_back(std::sqrt(kPi) * es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
    }
    return gh;
}

Eigen::VectorXd kernel_wavenumbers(int n, double spacing) {
    Eigen::VectorXd k(n);
    for (int i = 0; i < n; ++i) k(i) = 2.0 * kPi * fft::bin_frequency(i, n) / (n * spacing);
    return k;
}

// Derivative along one axis by FFT; odd orders drop the Nyquist bin.
Eigen::MatrixXd kernel_derivative(const KernelGrid& g, const Eigen::MatrixXd& f, int axis, int order) {
    const int n = g.n;
    const Eigen::VectorXd k = kernel_wavenumbers(n, g.spacing(axis));
    Eigen::MatrixXcd c = f.cast<std::complex<double>>();
    if (axis == 0) fft::columns(c, fft::Direction::Forward);
    else fft::rows(c, fft::Direction::Forward);
    for (int q = 0; q < n; ++q) {
        std::complex<double> mult = std::pow(std::complex<double>(0.0, k(q)), order) / double(n);
        if (order % 2 == 1 && fft::bin_frequency(q, n) == -n / 2) mult = 0.0;
        if (axis == 0) c.row(q) *= mult;
        else c.col(q) *= mult;
    }
    if (axis == 0) fft::columns(c, fft::Direction::Backward);
    else fft::rows(c, fft::Direction::Backward);
    return c.real();
}

// Per-time-node data shared by every output point.
struct TimeNode {
    double s = 0.0, tau = 0.0, weight = 0.0;
    PhasePoint b{0.0, 0.0};             // phi^{-s}(y)
    Eigen::Matrix2d cov_b;              // 2 eps^2 s A(b)
    std::optional<FlowStep> forward;    // phi^{tau}
    std::optional<FlowStep> backward;   // phi^{-tau}
};

std::vector<TimeNode> time_nodes(const ParabolicProblem& prob, PhasePoint y, double t, int n_t) {
    std::vector<TimeNode> nodes;
    nodes.reserve(n_t);
    const double e2 = prob.eps * prob.eps;
    for (int i = 0; i < n_t; ++i) {
        const double th = (i + 0.5) / n_t;
        TimeNode nd;
        nd.s = t * std::pow(std::sin(kPi * th / 2.0), 2);
        nd.tau = t - nd.s;
        nd.weight = t * (kPi / 2.0) * std::sin(kPi * th) / n_t;
        nd.b = FlowStep(prob.v, -nd.s).apply(y);
        nd.cov_b = 2.0 * e2 * nd.s * diffusion_tensor(prob, nd.b);
        nd.forward.emplace(prob.v, nd.tau);
        nd.backward.emplace(prob.v, -nd.tau);
        nodes.push_back(std::move(nd));
    }
    return nodes;
}

enum class LeftFactor { K0, R1 };

// int_0^t int left(x, z, t - s) R1(z, y, s) dz ds at one output point.
double duhamel_point(const ParabolicProblem& prob, LeftFactor left, PhasePoint x,
                     const std::vector<TimeNode>& nodes, const GaussHermite& gh) {
    const double e2 = prob.eps * prob.eps;
    const int q = static_cast<int>(gh.nodes.size());
    double total = 0.0;
    for (const TimeNode& nd : nodes) {
        const PhasePoint a = nd.forward->apply(x);
        const Eigen::Matrix2d dphi = nd.forward->jacobian(x);
        const Eigen::Matrix2d cov_a = dphi * (2.0 * e2 * nd.tau * diffusion_tensor(prob, x)) * dphi.transpose();
        const Eigen::Matrix2d ia = cov_a.inverse(), ib = nd.cov_b.inverse();
        const Eigen::Matrix2d cov = (ia + ib).inverse();
        const Eigen::Vector2d mean =
            cov * (ia * Eigen::Vector2d(a[0], a[1]) + ib * Eigen::Vector2d(nd.b[0], nd.b[1]));
        const Eigen::Matrix2d chol = Eigen::LLT<Eigen::Matrix2d>(cov).matrixL();
        const double norm = 2.0 * kPi * std::sqrt(cov.determinant()) / kPi;

        double inner = 0.0;
        for (int i = 0; i < q; ++i) {
            for (int j = 0; j < q; ++j) {
                const Eigen::Vector2d u(gh.nodes[i], gh.nodes[j]);
                const Eigen::Vector2d z = mean + std::sqrt(2.0) * chol * u;
                const PhasePoint zp{z(0), z(1)};
                const PhasePoint m = nd.backward->apply(zp);
                const double lf = left == LeftFactor::R1 ? r1_from_center(prob, x, m, nd.tau)
                                                         : k0_from_center(prob, x, m, nd.tau);
                if (lf == 0.0) continue;
                const double rf = r1_from_center(prob, zp, nd.b, nd.s);
                inner += gh.weights[i] * gh.weights[j] * std::exp(u.squaredNorm()) * lf * rf;
            }
        }
        total += nd.weight * norm * inner;
    }
    return total;
}

Eigen::MatrixXd duhamel_grid(const ParabolicProblem& prob, LeftFactor left, PhasePoint y, double t,
                             const KernelGrid& grid, int n_t, int q) {
    const std::vector<TimeNode> nodes = time_nodes(prob, y, t, n_t);
    const GaussHermite gh = gauss_hermite(q);
    Eigen::MatrixXd out(grid.n, grid.n);
    const int n = grid.n;
#pragma omp parallel for schedule(dynamic)
    for (int idx = 0; idx < n * n; ++idx) {
        const int i = idx % n, j = idx / n;
        out(i, j) = duhamel_point(prob, left, grid.point(i, j), nodes, gh);
    }
    return out;
}

Eigen::MatrixXd checked_duhamel(const ParabolicProblem& prob, LeftFactor left, PhasePoint y, double t,
                                const KernelGrid& grid, const Quadrature& quad) {
    if (quad.n_t < 2 || quad.q < 2) throw ConfigError("quadrature needs n_t >= 2 and q >= 2");
    const Eigen::MatrixXd full = duhamel_grid(prob, left, y, t, grid, quad.n_t, quad.q);
    if (quad.verify_halving) {
        const Eigen::MatrixXd half = duhamel_grid(prob, left, y, t, grid, quad.n_t / 2, quad.q);
        const double scale = full.cwiseAbs().sum();
        // Below this L1 level the integrand is roundoff around an exact zero.
        if (scale * grid.cell_area() > 1e-10) {
            const double rel = (full - half).cwiseAbs().sum() / scale;
            if (rel > quad.halving_tol) {
                std::ostringstream os;
                os << "Duhamel quadrature did not converge: halving n_t changes the result by " << rel;
                throw NumericalError(os.str());
            }
        }
    }
    return full;
}

void require_positive_time(double t) {
    if (!(t > 0.0)) throw ConfigError("kernel time must be positive");
}

} // namespace

ParabolicProblem make_problem(const std::string& case_name, double eps) {
    if (!(eps > 0.0)) throw ConfigError("parabolic problem needs eps > 0");
    ParabolicProblem prob;
    prob.name = case_name;
    prob.eps = eps;
    if (case_name == "heat") {
        prob.v = VectorFieldSpec{};
    } else if (case_name == "linear-hyperbolic" || case_name == "variable-A") {
        prob.v = VectorFieldSpec{Polynomial2::monomial(1, 0), Polynomial2::monomial(0, 1, -1.0)};
        if (case_name == "variable-A") prob.profile = DiffusionProfile::Tanh;
    } else {
        throw ConfigError("unknown parametrix case '" + case_name + "'");
    }
    validate(prob);
    return prob;
}

void validate(const ParabolicProblem& prob) {
    if (!(prob.eps > 0.0)) throw ConfigError("parabolic problem needs eps > 0");
    for (const auto& [e, c] : prob.v.divergence().terms()) {
        (void)e;
        if (std::abs(c) > 1e-10) throw ConfigError("vector field must be divergence free");
    }
    if (prob.profile == DiffusionProfile::Tanh && !(std::abs(prob.amplitude) < 1.0)) {
        throw ConfigError("tanh diffusion profile needs |amplitude| < 1");
    }
}

Eigen::Matrix2d diffusion_tensor(const ParabolicProblem& prob, PhasePoint x) {
    const DiagA<double> a = diffusion_diag(prob, x[0], x[1]);
    return Eigen::Vector2d(a.a11, a.a22).asDiagonal();
}

PhasePoint backward_center(const ParabolicProblem& prob, PhasePoint y, double t) {
    return FlowStep(prob.v, -t).apply(y);
}

KernelGrid kernel_grid_for(const ParabolicProblem& prob, PhasePoint y, double t, int n, double widths) {
    require_positive_time(t);
    if (n < 8 || (n & (n - 1)) != 0) throw ConfigError("kernel grid size must be a power of two >= 8");
    // Gaussian moments of the full equation: m' = -v(m), S' = -J S - S J^T + 2 eps^2 A(m).
    const double e2 = prob.eps * prob.eps;
    const int steps = 400;
    const double h = t / steps;
    Eigen::Vector2d m(y[0], y[1]);
    Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
    double amax = 0.0;
    auto rhs = [&](const Eigen::Vector2d& mm, const Eigen::Matrix2d& ss, Eigen::Vector2d& dm, Eigen::Matrix2d& ds) {
        const auto vv = prob.v(mm(0), mm(1));
        const Eigen::Matrix2d jac = prob.v.jacobian(mm(0), mm(1));
        dm = Eigen::Vector2d(-vv[0], -vv[1]);
        ds = -jac * ss - ss * jac.transpose() + 2.0 * e2 * diffusion_tensor(prob, {mm(0), mm(1)});
    };
    for (int s = 0; s < steps; ++s) {
        Eigen::Vector2d k1m, k2m, k3m, k4m;
        Eigen::Matrix2d k1s, k2s, k3s, k4s;
        rhs(m, S, k1m, k1s);
        rhs(m + 0.5 * h * k1m, S + 0.5 * h * k1s, k2m, k2s);
        rhs(m + 0.5 * h * k2m, S + 0.5 * h * k2s, k3m, k3s);
        rhs(m + h * k3m, S + h * k3s, k4m, k4s);
        m += h / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m);
        S += h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
        amax = std::max(amax, diffusion_tensor(prob, {m(0), m(1)}).maxCoeff());
    }
    KernelGrid g;
    g.n = n;
    g.center = backward_center(prob, y, t);
    for (int a = 0; a < 2; ++a) {
        const double var = std::max(S(a, a), 2.0 * e2 * t * std::max(amax, 1.0));
        g.halfwidth[a] = widths * std::sqrt(var);
    }
    return g;
}

double l1_norm(const KernelField& k) { return k.values.cwiseAbs().sum() * k.grid.cell_area(); }

double mass(const KernelField& k) { return k.values.sum() * k.grid.cell_area(); }

double k0_value(const ParabolicProblem& prob, PhasePoint x, PhasePoint y, double t) {
    require_positive_time(t);
    return k0_from_center(prob, x, backward_center(prob, y, t), t);
}

double r1_value(const ParabolicProblem& prob, PhasePoint x, PhasePoint y, double t) {
    require_positive_time(t);
    return r1_from_center(prob, x, backward_center(prob, y, t), t);
}

KernelField k0_kernel(const ParabolicProblem& prob, PhasePoint y, double t, const KernelGrid& grid) {
    require_positive_time(t);
    const PhasePoint m = backward_center(prob, y, t);
    KernelField k{grid, y, t, Eigen::MatrixXd(grid.n, grid.n), KernelKind::K0, 0};
    for (int j = 0; j < grid.n; ++j) {
        for (int i = 0; i < grid.n; ++i) k.values(i, j) = k0_from_center(prob, grid.point(i, j), m, t);
    }
    return k;
}

Eigen::MatrixXd apply_generator(const ParabolicProblem& prob, const KernelGrid& grid,
                                const Eigen::MatrixXd& values) {
    const int n = grid.n;
    const Eigen::MatrixXd d1 = kernel_derivative(grid, values, 0, 1);
    const Eigen::MatrixXd d2 = kernel_derivative(grid, values, 1, 1);
    Eigen::MatrixXd f1(n, n), f2(n, n), adv(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const PhasePoint x = grid.point(i, j);
            const Eigen::Matrix2d A = diffusion_tensor(prob, x);
            f1(i, j) = A(0, 0) * d1(i, j) + A(0, 1) * d2(i, j);
            f2(i, j) = A(1, 0) * d1(i, j) + A(1, 1) * d2(i, j);
            const auto v = prob.v(x[0], x[1]);
            adv(i, j) = v[0] * d1(i, j) + v[1] * d2(i, j);
        }
    }
    const Eigen::MatrixXd div = kernel_derivative(grid, f1, 0, 1) + kernel_derivative(grid, f2, 1, 1);
    return adv + prob.eps * prob.eps * div;
}

KernelField heat_residual(const ParabolicProblem& prob, const std::function<KernelField(double)>& family,
                          double t, double delta) {
    const KernelField mid = family(t);
    const KernelField plus = family(t + delta);
    const KernelField minus = family(t - delta);
    KernelField out = mid;
    out.values = (plus.values - minus.values) / (2.0 * delta) - apply_generator(prob, mid.grid, mid.values);
    return out;
}

KernelField residual_r1(const ParabolicProblem& prob, PhasePoint y, double t, const KernelGrid& grid) {
    require_positive_time(t);
    const double delta = 1e-4;
    if (t <= delta) throw ConfigError("residual_r1 needs t > 1e-4");
    KernelField r = heat_residual(prob, [&](double s) { return k0_kernel(prob, y, s, grid); }, t, delta);
    r.values = -r.values;
    r.kind = KernelKind::R1;
    r.order = 1;
    return r;
}

KernelField residual_r1_pointwise(const ParabolicProblem& prob, PhasePoint y, double t,
                                  const KernelGrid& grid) {
    require_positive_time(t);
    const PhasePoint m = backward_center(prob, y, t);
    KernelField k{grid, y, t, Eigen::MatrixXd(grid.n, grid.n), KernelKind::R1, 1};
    for (int j = 0; j < grid.n; ++j) {
        for (int i = 0; i < grid.n; ++i) k.values(i, j) = r1_from_center(prob, grid.point(i, j), m, t);
    }
    return k;
}

KernelField rk_iterate(const ParabolicProblem& prob, int k, PhasePoint y, double t, const KernelGrid& grid,
                       const Quadrature& quad) {
    require_positive_time(t);
    if (k == 1) return residual_r1_pointwise(prob, y, t, grid);
    if (k != 2) throw UnsupportedError("rk_iterate supports k = 1 and k = 2");
    KernelField r{grid, y, t, checked_duhamel(prob, LeftFactor::R1, y, t, grid, quad), KernelKind::Rk, k};
    return r;
}

KernelField kj_assemble(const ParabolicProblem& prob, int j, PhasePoint y, double t, const KernelGrid& grid,
                        const Quadrature& quad) {
    require_positive_time(t);
    KernelField k0 = k0_kernel(prob, y, t, grid);
    if (j == 0) return k0;
    if (j != 1) throw UnsupportedError("kj_assemble supports j = 0 and j = 1");
    k0.values += checked_duhamel(prob, LeftFactor::K0, y, t, grid, quad);
    k0.kind = KernelKind::Kj;
    k0.order = 1;
    return k0;
}

BoundFit gaussian_bound_fit(const KernelField& field, const ParabolicProblem& prob) {
    const double e2t = prob.eps * prob.eps * field.t;
    const PhasePoint m = backward_center(prob, field.y, field.t);
    const double peak = field.values.cwiseAbs().maxCoeff();
    if (!(peak > 0.0)) throw NumericalError("gaussian_bound_fit: kernel vanishes identically");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int count = 0;
    for (int j = 0; j < field.grid.n; ++j) {
        for (int i = 0; i < field.grid.n; ++i) {
            const double v = std::abs(field.values(i, j));
            if (v <= 1e-12 * peak) continue;
            const PhasePoint x = field.grid.point(i, j);
            const double u = ((x[0] - m[0]) * (x[0] - m[0]) + (x[1] - m[1]) * (x[1] - m[1])) / e2t;
            const double w = std::log(v);
            sx += u;
            sy += w;
            sxx += u * u;
            sxy += u * w;
            ++count;
        }
    }
    if (count < 20) throw NumericalError("gaussian_bound_fit: fewer than 20 usable points");
    const double denom = count * sxx - sx * sx;
    if (!(denom > 0.0)) throw NumericalError("gaussian_bound_fit: degenerate design");
    const double slope = (count * sxy - sx * sy) / denom;
    const double icept = (sy - slope * sx) / count;
    return BoundFit{std::exp(icept) * e2t, -slope, count};
}

} // namespace lfp
