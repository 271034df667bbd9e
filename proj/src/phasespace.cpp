#include "lfp/phasespace.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lfp/errors.hpp"
#include "lfp/fft.hpp"

namespace lfp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

Eigen::MatrixXd sample_on(const PhaseGrid& g, const std::function<double(double, double)>& f,
                          double x_offset) {
    Eigen::MatrixXd v(g.n, g.n);
    for (int j = 0; j < g.n; ++j) {
        const double xi = g.xi(j);
        for (int m = 0; m < g.n; ++m) v(m, j) = f(g.x(m) + x_offset, xi);
    }
    return v;
}

Eigen::MatrixXd spectral_derivative_values(const PhaseGrid& g, const Eigen::MatrixXd& values,
                                           int ax, int axi) {
    const int n = g.n;
    Eigen::MatrixXcd work = values.cast<std::complex<double>>();
    fft::two_d(work, fft::Direction::Forward);
    const double kx0 = 2.0 * kPi / (n * g.dx());
    const double kq0 = 2.0 * kPi / (n * g.dxi());
    Eigen::VectorXcd mx(n), mq(n);
    for (int q = 0; q < n; ++q) {
        const int f = fft::bin_frequency(q, n);
        const std::complex<double> ikx(0.0, kx0 * f), ikq(0.0, kq0 * f);
        mx(q) = std::pow(ikx, ax);
        mq(q) = std::pow(ikq, axi);
        if (f == -n / 2) {
            if (ax % 2 == 1) mx(q) = 0.0;
            if (axi % 2 == 1) mq(q) = 0.0;
        }
    }
    for (int j = 0; j < n; ++j) {
        for (int m = 0; m < n; ++m) work(m, j) *= mx(m) * mq(j);
    }
    fft::two_d(work, fft::Direction::Backward);
    return work.real() / (static_cast<double>(n) * n);
}

} // namespace

double Params::eps() const { return std::sqrt(eps2()); }

Params make_params(double h, double gamma, double rho) {
    if (!(h > 0.0 && h <= 1.0)) throw ConfigError("h must satisfy 0 < h <= 1");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and >= 0");
    if (!(rho >= 0.0 && rho <= 0.5)) throw ConfigError("rho must lie in [0, 1/2]");
    return Params{h, gamma, rho};
}

double PhaseGrid::dxi() const { return kPi * h / L; }

Eigen::VectorXd PhaseGrid::x_nodes() const {
    Eigen::VectorXd v(n);
    for (int m = 0; m < n; ++m) v(m) = x(m);
    return v;
}

Eigen::VectorXd PhaseGrid::xi_nodes() const {
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v(j) = xi(j);
    return v;
}

PhaseGrid build_grid(int n_points, double halfwidth, double h) {
    if (n_points < 16 || !is_power_of_two(n_points)) {
        throw ConfigError("grid size must be a power of two >= 16");
    }
    if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) throw ConfigError("grid halfwidth must be positive");
    if (!(h > 0.0)) throw ConfigError("h must be positive");
    return PhaseGrid{n_points, halfwidth, h};
}

std::vector<std::string> grid_warnings(const PhaseGrid& g) {
    std::vector<std::string> w;
    const double rule = 16.0 * g.L * g.L / (kPi * g.h);
    if (g.n < rule) {
        std::ostringstream os;
        os << "grid size " << g.n << " is below the resolution rule of thumb 16 L^2/(pi h) = " << rule;
        w.push_back(os.str());
    }
    return w;
}

SymbolField make_field(const PhaseGrid& grid, Eigen::MatrixXd values) {
    if (values.rows() != grid.n || values.cols() != grid.n) {
        throw ConfigError("field shape does not match grid");
    }
    if (!values.allFinite()) throw NumericalError("field contains non-finite values");
    SymbolField a;
    a.grid = grid;
    a.values = std::move(values);
    return a;
}

Polynomial2 HamiltonianSpec::polynomial() const {
    Polynomial2 p;
    for (const auto& m : coeffs) p.add_term(m.j, m.k, m.c);
    return p;
}

void HamiltonianSpec::validate() const {
    for (const auto& m : coeffs) {
        if (m.j < 0 || m.k < 0) throw ConfigError("hamiltonian exponents must be non-negative");
        if (!std::isfinite(m.c)) throw ConfigError("hamiltonian coefficients must be finite");
        if (m.j + m.k > 4) throw ConfigError("hamiltonian total degree must be <= 4");
    }
}

Polynomial2 AffineJump::polynomial() const {
    Polynomial2 p;
    p.add_term(1, 0, alpha);
    p.add_term(0, 1, beta);
    p.add_term(0, 0, delta);
    return p;
}

void JumpSpec::validate() const {
    if (components.empty()) throw ConfigError("at least one jump function is required");
    for (const auto& l : components) {
        if (!std::isfinite(l.alpha) || !std::isfinite(l.beta) || !std::isfinite(l.delta)) {
            throw ConfigError("jump coefficients must be finite");
        }
    }
}

Eigen::Matrix2d VectorFieldSpec::jacobian(double x, double xi) const {
    Eigen::Matrix2d j;
    j << vx.d_x()(x, xi), vx.d_xi()(x, xi), vxi.d_x()(x, xi), vxi.d_xi()(x, xi);
    return j;
}

SymbolField sample_symbol(const Polynomial2& p, const PhaseGrid& grid) {
    auto f = [&p](double x, double xi) { return p(x, xi); };
    SymbolField a = make_field(grid, sample_on(grid, f, 0.0));
    a.midpoint_values = sample_on(grid, f, grid.dx() / 2.0);
    a.source = p;
    return a;
}

SymbolField sample_symbol(const HamiltonianSpec& p, const PhaseGrid& grid) {
    p.validate();
    return sample_symbol(p.polynomial(), grid);
}

SymbolField sample_symbol(const AffineJump& l, const PhaseGrid& grid) {
    return sample_symbol(l.polynomial(), grid);
}

SymbolField sample_symbol(const std::function<double(double, double)>& f, const PhaseGrid& grid) {
    SymbolField a = make_field(grid, sample_on(grid, f, 0.0));
    a.midpoint_values = sample_on(grid, f, grid.dx() / 2.0);
    return a;
}

SymbolField coherent_symbol(const PhaseGrid& grid, double x0, double xi0) {
    const double h = grid.h;
    return sample_symbol(
        [=](double x, double xi) {
            return 2.0 * std::exp(-((x - x0) * (x - x0) + (xi - xi0) * (xi - xi0)) / h);
        },
        grid);
}

double integral(const SymbolField& a) { return a.values.sum() * a.grid.cell_area(); }

double l1_norm(const SymbolField& a) { return a.values.cwiseAbs().sum() * a.grid.cell_area(); }

double l1_norm(const ComplexField& a) { return a.values.cwiseAbs().sum() * a.grid.cell_area(); }

double boundary_mass_fraction(const Eigen::MatrixXd& v) {
    const int r = static_cast<int>(v.rows()), c = static_cast<int>(v.cols());
    const int br = std::max(1, static_cast<int>(std::ceil(0.05 * r)));
    const int bc = std::max(1, static_cast<int>(std::ceil(0.05 * c)));
    double total = 0.0, band = 0.0;
    for (int j = 0; j < c; ++j) {
        const bool col_band = j < bc || j >= c - bc;
        for (int i = 0; i < r; ++i) {
            const double a = std::abs(v(i, j));
            total += a;
            if (col_band || i < br || i >= r - br) band += a;
        }
    }
    return total > 0.0 ? band / total : 0.0;
}

double boundary_mass_fraction(const SymbolField& a) { return boundary_mass_fraction(a.values); }

void require_boundary_gate(const SymbolField& a, double threshold, const std::string& context) {
    const double f = boundary_mass_fraction(a);
    if (!(f <= threshold)) {
        std::ostringstream os;
        os << context << ": boundary mass fraction " << f << " exceeds threshold " << threshold;
        if (a.time_tag) os << " at t = " << *a.time_tag;
        throw BoundaryMassError(os.str(), f, a.time_tag.value_or(0.0));
    }
}

SymbolField spectral_derivative(const SymbolField& a, int ax, int axi, double boundary_threshold) {
    if (ax < 0 || axi < 0 || ax + axi > 8) throw ConfigError("derivative order must satisfy |alpha| <= 8");
    if (a.source) {
        SymbolField d = sample_symbol(a.source->derivative(ax, axi), a.grid);
        d.time_tag = a.time_tag;
        return d;
    }
    require_boundary_gate(a, boundary_threshold, "spectral_derivative");
    SymbolField d = make_field(a.grid, spectral_derivative_values(a.grid, a.values, ax, axi));
    if (a.midpoint_values) {
        d.midpoint_values = spectral_derivative_values(a.grid, *a.midpoint_values, ax, axi);
    }
    d.time_tag = a.time_tag;
    return d;
}

double sobolev_norm(const SymbolField& a, int r, double scale, double boundary_threshold) {
    if (r < 0 || r > 4) throw ConfigError("sobolev order must satisfy 0 <= r <= 4");
    double s = 0.0;
    for (int total = 0; total <= r; ++total) {
        for (int i = 0; i <= total; ++i) {
            const double w = std::pow(scale, total);
            if (total == 0) {
                s += l1_norm(a);
            } else {
                s += w * l1_norm(spectral_derivative(a, i, total - i, boundary_threshold));
            }
        }
    }
    return s;
}

VectorFieldSpec hamiltonian_vector_field(const Polynomial2& p) {
    return VectorFieldSpec{p.d_xi(), p.d_x() * -1.0};
}

VectorFieldSpec hamiltonian_vector_field(const HamiltonianSpec& p) {
    return hamiltonian_vector_field(p.polynomial());
}

PhasePoint flow_point(const VectorFieldSpec& v, double t, PhasePoint z, double escape_radius) {
    if (std::abs(t) > 20.0) throw ConfigError("flow time must satisfy |t| <= 20");
    if (t == 0.0) return z;
    const double h_max = std::min(1e-3, std::abs(t) / 100.0);
    const int steps = static_cast<int>(std::ceil(std::abs(t) / h_max - 1e-9));
    const double dt = t / steps;
    auto f = [&v](const PhasePoint& p) { return v(p[0], p[1]); };
    for (int s = 0; s < steps; ++s) {
        const auto k1 = f(z);
        const auto k2 = f({z[0] + 0.5 * dt * k1[0], z[1] + 0.5 * dt * k1[1]});
        const auto k3 = f({z[0] + 0.5 * dt * k2[0], z[1] + 0.5 * dt * k2[1]});
        const auto k4 = f({z[0] + dt * k3[0], z[1] + dt * k3[1]});
        z[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        z[1] += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        if (!(std::hypot(z[0], z[1]) <= escape_radius)) {
            std::ostringstream os;
            os << "flow trajectory left the escape radius " << escape_radius << " at time "
               << (s + 1) * dt;
            throw FlowEscapeError(os.str());
        }
    }
    return z;
}

std::vector<PhasePoint> flow_map(const VectorFieldSpec& v, double t,
                                 const std::vector<PhasePoint>& points, double escape_radius) {
    std::vector<PhasePoint> out;
    out.reserve(points.size());
    for (const auto& z : points) out.push_back(flow_point(v, t, z, escape_radius));
    return out;
}

ComplexField moyal_product(const SymbolField& a, const SymbolField& b, int order, double h) {
    if (!(a.grid == b.grid)) throw ConfigError("moyal_product: grid mismatch");
    if (order < 1 || order > 4) throw ConfigError("moyal_product: order must be in 1..4");
    const std::complex<double> hbar_factor(0.0, -h / 2.0);  // h / (2i)
    ComplexField out{a.grid, (a.values.array() * b.values.array()).matrix().cast<std::complex<double>>()};
    for (int j = 1; j < order; ++j) {
        Eigen::MatrixXd term = Eigen::MatrixXd::Zero(a.grid.n, a.grid.n);
        for (int i = 0; i <= j; ++i) {
            const SymbolField da = spectral_derivative(a, j - i, i);
            const SymbolField db = spectral_derivative(b, i, j - i);
            const double sign = ((j - i) % 2 == 0) ? 1.0 : -1.0;
            term.array() += sign * binomial(j, i) * da.values.array() * db.values.array();
        }
        out.values += (std::pow(hbar_factor, j) / factorial(j)) * term.cast<std::complex<double>>();
    }
    return out;
}

SymbolField poisson_bracket(const SymbolField& a, const SymbolField& b) {
    if (!(a.grid == b.grid)) throw ConfigError("poisson_bracket: grid mismatch");
    const auto axi = spectral_derivative(a, 0, 1), ax = spectral_derivative(a, 1, 0);
    const auto bxi = spectral_derivative(b, 0, 1), bx = spectral_derivative(b, 1, 0);
    SymbolField r = make_field(a.grid, (axi.values.array() * bx.values.array() -
                                        ax.values.array() * bxi.values.array()).matrix());
    if (a.source && b.source) {
        r.source = a.source->d_xi() * b.source->d_x() - a.source->d_x() * b.source->d_xi();
        r.midpoint_values = sample_symbol(*r.source, a.grid).midpoint_values;
    }
    return r;
}

double validate_ellipticity(const JumpSpec& jumps) {
    double sbb = 0.0, saa = 0.0, sab = 0.0;
    for (const auto& l : jumps.components) {
        sbb += l.beta * l.beta;
        saa += l.alpha * l.alpha;
        sab += l.alpha * l.beta;
    }
    Eigen::Matrix2d hh;
    hh << sbb, -sab, -sab, saa;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(hh);
    return es.eigenvalues()(0);
}

} // namespace lfp
