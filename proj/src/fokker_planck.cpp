#include "lfp/fokker_planck.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include "lfp/errors.hpp"
#include "lfp/fft.hpp"

namespace lfp {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

Eigen::VectorXd wavenumbers(int n, double spacing) {
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i) q(i) = 2.0 * kPi * fft::bin_frequency(i, n) / (n * spacing);
    return q;
}

struct TransportParts {
    Polynomial2 vx_sep;  // x-velocity that depends on xi only
    Polynomial2 vxi_sep; // xi-velocity that depends on x only
    Polynomial2 mix;     // monomials of p with both x and xi
};

TransportParts transport_parts(const Polynomial2& p) {
    Polynomial2 f, g, mix;
    for (const auto& [e, c] : p.terms()) {
        if (e.second == 0) f.add_term(e.first, 0, c);
        else if (e.first == 0) g.add_term(0, e.second, c);
        else mix.add_term(e.first, e.second, c);
    }
    return {g.d_xi(), f.d_x() * -1.0, mix};
}

Polynomial2 generator_polynomial(const Polynomial2& a, const Polynomial2& p, const Eigen::Matrix2d& D,
                                 double eps2) {
    const VectorFieldSpec v = hamiltonian_vector_field(p);
    Polynomial2 q = v.vx * a.d_x() + v.vxi * a.d_xi();
    q = q + (a.derivative(2, 0) * D(0, 0) + a.derivative(1, 1) * (2.0 * D(0, 1)) +
             a.derivative(0, 2) * D(1, 1)) * eps2;
    return q;
}

class SpectralStepper {
public:
    SpectralStepper(const PhaseGrid& g, const Polynomial2& p, const Eigen::Matrix2d& D, double eps2,
                    double dt)
        : g_(g), n_(g.n), dt_(dt), qx_(wavenumbers(g.n, g.dx())), qq_(wavenumbers(g.n, g.dxi())) {
        const TransportParts parts = transport_parts(p);
        diffusion_half_.resize(n_, n_);
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < n_; ++i) {
                const double form = D(0, 0) * qx_(i) * qx_(i) + 2.0 * D(0, 1) * qx_(i) * qq_(j) +
                                    D(1, 1) * qq_(j) * qq_(j);
                diffusion_half_(i, j) = std::exp(-eps2 * form * dt / 2.0) / (double(n_) * n_);
            }
        }
        has_x_shear_ = !parts.vx_sep.is_zero();
        has_xi_shear_ = !parts.vxi_sep.is_zero();
        has_mixed_ = !parts.mix.is_zero();
        const double xi_frac = has_mixed_ ? 0.5 : 1.0;
        if (has_x_shear_) x_shear_ = shear_phases(parts.vx_sep, true, 0.5 * dt);
        if (has_xi_shear_) xi_shear_ = shear_phases(parts.vxi_sep, false, xi_frac * dt);
        if (has_mixed_) {
            const VectorFieldSpec v = hamiltonian_vector_field(parts.mix);
            vx_.resize(n_, n_);
            vxi_.resize(n_, n_);
            for (int j = 0; j < n_; ++j) {
                for (int i = 0; i < n_; ++i) {
                    vx_(i, j) = v.vx(g.x(i), g.xi(j));
                    vxi_(i, j) = v.vxi(g.x(i), g.xi(j));
                }
            }
            const double rate = vx_.cwiseAbs().maxCoeff() * kPi / g.dx() +
                                vxi_.cwiseAbs().maxCoeff() * kPi / g.dxi();
            substeps_ = std::max(1, static_cast<int>(std::ceil(dt * rate / 2.5)));
            const double c = parts.mix.coefficient(1, 1);
            if (parts.mix.terms().size() == 1 && c != 0.0) {
                // The flow of c x xi scales x by l = e^{c dt}. Shears compose on the right, so
                // a o diag(l, 1/l) = a o U(s1) L(r1) U(s2) L(r2) is applied left to right;
                // s1 is free and balances the x and xi displacements.
                const double l = std::exp(c * dt);
                const double s1 = std::copysign(std::sqrt(std::abs(l - 1.0) * g.L / g.xi_max()), l - 1.0);
                const double r1 = (l - 1.0) / s1, s2 = -s1 / l, r2 = l * (1.0 - l) / s1;
                linear_shears_ = {shear_phases(Polynomial2::monomial(0, 1, s1), true, 1.0),
                                  shear_phases(Polynomial2::monomial(1, 0, r1), false, 1.0),
                                  shear_phases(Polynomial2::monomial(0, 1, s2), true, 1.0),
                                  shear_phases(Polynomial2::monomial(1, 0, r2), false, 1.0)};
            }
        }
    }

    Eigen::MatrixXd step(const Eigen::MatrixXd& a0) const {
        Eigen::MatrixXcd a = a0.cast<cd>();
        diffuse(a);
        if (has_x_shear_) shear(a, x_shear_, true);
        if (has_xi_shear_) shear(a, xi_shear_, false);
        if (has_mixed_) {
            if (!linear_shears_.empty()) {
                for (std::size_t s = 0; s < linear_shears_.size(); ++s) shear(a, linear_shears_[s], s % 2 == 0);
            } else {
                Eigen::MatrixXd r = a.real();
                const double sub = dt_ / substeps_;
                for (int s = 0; s < substeps_; ++s) r = rk4(r, sub);
                a = r.cast<cd>();
            }
            if (has_xi_shear_) shear(a, xi_shear_, false);
        }
        if (has_x_shear_) shear(a, x_shear_, true);
        diffuse(a);
        return a.real();
    }

private:
    // Phase factors shifting each column (x-shear) or row (xi-shear) by v * tau.
    Eigen::MatrixXcd shear_phases(const Polynomial2& v, bool along_x, double tau) const {
        Eigen::MatrixXcd ph(n_, n_);
        const Eigen::VectorXd& q = along_x ? qx_ : qq_;
        for (int line = 0; line < n_; ++line) {
            const double vel = along_x ? v(0.0, g_.xi(line)) : v(g_.x(line), 0.0);
            for (int i = 0; i < n_; ++i) {
                const double phase = q(i) * vel * tau;
                const cd f = (fft::bin_frequency(i, n_) == -n_ / 2) ? cd(std::cos(phase), 0.0)
                                                                    : std::polar(1.0, phase);
                if (along_x) ph(i, line) = f / double(n_);
                else ph(line, i) = f / double(n_);
            }
        }
        return ph;
    }

    void diffuse(Eigen::MatrixXcd& a) const {
        fft::two_d(a, fft::Direction::Forward);
        a.array() *= diffusion_half_.array();
        fft::two_d(a, fft::Direction::Backward);
        a = a.real().cast<cd>();
    }

    void shear(Eigen::MatrixXcd& a, const Eigen::MatrixXcd& ph, bool along_x) const {
        if (along_x) {
            fft::columns(a, fft::Direction::Forward);
            a.array() *= ph.array();
            fft::columns(a, fft::Direction::Backward);
        } else {
            fft::rows(a, fft::Direction::Forward);
            a.array() *= ph.array();
            fft::rows(a, fft::Direction::Backward);
        }
        a = a.real().cast<cd>();
    }

    // d_x(vx a) + d_xi(vxi a)
    Eigen::MatrixXd transport(const Eigen::MatrixXd& a) const {
        Eigen::MatrixXcd fx = (vx_.array() * a.array()).matrix().cast<cd>();
        Eigen::MatrixXcd fq = (vxi_.array() * a.array()).matrix().cast<cd>();
        fft::two_d(fx, fft::Direction::Forward);
        fft::two_d(fq, fft::Direction::Forward);
        Eigen::MatrixXcd s(n_, n_);
        for (int j = 0; j < n_; ++j) {
            const bool nyq_j = fft::bin_frequency(j, n_) == -n_ / 2;
            for (int i = 0; i < n_; ++i) {
                const bool nyq_i = fft::bin_frequency(i, n_) == -n_ / 2;
                const cd dx = nyq_i ? cd(0.0) : cd(0.0, qx_(i)) * fx(i, j);
                const cd dq = nyq_j ? cd(0.0) : cd(0.0, qq_(j)) * fq(i, j);
                s(i, j) = dx + dq;
            }
        }
        fft::two_d(s, fft::Direction::Backward);
        return s.real() / (double(n_) * n_);
    }

    Eigen::MatrixXd rk4(const Eigen::MatrixXd& a, double h) const {
        const Eigen::MatrixXd k1 = transport(a);
        const Eigen::MatrixXd k2 = transport(a + 0.5 * h * k1);
        const Eigen::MatrixXd k3 = transport(a + 0.5 * h * k2);
        const Eigen::MatrixXd k4 = transport(a + h * k3);
        return a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    PhaseGrid g_;
    int n_;
    double dt_;
    Eigen::VectorXd qx_, qq_;
    Eigen::MatrixXd diffusion_half_;
    bool has_x_shear_ = false, has_xi_shear_ = false, has_mixed_ = false;
    Eigen::MatrixXcd x_shear_, xi_shear_;
    std::vector<Eigen::MatrixXcd> linear_shears_;
    Eigen::MatrixXd vx_, vxi_;
    int substeps_ = 1;
};

double wrap_index(double u, int n) {
    u = std::fmod(u, static_cast<double>(n));
    return u < 0 ? u + n : u;
}

class SemiLagrangianStepper {
public:
    SemiLagrangianStepper(const PhaseGrid& g, const Polynomial2& p, const Eigen::Matrix2d& D, double eps2,
                          double dt, int order)
        : g_(g), n_(g.n), order_(order) {
        if (order != 1 && order != 3) throw ConfigError("interpolation order must be 1 or 3");
        const Eigen::VectorXd qx = wavenumbers(n_, g.dx()), qq = wavenumbers(n_, g.dxi());
        diffusion_half_.resize(n_, n_);
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < n_; ++i) {
                const double form = D(0, 0) * qx(i) * qx(i) + 2.0 * D(0, 1) * qx(i) * qq(j) +
                                    D(1, 1) * qq(j) * qq(j);
                diffusion_half_(i, j) = std::exp(-eps2 * form * dt / 2.0) / (double(n_) * n_);
            }
        }
        const VectorFieldSpec v = hamiltonian_vector_field(p);
        depart_u_.resize(n_, n_);
        depart_w_.resize(n_, n_);
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < n_; ++i) {
                const PhasePoint z = flow_point(v, dt, {g.x(i), g.xi(j)}, 1e6);
                depart_u_(i, j) = wrap_index((z[0] - g.x(0)) / g.dx(), n_);
                depart_w_(i, j) = wrap_index((z[1] - g.xi(0)) / g.dxi(), n_);
            }
        }
    }

    Eigen::MatrixXd step(const Eigen::MatrixXd& a0) const {
        Eigen::MatrixXd a = diffuse(a0);
        Eigen::MatrixXd b(n_, n_);
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < n_; ++i) b(i, j) = interpolate(a, depart_u_(i, j), depart_w_(i, j));
        }
        return diffuse(b);
    }

private:
    Eigen::MatrixXd diffuse(const Eigen::MatrixXd& a) const {
        Eigen::MatrixXcd c = a.cast<cd>();
        fft::two_d(c, fft::Direction::Forward);
        c.array() *= diffusion_half_.array();
        fft::two_d(c, fft::Direction::Backward);
        return c.real();
    }

    static void weights(double t, int order, double* w) {
        if (order == 1) {
            w[0] = 1.0 - t;
            w[1] = t;
            return;
        }
        // Cubic Lagrange weights on nodes -1, 0, 1, 2.
        w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
        w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
        w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
    }

    double interpolate(const Eigen::MatrixXd& a, double u, double w) const {
        const int iu = static_cast<int>(std::floor(u)), iw = static_cast<int>(std::floor(w));
        double wu[4], ww[4];
        weights(u - iu, order_, wu);
        weights(w - iw, order_, ww);
        const int npts = order_ == 1 ? 2 : 4;
        const int off = order_ == 1 ? 0 : -1;
        double s = 0.0;
        for (int b = 0; b < npts; ++b) {
            const int jj = ((iw + b + off) % n_ + n_) % n_;
            double row = 0.0;
            for (int c = 0; c < npts; ++c) {
                const int ii = ((iu + c + off) % n_ + n_) % n_;
                row += wu[c] * a(ii, jj);
            }
            s += ww[b] * row;
        }
        return s;
    }

    PhaseGrid g_;
    int n_;
    int order_;
    Eigen::MatrixXd diffusion_half_;
    Eigen::MatrixXd depart_u_, depart_w_;
};

} // namespace

DiffusionMatrix diffusion_matrix(const JumpSpec& jumps) {
    DiffusionMatrix d{Eigen::Matrix2d::Zero()};
    for (const auto& l : jumps.components) {
        const Eigen::Vector2d w(l.beta, -l.alpha);
        d.D += w * w.transpose();
    }
    return d;
}

FpScheme parse_fp_scheme(const std::string& name) {
    if (name == "spectral") return FpScheme::Spectral;
    if (name == "semi-lagrangian") return FpScheme::SemiLagrangian;
    throw ConfigError("unknown fokker-planck scheme '" + name + "'");
}

std::string to_string(FpScheme s) {
    return s == FpScheme::Spectral ? "spectral" : "semi-lagrangian";
}

SymbolField generator_apply(const SymbolField& a, const HamiltonianSpec& p, const JumpSpec& jumps,
                            const Params& params, double boundary_threshold) {
    const Eigen::Matrix2d D = diffusion_matrix(jumps).D;
    const double eps2 = params.eps2();
    if (a.source) {
        SymbolField q = sample_symbol(generator_polynomial(*a.source, p.polynomial(), D, eps2), a.grid);
        q.time_tag = a.time_tag;
        return q;
    }
    require_boundary_gate(a, boundary_threshold, "fokker_planck generator");
    const VectorFieldSpec v = hamiltonian_vector_field(p);
    const PhaseGrid& g = a.grid;
    const SymbolField ax = spectral_derivative(a, 1, 0, boundary_threshold);
    const SymbolField aq = spectral_derivative(a, 0, 1, boundary_threshold);
    Eigen::MatrixXd out(g.n, g.n);
    for (int j = 0; j < g.n; ++j) {
        for (int i = 0; i < g.n; ++i) {
            const auto vel = v(g.x(i), g.xi(j));
            out(i, j) = vel[0] * ax.values(i, j) + vel[1] * aq.values(i, j);
        }
    }
    if (eps2 != 0.0) {
        out += eps2 * (D(0, 0) * spectral_derivative(a, 2, 0, boundary_threshold).values +
                       2.0 * D(0, 1) * spectral_derivative(a, 1, 1, boundary_threshold).values +
                       D(1, 1) * spectral_derivative(a, 0, 2, boundary_threshold).values);
    }
    SymbolField q = make_field(g, out);
    q.time_tag = a.time_tag;
    return q;
}

ClassicalTrajectory evolve(const SymbolField& a0, const HamiltonianSpec& p, const JumpSpec& jumps,
                           const Params& params, const ClassicalEvolveOptions& opt) {
    p.validate();
    jumps.validate();
    if (!(opt.t_final >= 0.0) || !(opt.dt > 0.0)) throw ConfigError("evolve: need t_final >= 0 and dt > 0");
    if (opt.snapshot_stride < 1) throw ConfigError("evolve: snapshot stride must be >= 1");
    const PhaseGrid& g = a0.grid;
    const int steps = std::max(1, static_cast<int>(std::ceil(opt.t_final / opt.dt - 1e-9)));
    const double dt = opt.t_final > 0.0 ? opt.t_final / steps : 0.0;
    const Eigen::Matrix2d D = diffusion_matrix(jumps).D;

    ClassicalTrajectory traj;
    traj.dt_used = dt;

    if (a0.source) {
        const Polynomial2 q = generator_polynomial(*a0.source, p.polynomial(), D, params.eps2());
        if (!q.is_zero(1e-14)) {
            throw ConfigError("polynomial initial data is only supported when it is stationary");
        }
    } else {
        SymbolField tagged = a0;
        tagged.time_tag = 0.0;
        require_boundary_gate(tagged, opt.boundary_threshold, "fokker_planck evolve");
    }

    const double mass0 = integral(a0);
    const double l10 = l1_norm(a0);

    auto record = [&](double t, const SymbolField& a) {
        if (!a.values.allFinite()) {
            std::ostringstream os;
            os << "fokker_planck evolution produced non-finite values at t = " << t;
            throw NumericalError(os.str());
        }
        const double mass = integral(a), l1 = l1_norm(a);
        if (!a.source) {
            require_boundary_gate(a, opt.boundary_threshold, "fokker_planck evolve");
            if (std::abs(mass - mass0) > opt.mass_drift_limit * (1.0 + t) * l10) {
                std::ostringstream os;
                os << "mass drift " << std::abs(mass - mass0) << " exceeds limit at t = " << t;
                throw NumericalError(os.str());
            }
            if (l1 > l10 + opt.l1_growth_limit) {
                std::ostringstream os;
                os << "L1 norm grew by " << l1 - l10 << " at t = " << t;
                throw NumericalError(os.str());
            }
        }
        traj.times.push_back(t);
        traj.masses.push_back(mass);
        traj.l1_norms.push_back(l1);
        if (opt.observer) opt.observer(t, a);
        if (opt.keep_fields) traj.fields.push_back(a);
    };

    SymbolField a = a0;
    a.time_tag = 0.0;
    record(0.0, a);
    if (opt.t_final == 0.0 || a0.source) {
        if (a0.source && opt.t_final > 0.0) {
            for (int s = 1; s <= steps; ++s) {
                if (s % opt.snapshot_stride == 0 || s == steps) {
                    a.time_tag = s * dt;
                    record(s * dt, a);
                }
            }
        }
        traj.final_field = a;
        return traj;
    }

    std::unique_ptr<SpectralStepper> spectral;
    std::unique_ptr<SemiLagrangianStepper> sl;
    if (opt.scheme == FpScheme::Spectral) {
        spectral = std::make_unique<SpectralStepper>(g, p.polynomial(), D, params.eps2(), dt);
    } else {
        sl = std::make_unique<SemiLagrangianStepper>(g, p.polynomial(), D, params.eps2(), dt,
                                                     opt.interpolation_order);
    }
    Eigen::MatrixXd v = a0.values;
    for (int s = 1; s <= steps; ++s) {
        v = spectral ? spectral->step(v) : sl->step(v);
        if (s % opt.snapshot_stride == 0 || s == steps) {
            SymbolField snap = make_field(g, v);
            snap.time_tag = s * dt;
            record(s * dt, snap);
            if (s == steps) traj.final_field = snap;
        }
    }
    return traj;
}

std::vector<SymbolField> transport_characteristics(const std::function<double(double, double)>& a0,
                                                   const HamiltonianSpec& p, const PhaseGrid& g,
                                                   const std::vector<double>& times) {
    const VectorFieldSpec v = hamiltonian_vector_field(p);
    const int n = g.n;
    std::vector<PhasePoint> nodes, halves;
    nodes.reserve(n * n);
    halves.reserve(n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            nodes.push_back({g.x(i), g.xi(j)});
            halves.push_back({g.x(i) + g.dx() / 2.0, g.xi(j)});
        }
    }
    std::vector<SymbolField> out;
    double t_prev = 0.0;
    for (double t : times) {
        if (t < t_prev) throw ConfigError("transport_characteristics: times must be nondecreasing");
        const double step = t - t_prev;
        if (step > 0.0) {
            nodes = flow_map(v, step, nodes, 1e6);
            halves = flow_map(v, step, halves, 1e6);
        }
        t_prev = t;
        Eigen::MatrixXd val(n, n), mid(n, n);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const auto& z = nodes[j * n + i];
                const auto& w = halves[j * n + i];
                val(i, j) = a0(z[0], z[1]);
                mid(i, j) = a0(w[0], w[1]);
            }
        }
        SymbolField a = make_field(g, val);
        a.midpoint_values = mid;
        a.time_tag = t;
        out.push_back(std::move(a));
    }
    return out;
}

double smoothing_probe(const SymbolField& a0, const HamiltonianSpec& p, const JumpSpec& jumps,
                       const Params& params, double t, int k, double dt) {
    if (t < 0.25) throw ConfigError("smoothing_probe requires t >= 0.25");
    if (k < 0) throw ConfigError("smoothing_probe requires k >= 0");
    ClassicalEvolveOptions opt;
    opt.t_final = t;
    opt.dt = dt;
    opt.snapshot_stride = 1 << 30;
    opt.keep_fields = false;
    const ClassicalTrajectory traj = evolve(a0, p, jumps, params, opt);
    const SymbolField& a = traj.final_field;
    const double num = k == 0 ? l1_norm(a) : l1_norm(spectral_derivative(a, k, 0));
    return std::pow(params.eps(), k) * num / l1_norm(a0);
}

double x_marginal_variance(const SymbolField& a) {
    const PhaseGrid& g = a.grid;
    const Eigen::VectorXd rho = a.values.rowwise().sum() * g.dxi();
    const double mass = rho.sum() * g.dx();
    double mean = 0.0;
    for (int i = 0; i < g.n; ++i) mean += g.x(i) * rho(i) * g.dx();
    mean /= mass;
    double var = 0.0;
    for (int i = 0; i < g.n; ++i) var += (g.x(i) - mean) * (g.x(i) - mean) * rho(i) * g.dx();
    return var / mass;
}

} // namespace lfp
