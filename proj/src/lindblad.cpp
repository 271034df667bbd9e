#include "lfp/lindblad.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "lfp/errors.hpp"
#include "lfp/fft.hpp"
#include "lfp/linalg.hpp"

namespace lfp {

namespace {

using Mat = Eigen::MatrixXcd;
using cd = std::complex<double>;

// c * X^a D^k X^b
struct OpTerm {
    double c;
    int a;
    int k;
    int b;
};

std::vector<OpTerm> weyl_terms(const Polynomial2& p) {
    std::vector<OpTerm> out;
    for (const auto& [e, c] : p.terms()) {
        const int j = e.first, k = e.second;
        double binom = 1.0;
        for (int i = 0; i <= j; ++i) {
            out.push_back({c * binom / std::pow(2.0, j), i, k, j - i});
            binom = binom * (j - i) / (i + 1);
        }
    }
    return out;
}

struct Workspace {
    PhaseGrid grid;
    Eigen::VectorXd x;
    Eigen::VectorXd xi_fft;  // momentum value of FFT bin q

    explicit Workspace(const PhaseGrid& g) : grid(g), x(g.x_nodes()), xi_fft(g.n) {
        for (int q = 0; q < g.n; ++q) xi_fft(q) = fft::bin_frequency(q, g.n) * g.dxi();
    }

    Mat scale_rows(const Mat& a, int power) const {
        if (power == 0) return a;
        const Eigen::ArrayXd s = x.array().pow(power);
        Mat out = a;
        for (int c = 0; c < a.cols(); ++c) out.col(c).array() *= s;
        return out;
    }

    Mat momentum_apply(Mat a, int k) const {
        if (k == 0) return a;
        fft::columns(a, fft::Direction::Forward);
        const Eigen::ArrayXd s = xi_fft.array().pow(k) / static_cast<double>(grid.n);
        for (int c = 0; c < a.cols(); ++c) a.col(c).array() *= s;
        fft::columns(a, fft::Direction::Backward);
        return a;
    }

    Mat apply_left(const std::vector<OpTerm>& terms, const Mat& a) const {
        std::map<std::pair<int, int>, std::vector<const OpTerm*>> groups;
        for (const auto& t : terms) groups[{t.k, t.b}].push_back(&t);
        Mat out = Mat::Zero(a.rows(), a.cols());
        for (const auto& [key, list] : groups) {
            const Mat y = momentum_apply(scale_rows(a, key.second), key.first);
            Eigen::ArrayXd left = Eigen::ArrayXd::Zero(grid.n);
            for (const OpTerm* t : list) left += t->c * x.array().pow(t->a);
            for (int c = 0; c < a.cols(); ++c) out.col(c).array() += left * y.col(c).array();
        }
        return out;
    }

    Mat apply_right(const std::vector<OpTerm>& terms, const Mat& a) const {
        std::vector<OpTerm> adj;
        adj.reserve(terms.size());
        for (const auto& t : terms) adj.push_back({t.c, t.b, t.k, t.a});
        return apply_left(adj, a.adjoint()).adjoint();
    }

    Mat commutator(const std::vector<OpTerm>& terms, const Mat& a) const {
        return apply_left(terms, a) - apply_right(terms, a);
    }

    Mat to_momentum(Mat a) const {
        fft::columns(a, fft::Direction::Forward);
        fft::rows(a, fft::Direction::Backward);
        return a / static_cast<double>(grid.n);
    }

    Mat from_momentum(Mat a) const {
        fft::columns(a, fft::Direction::Backward);
        fft::rows(a, fft::Direction::Forward);
        return a / static_cast<double>(grid.n);
    }

    // [X, a] entrywise
    Mat x_commutator(const Mat& a) const {
        Mat out = a;
        for (int c = 0; c < a.cols(); ++c) out.col(c).array() *= (x.array() - x(c));
        return out;
    }
};

struct JumpSums {
    double aa = 0.0, bb = 0.0, ab = 0.0;
};

JumpSums jump_sums(const JumpSpec& jumps) {
    JumpSums s;
    for (const auto& l : jumps.components) {
        s.aa += l.alpha * l.alpha;
        s.bb += l.beta * l.beta;
        s.ab += l.alpha * l.beta;
    }
    return s;
}

const std::vector<OpTerm> kMomentum{{1.0, 0, 1, 0}};

// Pieces of the generator used by the split-step scheme.
struct SplitParts {
    Polynomial2 f;    // pure x part of p
    Polynomial2 g;    // pure xi part of p (no constant)
    Polynomial2 mix;  // monomials with both x and xi
};

SplitParts split_polynomial(const Polynomial2& p) {
    SplitParts s;
    for (const auto& [e, c] : p.terms()) {
        if (e.second == 0) s.f.add_term(e.first, 0, c);
        else if (e.first == 0) s.g.add_term(0, e.second, c);
        else s.mix.add_term(e.first, e.second, c);
    }
    return s;
}

class Generator {
public:
    Generator(const LindbladSystem& sys)
        : ws_(sys.grid), h_(sys.params.h), gamma_(sys.params.gamma), sums_(jump_sums(sys.jumps)),
          p_terms_(weyl_terms(sys.p.polynomial())) {
        const SplitParts parts = split_polynomial(sys.p.polynomial());
        mix_terms_ = weyl_terms(parts.mix);
        has_mixed_ = !parts.mix.is_zero() || sums_.ab != 0.0;
    }

    const Workspace& ws() const { return ws_; }
    bool has_mixed() const { return has_mixed_; }

    Mat full(const Mat& a) const {
        Mat out = (cd(0.0, 1.0 / h_)) * ws_.commutator(p_terms_, a);
        if (gamma_ != 0.0) out -= (gamma_ / (2.0 * h_)) * double_commutators(a, true, true, true);
        return out;
    }

    Mat mixed(const Mat& a) const {
        Mat out = Mat::Zero(a.rows(), a.cols());
        if (!mix_terms_.empty()) out += cd(0.0, 1.0 / h_) * ws_.commutator(mix_terms_, a);
        if (gamma_ != 0.0 && sums_.ab != 0.0) {
            out -= (gamma_ / (2.0 * h_)) * double_commutators(a, false, false, true);
        }
        return out;
    }

private:
    Mat double_commutators(const Mat& a, bool xx, bool dd, bool cross) const {
        Mat out = Mat::Zero(a.rows(), a.cols());
        if (xx && sums_.aa != 0.0) out += sums_.aa * ws_.x_commutator(ws_.x_commutator(a));
        if (dd && sums_.bb != 0.0) {
            Mat m = ws_.to_momentum(a);
            for (int c = 0; c < m.cols(); ++c) {
                m.col(c).array() *= (ws_.xi_fft.array() - ws_.xi_fft(c)).square();
            }
            out += sums_.bb * ws_.from_momentum(m);
        }
        if (cross && sums_.ab != 0.0) {
            const Mat da = ws_.commutator(kMomentum, a);
            const Mat xa = ws_.x_commutator(a);
            out += sums_.ab * (ws_.x_commutator(da) + ws_.commutator(kMomentum, xa));
        }
        return out;
    }

    Workspace ws_;
    double h_, gamma_;
    JumpSums sums_;
    std::vector<OpTerm> p_terms_;
    std::vector<OpTerm> mix_terms_;
    bool has_mixed_ = false;
};

template <class F>
Mat rk4_step(const F& gen, const Mat& a, double dt) {
    const Mat k1 = gen(a);
    const Mat k2 = gen(a + (0.5 * dt) * k1);
    const Mat k3 = gen(a + (0.5 * dt) * k2);
    const Mat k4 = gen(a + dt * k3);
    return a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double max_abs_poly(const Polynomial2& p, const PhaseGrid& g) {
    double m = 0.0;
    const double xs[2] = {-g.L, g.L};
    const double qs[2] = {-g.xi_max(), g.xi_max()};
    // Monomials are maximized in modulus at the box corners.
    for (const auto& [e, c] : p.terms()) {
        double mm = 0.0;
        for (double x : xs) {
            for (double q : qs) mm = std::max(mm, std::abs(c * std::pow(x, e.first) * std::pow(q, e.second)));
        }
        m += mm;
    }
    return m;
}

class SplitStepper {
public:
    SplitStepper(const LindbladSystem& sys, const Generator& gen, double dt) : gen_(gen), dt_(dt) {
        const auto& ws = gen.ws();
        const int n = sys.grid.n;
        const double h = sys.params.h, gamma = sys.params.gamma;
        const JumpSums s = jump_sums(sys.jumps);
        const SplitParts parts = split_polynomial(sys.p.polynomial());
        Eigen::VectorXd fx(n), gq(n);
        for (int m = 0; m < n; ++m) fx(m) = parts.f(ws.x(m), 0.0);
        for (int q = 0; q < n; ++q) gq(q) = parts.g(0.0, ws.xi_fft(q));
        const double d_frac = gen.has_mixed() ? 0.5 : 1.0;
        ex_.resize(n, n);
        ed_.resize(n, n);
        for (int c = 0; c < n; ++c) {
            for (int r = 0; r < n; ++r) {
                const double dxr = ws.x(r) - ws.x(c);
                const cd lx(-gamma / (2.0 * h) * s.aa * dxr * dxr, (fx(r) - fx(c)) / h);
                ex_(r, c) = std::exp(0.5 * dt * lx);
                const double dq = ws.xi_fft(r) - ws.xi_fft(c);
                const cd ld(-gamma / (2.0 * h) * s.bb * dq * dq, (gq(r) - gq(c)) / h);
                ed_(r, c) = std::exp(d_frac * dt * ld);
            }
        }
        if (gen.has_mixed()) {
            const double rate = 2.0 * max_abs_poly(parts.mix, sys.grid) / h +
                                gamma / h * std::abs(s.ab) * 2.0 * sys.grid.L * 2.0 * sys.grid.xi_max();
            substeps_ = std::max(1, static_cast<int>(std::ceil(dt * rate / 2.0)));
        }
    }

    Mat step(Mat a) const {
        const auto& ws = gen_.ws();
        a = a.cwiseProduct(ex_);
        a = ws.from_momentum(ws.to_momentum(a).cwiseProduct(ed_));
        if (gen_.has_mixed()) {
            const double sub = dt_ / substeps_;
            auto f = [this](const Mat& m) { return gen_.mixed(m); };
            for (int i = 0; i < substeps_; ++i) a = rk4_step(f, a, sub);
            a = ws.from_momentum(ws.to_momentum(a).cwiseProduct(ed_));
        }
        return a.cwiseProduct(ex_);
    }

private:
    const Generator& gen_;
    double dt_;
    Mat ex_, ed_;
    int substeps_ = 0;
};

// Krylov approximation of exp(dt L) a with Frobenius inner product.
Mat krylov_step(const Generator& gen, const Mat& a, double dt, int m_max) {
    const double beta = a.norm();
    if (beta == 0.0) return a;
    std::vector<Mat> v;
    v.push_back(a / beta);
    Eigen::MatrixXcd hmat = Eigen::MatrixXcd::Zero(m_max + 1, m_max);
    int m = m_max;
    for (int j = 0; j < m_max; ++j) {
        Mat w = gen.full(v[j]);
        for (int i = 0; i <= j; ++i) {
            const cd hij = (v[i].conjugate().cwiseProduct(w)).sum();
            hmat(i, j) = hij;
            w -= hij * v[i];
        }
        const double nrm = w.norm();
        hmat(j + 1, j) = nrm;
        if (nrm < 1e-13 * beta) {
            m = j + 1;
            break;
        }
        v.push_back(w / nrm);
    }
    const Eigen::MatrixXcd hm = hmat.topLeftCorner(m, m) * dt;
    const Eigen::MatrixXcd e = hm.exp();
    const double err = beta * std::abs(hmat(m, m - 1)) * std::abs(e(m - 1, 0)) * dt;
    if (m == m_max && err > 1e-10 * beta) {
        throw NumericalError("krylov step did not converge; reduce dt or raise krylov_dim");
    }
    Mat out = Mat::Zero(a.rows(), a.cols());
    for (int i = 0; i < m; ++i) out += (beta * e(i, 0)) * v[i];
    return out;
}

} // namespace

LindbladMethod parse_lindblad_method(const std::string& name) {
    if (name == "split") return LindbladMethod::Split;
    if (name == "rk4") return LindbladMethod::RK4;
    if (name == "expm-krylov") return LindbladMethod::ExpmKrylov;
    if (name == "eig-closed") return LindbladMethod::EigClosed;
    throw ConfigError("unknown lindblad method '" + name + "'");
}

std::string to_string(LindbladMethod m) {
    switch (m) {
        case LindbladMethod::Split: return "split";
        case LindbladMethod::RK4: return "rk4";
        case LindbladMethod::ExpmKrylov: return "expm-krylov";
        case LindbladMethod::EigClosed: return "eig-closed";
    }
    return "?";
}

double max_abs_symbol(const HamiltonianSpec& p, const PhaseGrid& grid) {
    return max_abs_poly(p.polynomial(), grid);
}

LindbladSystem assemble(const HamiltonianSpec& p, const JumpSpec& jumps, const Params& params,
                        const PhaseGrid& grid) {
    p.validate();
    jumps.validate();
    const double c = validate_ellipticity(jumps);
    if (!(c > 0.0)) {
        std::ostringstream os;
        os << "jump functions are not elliptic (c* = " << c << ")";
        throw ConfigError(os.str());
    }
    if (std::abs(grid.h - params.h) > 1e-15 * params.h) throw ConfigError("grid and params disagree on h");
    LindbladSystem sys{grid, params, p, jumps, quantize(p.polynomial(), grid), {}};
    for (const auto& l : jumps.components) sys.Ls.push_back(quantize(l.polynomial(), grid));
    if (herm_defect(sys.P.M) > 1e-10) throw NumericalError("quantized hamiltonian is not Hermitian");
    for (const auto& L : sys.Ls) {
        if (herm_defect(L.M) > 1e-10) throw NumericalError("quantized jump operator is not Hermitian");
    }
    return sys;
}

Operator generator_apply(const LindbladSystem& sys, const Operator& A) {
    if (!(A.grid == sys.grid)) throw ConfigError("generator_apply: grid mismatch");
    Generator gen(sys);
    return Operator{sys.grid, gen.full(A.M)};
}

Operator generator_apply_dense(const LindbladSystem& sys, const Operator& A) {
    const cd i_over_h(0.0, 1.0 / sys.params.h);
    Mat out = i_over_h * (sys.P.M * A.M - A.M * sys.P.M);
    for (const auto& L : sys.Ls) {
        const Mat inner = L.M * A.M - A.M * L.M;
        out -= (sys.params.gamma / (2.0 * sys.params.h)) * (L.M * inner - inner * L.M);
    }
    return Operator{sys.grid, out};
}

QuantumTrajectory evolve(const LindbladSystem& sys, const Operator& A0, const QuantumEvolveOptions& opt) {
    if (!(A0.grid == sys.grid)) throw ConfigError("evolve: initial state grid mismatch");
    if (!(opt.t_final >= 0.0) || !(opt.dt > 0.0)) throw ConfigError("evolve: need t_final >= 0 and dt > 0");
    if (opt.snapshot_stride < 1) throw ConfigError("evolve: snapshot stride must be >= 1");
    const int steps = std::max(1, static_cast<int>(std::ceil(opt.t_final / opt.dt - 1e-9)));
    const double dt = opt.t_final > 0.0 ? opt.t_final / steps : 0.0;
    const double h = sys.params.h;

    if (opt.method == LindbladMethod::EigClosed && sys.params.gamma != 0.0) {
        throw ConfigError("eig-closed propagation requires gamma = 0");
    }
    if (opt.method == LindbladMethod::RK4) {
        const double pmax = max_abs_symbol(sys.p, sys.grid);
        const JumpSums s = jump_sums(sys.jumps);
        const double xi = sys.grid.xi_max(), L = sys.grid.L;
        const double diss = sys.params.gamma / (2.0 * h) *
                            (s.aa * 4.0 * L * L + s.bb * 4.0 * xi * xi + 2.0 * std::abs(s.ab) * 4.0 * L * xi);
        if (pmax > 0.0 && dt > opt.c_stab * h / pmax) {
            throw ConfigError("rk4 step exceeds c_stab * h / max|p|");
        }
        if (dt * diss > 2.5) throw ConfigError("rk4 step exceeds the dissipative stability limit");
    }

    Generator gen(sys);
    QuantumTrajectory traj;
    traj.dt_used = dt;
    const std::complex<double> tr0 = A0.M.trace();

    auto record = [&](double t, const Mat& m) {
        Operator op{sys.grid, m};
        if (!m.allFinite()) {
            std::ostringstream os;
            os << "lindblad evolution produced non-finite entries at t = " << t;
            throw NumericalError(os.str());
        }
        const double drift = std::abs(m.trace() - tr0);
        if (drift > opt.trace_drift_limit * (1.0 + t)) {
            std::ostringstream os;
            os << "trace drift " << drift << " exceeds limit at t = " << t;
            throw NumericalError(os.str());
        }
        traj.times.push_back(t);
        if (opt.compute_diagnostics) {
            const Diagnostics d = diagnostics(op);
            if (d.herm_defect > opt.herm_defect_limit) {
                std::ostringstream os;
                os << "hermiticity defect " << d.herm_defect << " exceeds limit at t = " << t;
                throw NumericalError(os.str());
            }
            if (d.min_eigenvalue < -opt.positivity_limit) {
                std::ostringstream os;
                os << "positivity violation (min eigenvalue " << d.min_eigenvalue << ") at t = " << t;
                throw NumericalError(os.str());
            }
            traj.diagnostics.push_back(d);
        }
        if (opt.observer) opt.observer(t, op, opt.compute_diagnostics ? &traj.diagnostics.back() : nullptr);
        if (opt.keep_states) traj.states.push_back(op);
    };

    Mat a = A0.M;
    record(0.0, a);
    if (opt.t_final == 0.0) {
        traj.final_state = Operator{sys.grid, a};
        return traj;
    }

    if (opt.method == LindbladMethod::EigClosed) {
        Eigen::VectorXd w;
        Mat v;
        linalg::hermitian_eigensystem(sys.P.M, w, v);
        const Mat b0 = v.adjoint() * A0.M * v;
        for (int s = 1; s <= steps; ++s) {
            if (s % opt.snapshot_stride != 0 && s != steps) continue;
            const double t = s * dt;
            Mat b = b0;
            for (int c = 0; c < b.cols(); ++c) {
                for (int r = 0; r < b.rows(); ++r) b(r, c) *= std::polar(1.0, (w(r) - w(c)) * t / h);
            }
            a = v * b * v.adjoint();
            record(t, a);
        }
        traj.final_state = Operator{sys.grid, a};
        return traj;
    }

    std::unique_ptr<SplitStepper> split;
    if (opt.method == LindbladMethod::Split) split = std::make_unique<SplitStepper>(sys, gen, dt);
    auto full = [&gen](const Mat& m) { return gen.full(m); };
    for (int s = 1; s <= steps; ++s) {
        switch (opt.method) {
            case LindbladMethod::Split: a = split->step(a); break;
            case LindbladMethod::RK4: a = rk4_step(full, a, dt); break;
            case LindbladMethod::ExpmKrylov: a = krylov_step(gen, a, dt, opt.krylov_dim); break;
            case LindbladMethod::EigClosed: break;
        }
        if (s % opt.snapshot_stride == 0 || s == steps) record(s * dt, a);
    }
    traj.final_state = Operator{sys.grid, a};
    return traj;
}

} // namespace lfp
