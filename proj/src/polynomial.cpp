#include "lfp/polynomial.hpp"

#include <cmath>
#include <stdexcept>

namespace lfp {

Polynomial2 Polynomial2::constant(double c) { return monomial(0, 0, c); }

Polynomial2 Polynomial2::monomial(int j, int k, double c) {
    Polynomial2 p;
    p.add_term(j, k, c);
    return p;
}

void Polynomial2::add_term(int j, int k, double c) {
    if (j < 0 || k < 0) throw std::invalid_argument("negative polynomial exponent");
    if (c == 0.0) return;
    auto& slot = terms_[{j, k}];
    slot += c;
    if (slot == 0.0) terms_.erase({j, k});
}

double Polynomial2::operator()(double x, double xi) const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) {
        s += c * std::pow(x, e.first) * std::pow(xi, e.second);
    }
    return s;
}

double Polynomial2::coefficient(int j, int k) const {
    auto it = terms_.find({j, k});
    return it == terms_.end() ? 0.0 : it->second;
}

Polynomial2 Polynomial2::d_x() const {
    Polynomial2 p;
    for (const auto& [e, c] : terms_) {
        if (e.first > 0) p.add_term(e.first - 1, e.second, c * e.first);
    }
    return p;
}

Polynomial2 Polynomial2::d_xi() const {
    Polynomial2 p;
    for (const auto& [e, c] : terms_) {
        if (e.second > 0) p.add_term(e.first, e.second - 1, c * e.second);
    }
    return p;
}

Polynomial2 Polynomial2::derivative(int ax, int axi) const {
    Polynomial2 p = *this;
    for (int i = 0; i < ax; ++i) p = p.d_x();
    for (int i = 0; i < axi; ++i) p = p.d_xi();
    return p;
}

int Polynomial2::degree() const {
    int d = -1;
    for (const auto& [e, c] : terms_) d = std::max(d, e.first + e.second);
    return d;
}

bool Polynomial2::is_zero(double tol) const {
    for (const auto& [e, c] : terms_) {
        if (std::abs(c) > tol) return false;
    }
    return true;
}

Polynomial2 Polynomial2::operator+(const Polynomial2& o) const {
    Polynomial2 p = *this;
    for (const auto& [e, c] : o.terms_) p.add_term(e.first, e.second, c);
    return p;
}

Polynomial2 Polynomial2::operator-(const Polynomial2& o) const { return *this + o * -1.0; }

Polynomial2 Polynomial2::operator*(const Polynomial2& o) const {
    Polynomial2 p;
    for (const auto& [e1, c1] : terms_) {
        for (const auto& [e2, c2] : o.terms_) {
            p.add_term(e1.first + e2.first, e1.second + e2.second, c1 * c2);
        }
    }
    return p;
}

Polynomial2 Polynomial2::operator*(double s) const {
    Polynomial2 p;
    for (const auto& [e, c] : terms_) p.add_term(e.first, e.second, c * s);
    return p;
}

} // namespace lfp
