#pragma once

#include <map>
#include <utility>

namespace lfp {

// Real bivariate polynomial sum c * x^j * xi^k, stored sparsely.
class Polynomial2 {
public:
    using Exponent = std::pair<int, int>;

    Polynomial2() = default;
    static Polynomial2 constant(double c);
    static Polynomial2 monomial(int j, int k, double c = 1.0);

    void add_term(int j, int k, double c);

    double operator()(double x, double xi) const;
    double coefficient(int j, int k) const;

    Polynomial2 d_x() const;
    Polynomial2 d_xi() const;
    Polynomial2 derivative(int ax, int axi) const;

    int degree() const;  // -1 for the zero polynomial
    bool is_zero(double tol = 0.0) const;
    const std::map<Exponent, double>& terms() const { return terms_; }

    Polynomial2 operator+(const Polynomial2& o) const;
    Polynomial2 operator-(const Polynomial2& o) const;
    Polynomial2 operator*(const Polynomial2& o) const;
    Polynomial2 operator*(double s) const;

private:
    std::map<Exponent, double> terms_;
};

} // namespace lfp
