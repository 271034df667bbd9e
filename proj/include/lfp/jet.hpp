#pragma once

#include <array>
#include <cmath>

namespace lfp {

// Second-order forward-mode Taylor jet in N variables: value, gradient and
// symmetric Hessian.
template <int N>
struct Jet {
    double v = 0.0;
    std::array<double, N> g{};
    std::array<double, N * N> H{};

    Jet() = default;
    Jet(double value) : v(value) {}  // NOLINT: implicit constants are convenient in formulas

    static Jet variable(double value, int index) {
        Jet j(value);
        j.g[index] = 1.0;
        return j;
    }

    double hess(int a, int b) const { return H[a * N + b]; }
};

template <int N>
Jet<N> operator+(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> r;
    r.v = a.v + b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] + b.g[i];
    for (int i = 0; i < N * N; ++i) r.H[i] = a.H[i] + b.H[i];
    return r;
}

template <int N>
Jet<N> operator-(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> r;
    r.v = a.v - b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] - b.g[i];
    for (int i = 0; i < N * N; ++i) r.H[i] = a.H[i] - b.H[i];
    return r;
}

template <int N>
Jet<N> operator-(const Jet<N>& a) {
    return Jet<N>(0.0) - a;
}

template <int N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b) {
    Jet<N> r;
    r.v = a.v * b.v;
    for (int i = 0; i < N; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (int i = 0; i < N; ++i) {
        for (int k = 0; k < N; ++k) {
            r.H[i * N + k] = a.H[i * N + k] * b.v + a.v * b.H[i * N + k] + a.g[i] * b.g[k] + a.g[k] * b.g[i];
        }
    }
    return r;
}

template <int N>
Jet<N> operator*(double s, const Jet<N>& a) {
    Jet<N> r;
    r.v = s * a.v;
    for (int i = 0; i < N; ++i) r.g[i] = s * a.g[i];
    for (int i = 0; i < N * N; ++i) r.H[i] = s * a.H[i];
    return r;
}

template <int N>
Jet<N> operator*(const Jet<N>& a, double s) {
    return s * a;
}

// f(a) given f, f' and f'' at a.v.
template <int N>
Jet<N> chain(const Jet<N>& a, double f, double df, double d2f) {
    Jet<N> r;
    r.v = f;
    for (int i = 0; i < N; ++i) r.g[i] = df * a.g[i];
    for (int i = 0; i < N; ++i) {
        for (int k = 0; k < N; ++k) r.H[i * N + k] = df * a.H[i * N + k] + d2f * a.g[i] * a.g[k];
    }
    return r;
}

template <int N>
Jet<N> inverse(const Jet<N>& a) {
    const double i = 1.0 / a.v;
    return chain(a, i, -i * i, 2.0 * i * i * i);
}

template <int N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b) {
    return a * inverse(b);
}

template <int N>
Jet<N> exp(const Jet<N>& a) {
    const double e = std::exp(a.v);
    return chain(a, e, e, e);
}

template <int N>
Jet<N> sqrt(const Jet<N>& a) {
    const double s = std::sqrt(a.v);
    return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

template <int N>
Jet<N> tanh(const Jet<N>& a) {
    const double t = std::tanh(a.v);
    const double d = 1.0 - t * t;
    return chain(a, t, d, -2.0 * t * d);
}

} // namespace lfp
