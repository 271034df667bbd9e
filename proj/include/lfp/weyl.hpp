#pragma once

#include <complex>

#include <Eigen/Dense>

#include "lfp/phasespace.hpp"
#include "lfp/polynomial.hpp"

namespace lfp {

// Dense operator on position samples. The quadrature weight dx is absorbed
// into the entries, so quantize(1) is the identity matrix.
struct Operator {
    PhaseGrid grid;
    Eigen::MatrixXcd M;
};

struct Diagnostics {
    std::complex<double> trace;
    double trace_norm = 0.0;
    double hs_norm = 0.0;
    double herm_defect = 0.0;
    double min_eigenvalue = 0.0;
};

// Discrete Weyl quantization with the symbol evaluated at torus midpoints
// (the doubled x-grid). Half-step samples come from the field when known in
// closed form, otherwise from a spectral half-cell shift. Fields with a
// polynomial source are quantized exactly by symmetrized products.
Operator quantize(const SymbolField& a, double boundary_threshold = kDefaultBoundaryThreshold);

// Exact Weyl quantization of a polynomial: Op(x^j xi^k) = 2^-j sum_i C(j,i) X^i D^k X^(j-i).
Operator quantize(const Polynomial2& p, const PhaseGrid& grid);

// The circulant spectral momentum operator raised to the power k.
Eigen::MatrixXcd momentum_power(const PhaseGrid& grid, int k);

// Discrete Wigner transform; the exact left inverse of quantize.
SymbolField dequantize(const Operator& A);
ComplexField dequantize_complex(const Operator& A);

Diagnostics diagnostics(const Operator& A);

// Sum of singular values. For numerically Hermitian input the eigenvalue
// moduli are used; otherwise a full SVD.
double trace_norm(const Eigen::MatrixXcd& A);
double trace_distance(const Operator& A, const Operator& B);
double herm_defect(const Eigen::MatrixXcd& A);
double min_eigenvalue(const Eigen::MatrixXcd& A);

// h^-1 sum_{|alpha|<=3} h^{|alpha|/2} ||d^alpha a||_{L1} with unit constant.
double trace_norm_upper_bound(const SymbolField& a, double h,
                              double boundary_threshold = kDefaultBoundaryThreshold);

// Spectral shift of each column by sign * dx / 2 in x (real or complex data).
Eigen::MatrixXd half_shift(const Eigen::MatrixXd& a, double dx, int sign);
Eigen::MatrixXcd half_shift(const Eigen::MatrixXcd& a, double dx, int sign);

} // namespace lfp
