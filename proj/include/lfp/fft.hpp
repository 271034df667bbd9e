#pragma once

// Thin FFTW wrapper. Transforms are unnormalized; the backward transform
// uses exp(+i...) like numpy's ifft without the 1/n factor.

#include <complex>

#include <Eigen/Dense>

namespace lfp::fft {

enum class Direction { Forward, Backward };

// Transform every column of a column-major matrix (each column is contiguous).
void columns(Eigen::MatrixXcd& a, Direction dir);

// Transform every row of a column-major matrix.
void rows(Eigen::MatrixXcd& a, Direction dir);

// Full two-dimensional transform.
void two_d(Eigen::MatrixXcd& a, Direction dir);

void vector(Eigen::VectorXcd& v, Direction dir);

// Integer wavenumber of FFT bin q for a length-n transform, in [-n/2, n/2).
inline int bin_frequency(int q, int n) { return q < n / 2 ? q : q - n; }

} // namespace lfp::fft
