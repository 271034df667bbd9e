#pragma once

#include <Eigen/Dense>

namespace lfp::linalg {

// Eigenvalues (ascending) of a Hermitian matrix; only the lower triangle is read.
Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& a);

// Full eigendecomposition a = V diag(w) V^*, eigenvalues ascending.
void hermitian_eigensystem(const Eigen::MatrixXcd& a, Eigen::VectorXd& w, Eigen::MatrixXcd& v);

Eigen::VectorXd singular_values(const Eigen::MatrixXcd& a);

} // namespace lfp::linalg
