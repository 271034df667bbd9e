#include "lfp/linalg.hpp"

#include <complex>

#include <lapacke.h>

#include "lfp/errors.hpp"

namespace lfp::linalg {

namespace {

lapack_complex_double* as_lapack(std::complex<double>* p) {
    return reinterpret_cast<lapack_complex_double*>(p);
}

} // namespace

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& a) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    Eigen::MatrixXcd work = a;
    Eigen::VectorXd w(n);
    if (n == 0) return w;
    const lapack_int info =
        LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, as_lapack(work.data()), n, w.data());
    if (info != 0) throw NumericalError("Hermitian eigenvalue decomposition failed");
    return w;
}

void hermitian_eigensystem(const Eigen::MatrixXcd& a, Eigen::VectorXd& w, Eigen::MatrixXcd& v) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    v = a;
    w.resize(n);
    if (n == 0) return;
    const lapack_int info =
        LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, as_lapack(v.data()), n, w.data());
    if (info != 0) throw NumericalError("Hermitian eigendecomposition failed");
}

Eigen::VectorXd singular_values(const Eigen::MatrixXcd& a) {
    const lapack_int m = static_cast<lapack_int>(a.rows());
    const lapack_int n = static_cast<lapack_int>(a.cols());
    Eigen::MatrixXcd work = a;
    Eigen::VectorXd s(std::min(m, n));
    if (m == 0 || n == 0) return s;
    const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, as_lapack(work.data()), m,
                                           s.data(), nullptr, 1, nullptr, 1);
    if (info != 0) throw NumericalError("singular value decomposition failed");
    return s;
}

} // namespace lfp::linalg
