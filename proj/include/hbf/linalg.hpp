#pragma once

// Dense complex kernels shared by every module.
//
// Storage order: CMatrix is Eigen's default column-major layout, and vec()
// stacks columns.  All index arithmetic elsewhere in the library assumes
// this; nothing outside this header touches raw storage.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace hbf {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Kronecker product: result(i*b.rows()+k, j*b.cols()+l) = a(i,j) * b(k,l).
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Column-stacking vectorization.
CVector vec(const CMatrix& a);

/// Inverse of vec(): reshapes v into a matrix with `rows` rows.
/// Throws DimensionError when v.size() is not a multiple of rows.
CMatrix unvec(const CVector& v, Eigen::Index rows);

/// Block-diagonal assembly, blocks placed in the given order.  Blocks need
/// not be square.
CMatrix block_diag(std::span<const CMatrix> blocks);

/// Stacks column vectors end to end.
CVector vconcat(std::span<const CVector> parts);

/// Horizontal concatenation [a_1, a_2, ...]; all parts share a row count.
CMatrix hconcat(std::span<const CMatrix> parts);

/// Relative ridge applied on the first escalation of hermitian_solve().
inline constexpr double kRidgeEscalation = 1e-12;

struct HermitianSolve {
    CMatrix x;
    /// Ridge actually used, relative to tr(a)/n.
    double ridge = 0.0;
};

/// Solves (a + ridge * s * I) X = b for Hermitian positive (semi)definite a,
/// where s = tr(a)/n, or s = 1 when tr(a) is zero.
///
/// With ridge == 0 the unregularized system is tried first; if the Cholesky
/// factorization fails or the system is numerically singular, the ridge is
/// escalated once to kRidgeEscalation.  The accepted solution always meets
/// a 1e-8 normwise backward error ||R X - B|| / (||R|| ||X|| + ||B||) on the
/// regularized system R; for well-conditioned R this is a 1e-8 relative
/// residual.
///
/// Throws DimensionError on shape mismatch or a non-Hermitian a, and
/// SingularMatrixError when no attempt succeeds.
HermitianSolve hermitian_solve_detailed(const CMatrix& a, const CMatrix& b, double ridge = 0.0);

inline CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b, double ridge = 0.0)
{
    return hermitian_solve_detailed(a, b, ridge).x;
}

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues
/// (round-off) are clamped to zero.
CMatrix hermitian_sqrt(const CMatrix& a);

/// Largest eigenvalue of a Hermitian matrix.
double max_eigenvalue(const CMatrix& a);

/// Smallest eigenvalue of a Hermitian matrix.
double min_eigenvalue(const CMatrix& a);

/// True when ||a - a^H||_F <= tol * max(1, ||a||_F).
bool is_hermitian(const CMatrix& a, double tol = 1e-8);

/// Orthonormal basis of the null space of a (columns), via SVD with the
/// usual eps * max(dim) * sigma_max rank cutoff.
CMatrix null_space(const CMatrix& a);

}  // namespace hbf
