#include "hbf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hbf/error.hpp"

namespace hbf {

namespace {

// Reciprocal condition below which an unregularized factorization is treated
// as numerically singular.
constexpr double kSingularRcond = 1e-13;
constexpr double kResidualTol = 1e-8;

std::string dims(const CMatrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

CVector vec(const CMatrix& a)
{
    return Eigen::Map<const CVector>(a.data(), a.size());
}

CMatrix unvec(const CVector& v, Eigen::Index rows)
{
    if (rows <= 0 || v.size() % rows != 0) {
        throw DimensionError("unvec: length " + std::to_string(v.size()) +
                             " is not divisible by " + std::to_string(rows));
    }
    return Eigen::Map<const CMatrix>(v.data(), rows, v.size() / rows);
}

CMatrix block_diag(std::span<const CMatrix> blocks)
{
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    CMatrix out = CMatrix::Zero(rows, cols);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

CVector vconcat(std::span<const CVector> parts)
{
    Eigen::Index n = 0;
    for (const auto& p : parts) n += p.size();
    CVector out(n);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.segment(at, p.size()) = p;
        at += p.size();
    }
    return out;
}

CMatrix hconcat(std::span<const CMatrix> parts)
{
    if (parts.empty()) return {};
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw DimensionError("hconcat: row count mismatch");
        cols += p.cols();
    }
    CMatrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    return out;
}

bool is_hermitian(const CMatrix& a, double tol)
{
    if (a.rows() != a.cols()) return false;
    return (a - a.adjoint()).norm() <= tol * std::max(1.0, a.norm());
}

HermitianSolve hermitian_solve_detailed(const CMatrix& a, const CMatrix& b, double ridge)
{
    if (a.rows() != a.cols()) throw DimensionError("hermitian_solve: matrix is " + dims(a));
    if (b.rows() != a.rows()) {
        throw DimensionError("hermitian_solve: lhs " + dims(a) + " vs rhs " + dims(b));
    }
    if (ridge < 0.0) throw DimensionError("hermitian_solve: negative ridge");
    if (!is_hermitian(a)) throw DimensionError("hermitian_solve: matrix is not Hermitian");

    const auto n = a.rows();
    if (n == 0) return {CMatrix(0, b.cols()), ridge};

    const double tr = a.diagonal().real().sum();
    const double scale = tr > 0.0 ? tr / static_cast<double>(n) : 1.0;
    const double b_norm = b.norm();

    std::vector<double> ladder{ridge};
    if (ridge < kRidgeEscalation) ladder.push_back(kRidgeEscalation);

    for (double r : ladder) {
        CMatrix reg = a;
        reg.diagonal().array() += r * scale;
        // Symmetrize so round-off in the input cannot bias the factorization.
        reg = 0.5 * (reg + reg.adjoint()).eval();
        Eigen::LLT<CMatrix> llt(reg);
        if (llt.info() != Eigen::Success) continue;
        if (r == 0.0 && llt.rcond() < kSingularRcond) continue;
        CMatrix x = llt.solve(b);
        if (!x.allFinite()) continue;
        // Normwise backward error; a plain residual test cannot pass at the
        // condition numbers the ridge is meant to handle.
        const double res = (reg * x - b).norm();
        const double denom = reg.norm() * x.norm() + b_norm;
        if (res > kResidualTol * std::max(denom, 1e-300)) continue;
        return {std::move(x), r};
    }
    throw SingularMatrixError("hermitian_solve: " + dims(a) +
                              " system is singular even with ridge");
}

CMatrix hermitian_sqrt(const CMatrix& a)
{
    if (a.size() == 0) return a;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (a + a.adjoint()));
    const RVector d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().adjoint();
}

double max_eigenvalue(const CMatrix& a)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
}

double min_eigenvalue(const CMatrix& a)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

CMatrix null_space(const CMatrix& a)
{
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cutoff = s.size() == 0
                              ? 0.0
                              : s(0) * std::numeric_limits<double>::epsilon() *
                                    static_cast<double>(std::max(a.rows(), a.cols()));
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) ++rank;
    }
    return svd.matrixV().rightCols(a.cols() - rank);
}

}  // namespace hbf
