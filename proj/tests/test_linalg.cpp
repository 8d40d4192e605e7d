#include <doctest.h>

#include "hbf/error.hpp"
#include "hbf/linalg.hpp"
#include "oracles.hpp"

using namespace hbf;

TEST_CASE("kron identity and scalar cases")
{
    oracle::Rand r(1);
    const CMatrix b = r.mat(2, 3);
    const CMatrix blocks[] = {b, b};
    CHECK(kron(CMatrix::Identity(2, 2), b) == block_diag(blocks));
    CMatrix two(1, 1);
    two(0, 0) = 2.0;
    CHECK((kron(two, b) - 2.0 * b).norm() == 0.0);
}

TEST_CASE("kron matches the loop definition")
{
    oracle::Rand r(2);
    const CMatrix a = r.mat(3, 2);
    const CMatrix b = r.mat(2, 4);
    CHECK((kron(a, b) - oracle::kron_loops(a, b)).norm() == 0.0);
}

TEST_CASE("trace identity Tr[L^H N P Q] = vec(L)^H (Q^T kron N) vec(P)")
{
    oracle::Rand r(3);
    for (int t = 0; t < 20; ++t) {
        const CMatrix l = r.mat(2, 2), n = r.mat(2, 2), p = r.mat(2, 2), q = r.mat(2, 2);
        const cd lhs = (l.adjoint() * n * p * q).trace();
        const cd rhs = vec(l).dot(kron(q.transpose(), n) * vec(p));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("vec and unvec")
{
    CMatrix a(2, 2);
    a << 1, 3, 2, 4;
    const CVector v = vec(a);
    for (int i = 0; i < 4; ++i) CHECK(v(i) == cd(i + 1));
    CVector w(4);
    w << 1, 2, 3, 4;
    CHECK(unvec(w, 2) == a);
    CHECK_THROWS_AS(unvec(w, 3), DimensionError);

    oracle::Rand r(4);
    const CMatrix n = r.mat(2, 3), p = r.mat(3, 2), q = r.mat(2, 2);
    CHECK(oracle::rel_diff(vec(n * p * q), kron(q.transpose(), n) * vec(p)) <= 1e-12);
    const CMatrix m = r.mat(4, 3);
    CHECK(unvec(vec(m), 4) == m);
    CHECK(vec(m) == oracle::vec_loops(m));
}

TEST_CASE("block_diag")
{
    oracle::Rand r(5);
    const CMatrix a = r.mat(3, 3);
    const CMatrix one[] = {a};
    CHECK(block_diag(one) == a);
    const CMatrix ids[] = {CMatrix::Identity(1, 1), CMatrix::Identity(2, 2)};
    CHECK(block_diag(ids) == CMatrix::Identity(3, 3));

    const CMatrix p1 = r.hpd(2), p2 = r.mat(3, 2);
    const CMatrix two[] = {p1, p2};
    const CMatrix bd = block_diag(two);
    REQUIRE(bd.rows() == 5);
    REQUIRE(bd.cols() == 4);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) {
            cd expect = 0.0;
            if (i < 2 && j < 2) expect = p1(i, j);
            if (i >= 2 && j >= 2) expect = p2(i - 2, j - 2);
            CHECK(bd(i, j) == expect);
        }
    }
}

TEST_CASE("hermitian_solve")
{
    oracle::Rand r(6);
    const CVector b = r.vecn(4);
    CHECK((hermitian_solve(CMatrix::Identity(4, 4), b) - b).norm() <= 1e-15);
    CHECK((hermitian_solve(2.0 * CMatrix::Identity(3, 3), CMatrix::Identity(3, 3)) -
           0.5 * CMatrix::Identity(3, 3)).norm() <= 1e-15);
    for (int t = 0; t < 10; ++t) {
        const CMatrix a = r.hpd(5);
        const CMatrix rhs = r.mat(5, 3);
        const CMatrix x = hermitian_solve(a, rhs);
        CHECK((a * x - rhs).norm() / rhs.norm() <= 1e-10);
    }
}

TEST_CASE("hermitian_solve ridge escalation and errors")
{
    oracle::Rand r(7);
    const CMatrix g = r.mat(4, 2);
    const CMatrix singular = g * g.adjoint();  // rank 2
    const CMatrix rhs = r.mat(4, 1);
    const auto s = hermitian_solve_detailed(singular, rhs);
    CHECK(s.ridge == doctest::Approx(kRidgeEscalation));
    const double scale = singular.trace().real() / 4.0;
    const CMatrix reg = singular + kRidgeEscalation * scale * CMatrix::Identity(4, 4);
    CHECK((reg * s.x - rhs).norm() / (reg.norm() * s.x.norm() + rhs.norm()) <= 1e-8);

    CHECK_THROWS_AS(hermitian_solve(r.mat(3, 3), r.mat(3, 1)), DimensionError);
    CHECK_THROWS_AS(hermitian_solve(CMatrix::Identity(3, 3), r.mat(2, 1)), DimensionError);
    CMatrix neg = -CMatrix::Identity(2, 2);
    CHECK_THROWS_AS(hermitian_solve(neg, r.mat(2, 1)), SingularMatrixError);
}

TEST_CASE("kron properties")
{
    oracle::Rand r(8);
    for (int t = 0; t < 10; ++t) {
        const CMatrix a = r.mat(2, 3), b = r.mat(2, 2), c = r.mat(3, 2), d = r.mat(2, 3), e = r.mat(1, 2);
        CHECK(oracle::rel_diff(kron(kron(a, b), e), kron(a, kron(b, e))) <= 1e-10);
        CHECK(oracle::rel_diff(kron(a, b) * kron(c, d), kron(a * c, b * d)) <= 1e-10);
        const CMatrix sa = r.mat(3, 3), sb = r.mat(4, 4);
        CHECK(std::abs(kron(sa, sb).trace() - sa.trace() * sb.trace()) <= 1e-10 * std::abs(sa.trace() * sb.trace()));
    }
}

TEST_CASE("hermitian_sqrt and eigen helpers")
{
    oracle::Rand r(9);
    const CMatrix a = r.hpd(4);
    const CMatrix s = hermitian_sqrt(a);
    CHECK(oracle::rel_diff(s * s, a) <= 1e-12);
    CHECK(is_hermitian(s));
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
    CHECK(max_eigenvalue(a) == doctest::Approx(es.eigenvalues().maxCoeff()));
    CHECK(min_eigenvalue(a) == doctest::Approx(es.eigenvalues().minCoeff()));

    const CMatrix w = r.mat(3, 5);
    const CMatrix n = null_space(w);
    CHECK(n.cols() == 2);
    CHECK((w * n).norm() <= 1e-12);
    CHECK((n.adjoint() * n - CMatrix::Identity(2, 2)).norm() <= 1e-12);
}
