#include <doctest.h>

#include "fixtures.hpp"
#include "hbf/error.hpp"
#include "hbf/robust.hpp"
#include "oracles.hpp"

using namespace hbf;

namespace {

CMatrix scalar(double x)
{
    return CMatrix::Constant(1, 1, x);
}

StochasticUncertainty stochastic(double sigma_h_sq, std::size_t nodes)
{
    return {sigma_h_sq, 0.6, std::vector<double>(nodes, 0.6)};
}

CMatrix chol(const CMatrix& r)
{
    return Eigen::LLT<CMatrix>(r).matrixL();
}

// Expected squared error conditioned on the true channels, all cross-node
// terms included.
double full_mse(const fixture::Instance& in, std::span<const CMatrix> h, const DigitalPrecoder& f)
{
    const auto p = in.w_rf.cols();
    CMatrix e = -CMatrix::Identity(p, p);
    double s = (in.w_rf.adjoint() * in.fc.r_u * in.w_rf).trace().real();
    for (std::size_t m = 0; m < in.nodes.size(); ++m) {
        const CMatrix g = in.w_rf.adjoint() * h[m] * f.per_node[m];
        e += g * in.nodes[m].a_obs;
        s += (g * in.nodes[m].r_noise * g.adjoint()).trace().real();
    }
    return s + (e * in.prior.r_theta * e.adjoint()).trace().real();
}

RobustProblemNormBall norm_ball_for(const fixture::Instance& in, double eps)
{
    return assemble_norm_ball(in.chan.h, in.nodes, in.prior, in.fc, in.w_rf, eps);
}

CVector min_norm_point(const RobustProblemNormBall& prob)
{
    const CMatrix w = hconcat(prob.w_blocks);
    return w.adjoint() * (w * w.adjoint()).inverse() * prob.c;
}

CMatrix null_basis(const RobustProblemNormBall& prob)
{
    const CMatrix k = hconcat(prob.w_blocks).fullPivLu().kernel();
    return Eigen::HouseholderQR<CMatrix>(k).householderQ() * CMatrix::Identity(k.rows(), k.cols());
}

CMatrix sphere_draw(oracle::Rand& r, Eigen::Index rows, Eigen::Index cols, double eps)
{
    const CMatrix d = r.mat(rows, cols);
    return eps * d / d.norm();
}

}  // namespace

TEST_CASE("correlated_expectation closed forms")
{
    oracle::Rand r(1);
    const CMatrix x = r.mat(3, 2);
    const CMatrix zl = r.hpd(2);
    const CMatrix zr = r.hpd(3);
    for (auto side : {ExpectationSide::left, ExpectationSide::right}) {
        const CMatrix& z = side == ExpectationSide::left ? zl : zr;
        const CMatrix det = side == ExpectationSide::left ? CMatrix(x * z * x.adjoint()) : CMatrix(x.adjoint() * z * x);
        CHECK((correlated_expectation(x, z, CMatrix::Zero(3, 3), CMatrix::Zero(2, 2), side) - det).norm() <= 1e-14);
    }
    const CMatrix rr = r.hpd(3);
    const CMatrix rt = r.hpd(2);
    const CMatrix zero = CMatrix::Zero(3, 2);
    CHECK((correlated_expectation(zero, CMatrix::Identity(2, 2), rr, rt, ExpectationSide::left) -
           rt.trace() * rr).norm() <= 1e-12);
    CHECK((correlated_expectation(zero, CMatrix::Identity(3, 3), rr, rt, ExpectationSide::right) -
           rr.trace() * rt.transpose()).norm() <= 1e-12);
}

TEST_CASE("correlated_expectation against sampling")
{
    oracle::Rand r(2);
    const CMatrix x = r.mat(3, 2);
    const CMatrix rr = correlation_matrix(3, 0.6, 0.5);
    const CMatrix rt = r.hpd(2);
    const CMatrix zl = r.hpd(2);
    const CMatrix zr = r.hpd(3);
    // dX = A S B with A A^H = R_r and B^H B = R_t^T (Cholesky factors).
    const CMatrix a = chol(rr);
    const CMatrix b = chol(CMatrix(rt.transpose())).adjoint();
    const int draws = 100000;
    CMatrix left = CMatrix::Zero(3, 3), right = CMatrix::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
        const CMatrix xs = x + a * r.mat(3, 2) * b;
        left += xs * zl * xs.adjoint();
        right += xs.adjoint() * zr * xs;
    }
    left /= double(draws);
    right /= double(draws);
    auto compare = [](const CMatrix& mc, const CMatrix& ref) {
        const double dom = 0.25 * ref.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < ref.rows(); ++i)
            for (Eigen::Index j = 0; j < ref.cols(); ++j)
                if (std::abs(ref(i, j)) >= dom) CHECK(std::abs(mc(i, j) - ref(i, j)) <= 0.02 * std::abs(ref(i, j)));
    };
    compare(left, correlated_expectation(x, zl, rr, rt, ExpectationSide::left));
    compare(right, correlated_expectation(x, zr, rr, rt, ExpectationSide::right));
}

TEST_CASE("assemble_stochastic scalar reduction")
{
    const double hh = 1.3, a = 0.8, r = 0.2, rth = 1.5, s2 = 0.3;
    const CMatrix h[] = {scalar(hh)};
    const NodeModel nodes[] = {{scalar(a), scalar(r), 1.0}};
    const auto prob = assemble_stochastic(h, nodes, {scalar(rth)}, {scalar(0.1), 1}, scalar(1.0), stochastic(s2, 1));
    const double omega = hh * hh * r + s2 * (a * a * rth + r);
    CHECK(prob.alpha_scalar == doctest::Approx(s2));
    CHECK(std::abs(prob.omega_blocks[0](0, 0) - omega) <= 1e-14);
    CHECK(std::abs(prob.w_blocks[0](0, 0) - a * hh) <= 1e-14);
    const auto f = design_robust_stochastic(prob);
    CHECK(std::abs(f.f(0) - 1.0 / (a * hh)) <= 1e-12);
    CHECK(stochastic_average_mse(f, prob) == doctest::Approx(omega / (a * a * hh * hh) + 0.1).epsilon(1e-12));

    const CMatrix h2[] = {scalar(hh), scalar(hh)};
    CHECK_THROWS_AS(assemble_stochastic(h2, nodes, {scalar(rth)}, {scalar(0.1), 1}, scalar(1.0), stochastic(s2, 1)),
                    DimensionError);
}

TEST_CASE("assemble_stochastic structure")
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto in = fixture::make_instance(fixture::small_config(), seed);
        const auto u = stochastic(0.2, in.nodes.size());
        const auto prob = assemble_stochastic(in.chan.h, in.nodes, in.prior, in.fc, in.w_rf, u);
        const CMatrix r_fc = correlation_matrix(in.cfg.n_r, 0.6, 0.2);
        const double alpha = (in.w_rf.adjoint() * r_fc.transpose() * in.w_rf).trace().real();
        CHECK(prob.alpha_scalar == doctest::Approx(alpha).epsilon(1e-12));
        for (std::size_t m = 0; m < in.nodes.size(); ++m) {
            const CMatrix rs = correlation_matrix(in.cfg.n_t, 0.6, 1.0);
            const auto& n = in.nodes[m];
            const CMatrix j = oracle::kron_loops((n.a_obs * in.prior.r_theta * n.a_obs.adjoint()).transpose(),
                                                 rs.transpose());
            const CMatrix t = oracle::kron_loops(n.r_noise.transpose(), rs.transpose());
            const CMatrix g = in.w_rf.adjoint() * in.chan.h[m];
            const CMatrix l = oracle::kron_loops(n.r_noise.transpose(), g.adjoint() * g);
            CHECK((prob.l_blocks[m] - l).norm() <= 1e-12 * l.norm());
            CHECK((prob.omega_blocks[m] - l - alpha * (j + t)).norm() <= 1e-12 * prob.omega_blocks[m].norm());
            CHECK((prob.w_blocks[m] - in.prob.z_blocks[m]).norm() <= 1e-12);
            const CMatrix diff = prob.omega_blocks[m] - prob.l_blocks[m];
            CHECK(min_eigenvalue(diff) >= -1e-10 * max_eigenvalue(diff));
        }
    }
}

TEST_CASE("stochastic design reduces to zero forcing without uncertainty")
{
    const auto in = fixture::make_instance(fixture::small_config(), 5);
    const auto prob = assemble_stochastic(in.chan.h, in.nodes, in.prior, in.fc, in.w_rf, stochastic(0.0, 3));
    CHECK(prob.alpha_scalar == 0.0);
    for (std::size_t m = 0; m < 3; ++m) CHECK(prob.omega_blocks[m] == prob.l_blocks[m]);
    CHECK(oracle::rel_diff(design_robust_stochastic(prob).f, design_zf(in.prob).f) <= 1e-10);
}

TEST_CASE("average MSE matches sampling of the channel error")
{
    const auto in = fixture::make_instance(fixture::small_config(), 6);
    const auto u = stochastic(0.1, in.nodes.size());
    const auto prob = assemble_stochastic(in.chan.h, in.nodes, in.prior, in.fc, in.w_rf, u);
    const auto f = design_robust_stochastic(prob);
    CHECK(constraint_residual(prob.w_blocks, prob.c, f.f) <= 1e-8);
    const double avg = stochastic_average_mse(f, prob);

    SeededRng rng(7);
    const int draws = 10000;
    double full = 0.0, decoupled = 0.0;
    std::vector<CMatrix> h(in.nodes.size()), dh(in.nodes.size());
    for (int i = 0; i < draws; ++i) {
        for (std::size_t m = 0; m < in.nodes.size(); ++m) {
            h[m] = apply_stochastic_error(in.chan.h[m], u, m, rng);
            dh[m] = h[m] - in.chan.h[m];
        }
        full += full_mse(in, h, f);
        decoupled += decoupled_error_mse(in.chan.h, dh, in.w_rf, f.per_node, in.nodes, in.prior, in.fc);
    }
    CHECK(std::abs(full / draws - avg) <= 0.02 * avg);
    CHECK(std::abs(decoupled / draws - avg) <= 0.02 * avg);
}

TEST_CASE("decoupled_error_mse with zero error is the conditional MSE")
{
    const auto in = fixture::make_instance(fixture::small_config(), 8);
    const auto f = design_zf(in.prob);
    const std::vector<CMatrix> zero(3, CMatrix::Zero(in.cfg.n_r, in.cfg.n_t));
    const double d = decoupled_error_mse(in.chan.h, zero, in.w_rf, f.per_node, in.nodes, in.prior, in.fc);
    CHECK(oracle::rel_diff(d, full_mse(in, in.chan.h, f)) <= 1e-12);
    CHECK(oracle::rel_diff(d, evaluate_mse_analytic(f, in.prob)) <= 1e-10);
}

TEST_CASE("robust stochastic design is optimal over the feasible set")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = fixture::make_instance(fixture::small_config(), seed);
        const auto prob = assemble_stochastic(in.chan.h, in.nodes, in.prior, in.fc, in.w_rf, stochastic(0.3, 3));
        const auto robust = design_robust_stochastic(prob);
        const auto agnostic = design_zf(in.prob);
        CHECK(stochastic_average_mse(robust, prob) <= stochastic_average_mse(agnostic, prob) * (1.0 + 1e-12));

        const CMatrix n = hconcat(prob.w_blocks).fullPivLu().kernel();
        const double base = stochastic_average_mse(robust, prob);
        oracle::Rand r(seed);
        int better = 0;
        for (int k = 0; k < 1000; ++k) {
            CVector d = n * r.vecn(n.cols());
            d *= std::pow(10.0, r.uniform(-4.0, 0.0)) * robust.f.norm() / d.norm();
            const auto g = DigitalPrecoder::from_stacked(robust.f + d, 3, prob.n_t, prob.q);
            if (stochastic_average_mse(g, prob) < base * (1.0 - 1e-12)) ++better;
        }
        CHECK(better == 0);
    }
}

TEST_CASE("norm-ball constants")
{
    const auto in = fixture::make_instance(fixture::small_config(), 2);
    const auto zero = compute_norm_ball_constants(in.nodes, in.prior, in.w_rf, 0.0);
    CHECK(zero.eta == 0.0);
    CHECK(zero.zeta == 0.0);
    CHECK_THROWS_AS(compute_norm_ball_constants(in.nodes, in.prior, in.w_rf, -1.0), DimensionError);

    const double eps = 0.3, a = 0.7, rth = 2.0, r = 0.4;
    const NodeModel one[] = {{scalar(a), scalar(r), 1.0}};
    const auto k = compute_norm_ball_constants(one, {scalar(rth)}, scalar(1.0), eps);
    CHECK(k.eta == doctest::Approx(eps * a * std::sqrt(rth)));
    CHECK(k.zeta == doctest::Approx(eps * std::sqrt(r)));

    // Orthonormal combiner columns: lambda_max(W W^H) = 1.
    double ts = 0.0, tn = 0.0;
    for (const auto& n : in.nodes) {
        ts += (n.a_obs * in.prior.r_theta * n.a_obs.adjoint()).trace().real();
        tn += n.r_noise.trace().real();
    }
    const CMatrix q = Eigen::HouseholderQR<CMatrix>(in.w_rf).householderQ() * CMatrix::Identity(in.cfg.n_r, 2);
    const auto ko = compute_norm_ball_constants(in.nodes, in.prior, q, eps);
    CHECK(ko.eta == doctest::Approx(eps * std::sqrt(ts)).epsilon(1e-12));
    CHECK(ko.zeta == doctest::Approx(eps * std::sqrt(tn)).epsilon(1e-12));
}

TEST_CASE("norm-ball constants bound the error terms")
{
    const auto in = fixture::make_instance(fixture::small_config(), 3);
    const double eps = 0.5;
    const auto prob = norm_ball_for(in, eps);
    const CMatrix rs = hermitian_sqrt(in.prior.r_theta);
    oracle::Rand r(4);
    for (int k = 0; k < 1000; ++k) {
        const auto f = DigitalPrecoder::from_stacked(r.vecn(3 * prob.q * prob.n_t), 3, prob.n_t, prob.q);
        double g2 = 0.0, dl2 = 0.0;
        for (std::size_t m = 0; m < 3; ++m) {
            const CMatrix wd = in.w_rf.adjoint() * sphere_draw(r, in.cfg.n_r, in.cfg.n_t, eps);
            g2 += (wd * f.per_node[m] * in.nodes[m].a_obs * rs).squaredNorm();
            dl2 = std::max(dl2, (wd * f.per_node[m] * hermitian_sqrt(in.nodes[m].r_noise)).squaredNorm() /
                                    f.per_node[m].squaredNorm());
        }
        CHECK(std::sqrt(g2) <= prob.eta * f.f.norm() * (1.0 + 1e-12));
        CHECK(std::sqrt(dl2) <= prob.zeta * (1.0 + 1e-12));
    }
}

TEST_CASE("norm-ball objective and gradient")
{
    const auto in = fixture::make_instance(fixture::small_config(), 4);
    const auto prob = norm_ball_for(in, 0.4);
    oracle::Rand r(5);
    const auto n = 3 * prob.q * prob.n_t;

    const CVector f = r.vecn(n);
    CVector lf(0);
    for (std::size_t m = 0; m < 3; ++m) {
        const CVector part = prob.l_hat_blocks[m] * f.segment(Eigen::Index(m) * prob.q * prob.n_t, prob.q * prob.n_t);
        lf.conservativeResize(lf.size() + part.size());
        lf.tail(part.size()) = part;
    }
    const double expect = std::pow(lf.norm() + prob.zeta * f.norm(), 2) + prob.eta * prob.eta * f.squaredNorm();
    CHECK(oracle::rel_diff(norm_ball_objective(prob, f), expect) <= 1e-12);
    CHECK(norm_ball_objective(prob, CVector::Zero(n)) == 0.0);
    CHECK(norm_ball_gradient(prob, CVector::Zero(n)).norm() == 0.0);

    for (int k = 0; k < 20; ++k) {
        const CVector x = r.vecn(n);
        const CVector g = norm_ball_gradient(prob, x);
        for (cd unit : {cd(1.0, 0.0), cd(0.0, 1.0)}) {
            const CVector d = unit * r.vecn(n);
            const double h = 1e-5;
            const double fd = (norm_ball_objective(prob, x + h * d) - norm_ball_objective(prob, x - h * d)) / (2 * h);
            const double an = std::real(g.dot(d));
            CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), g.norm() * d.norm() * 1e-3));
        }
    }

    for (int k = 0; k < 200; ++k) {
        const CVector z1 = r.vecn(n), z2 = 3.0 * r.vecn(n);
        const double mid = norm_ball_objective(prob, 0.5 * (z1 + z2));
        CHECK(mid <= 0.5 * (norm_ball_objective(prob, z1) + norm_ball_objective(prob, z2)) + 1e-10);
    }
}

TEST_CASE("norm-ball design with zero radius")
{
    const auto in = fixture::make_instance(fixture::small_config(), 6);
    const auto prob = norm_ball_for(in, 0.0);
    CHECK(prob.eta == 0.0);
    CHECK(prob.zeta == 0.0);
    const auto d = design_robust_norm_ball(prob);
    std::vector<CMatrix> q;
    for (const auto& l : prob.l_hat_blocks) q.push_back(l.adjoint() * l);
    const CVector ref = solve_eq_qp_blocks(q, prob.w_blocks, prob.c);
    const double ref_obj = norm_ball_objective(prob, ref);
    CHECK(std::abs(d.objective - ref_obj) <= 1e-6 * ref_obj);
    CHECK(constraint_residual(prob.w_blocks, prob.c, d.precoder.f) <= 1e-8);
    // Same quadratic as the perfect-CSI design.
    CHECK(worst_case_mse_bound(d.precoder, prob) ==
          doctest::Approx(evaluate_mse_analytic(d.precoder, in.prob)).epsilon(1e-10));
}

TEST_CASE("norm-ball design descends from the minimum-norm point")
{
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto in = fixture::make_instance(fixture::small_config(), seed);
        const auto prob = norm_ball_for(in, 0.3);
        const auto d = design_robust_norm_ball(prob);
        CHECK(d.objective <= norm_ball_objective(prob, min_norm_point(prob)));
        CHECK(d.objective == doctest::Approx(norm_ball_objective(prob, d.precoder.f)).epsilon(1e-12));
        CHECK(constraint_residual(prob.w_blocks, prob.c, d.precoder.f) <= 1e-8);
        CHECK(worst_case_mse_bound(d.precoder, prob) == doctest::Approx(d.objective + prob.noise_floor));
    }
}

TEST_CASE("norm-ball design matches direct search on a small instance")
{
    // One node, p = q = 1, n_t = 5: a 4-dimensional complex null space.
    oracle::Rand r(9);
    const CMatrix h[] = {r.mat(3, 5)};
    CMatrix w = r.mat(3, 1);
    w /= w.norm();
    const NodeModel nodes[] = {{scalar(0.9), scalar(0.3), 1.0}};
    const PriorModel prior{scalar(1.0)};
    const FcModel fc{0.1 * CMatrix::Identity(3, 3), 1};
    for (double eps : {0.2, 1.0}) {
        const auto prob = assemble_norm_ball(h, nodes, prior, fc, w, eps);
        const auto d = design_robust_norm_ball(prob);
        const CVector f0 = min_norm_point(prob);
        const CMatrix nb = null_basis(prob);
        REQUIRE(nb.cols() == 4);

        // Random search with a shrinking radius over the real coordinates of z.
        std::mt19937_64 eng(11);
        std::normal_distribution<double> nd;
        CVector z = CVector::Zero(4);
        double best = norm_ball_objective(prob, f0);
        double radius = f0.norm();
        for (int it = 0; it < 200000 && radius > 1e-9 * f0.norm(); ++it) {
            CVector step(4);
            for (int i = 0; i < 4; ++i) step(i) = cd(nd(eng), nd(eng));
            const CVector cand = z + radius * step / step.norm();
            const double v = norm_ball_objective(prob, f0 + nb * cand);
            if (v < best) {
                best = v;
                z = cand;
                radius *= 1.5;
            } else {
                radius *= 0.98;
            }
        }
        CHECK(std::abs(d.objective - best) <= 1e-3 * best);
        CHECK(d.objective <= best * (1.0 + 1e-9));
    }
}

TEST_CASE("worst-case bound dominates the realized MSE")
{
    const auto in = fixture::make_instance(fixture::small_config(), 10);
    const double eps = 0.4;
    const auto prob = norm_ball_for(in, eps);
    const auto robust = design_robust_norm_ball(prob).precoder;
    const auto agnostic = design_zf(in.prob);
    oracle::Rand r(12);
    for (const auto* f : {&robust, &agnostic}) {
        const double bound = worst_case_mse_bound(*f, prob);
        int violations = 0;
        for (int k = 0; k < 1000; ++k) {
            std::vector<CMatrix> dh;
            for (int m = 0; m < 3; ++m) dh.push_back(sphere_draw(r, in.cfg.n_r, in.cfg.n_t, eps));
            if (decoupled_error_mse(in.chan.h, dh, in.w_rf, f->per_node, in.nodes, in.prior, in.fc) > bound) ++violations;
        }
        CHECK(violations == 0);
    }
    // The robust design has the smaller bound.
    CHECK(worst_case_mse_bound(robust, prob) <= worst_case_mse_bound(agnostic, prob));

    const NodeModel one[] = {{scalar(1.0), scalar(0.5), 1.0}};
    const CMatrix h[] = {scalar(1.0)};
    const auto sp = assemble_norm_ball(h, one, {scalar(1.0)}, {scalar(0.25), 1}, scalar(1.0), 0.3);
    CHECK(worst_case_mse_bound(DigitalPrecoder::from_stacked(CVector::Zero(1), 1, 1, 1), sp) == doctest::Approx(0.25));
}

TEST_CASE("norm-ball design rejects a rank-deficient constraint")
{
    const CMatrix h[] = {CMatrix::Zero(2, 3)};
    const NodeModel one[] = {{scalar(1.0), scalar(0.5), 1.0}};
    const auto prob = assemble_norm_ball(h, one, {scalar(1.0)}, {CMatrix::Identity(2, 2), 1},
                                         CMatrix::Constant(2, 1, std::sqrt(0.5)), 0.2);
    CHECK_THROWS_AS(design_robust_norm_ball(prob), RankError);
}
