#include "hbf/robust.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "hbf/error.hpp"

namespace hbf {

namespace {

void check_node_shapes(std::span<const CMatrix> h, std::span<const NodeModel> nodes, const PriorModel& prior,
                       const FcModel& fc, const CMatrix& w_rf, const char* who)
{
    if (h.size() != nodes.size() || h.empty()) throw DimensionError(std::string(who) + ": node count mismatch");
    const auto p = w_rf.cols();
    if (prior.r_theta.rows() != p) throw DimensionError(std::string(who) + ": W_RF must have p columns");
    if (fc.r_u.rows() != w_rf.rows()) throw DimensionError(std::string(who) + ": R_u does not match W_RF");
    for (std::size_t m = 0; m < h.size(); ++m) {
        if (h[m].rows() != w_rf.rows() || h[m].cols() != h.front().cols() ||
            nodes[m].a_obs.cols() != p || nodes[m].a_obs.rows() != nodes.front().a_obs.rows()) {
            throw DimensionError(std::string(who) + ": node " + std::to_string(m) + " has wrong shape");
        }
    }
}

// Applies a block-diagonal matrix, given by its blocks, to a stacked vector.
CVector apply_blocks(std::span<const CMatrix> blocks, const CVector& f)
{
    Eigen::Index rows = 0;
    for (const auto& blk : blocks) rows += blk.rows();
    CVector out(rows);
    Eigen::Index in = 0;
    Eigen::Index at = 0;
    for (const auto& blk : blocks) {
        out.segment(at, blk.rows()).noalias() = blk * f.segment(in, blk.cols());
        in += blk.cols();
        at += blk.rows();
    }
    return out;
}

CVector apply_blocks_adjoint(std::span<const CMatrix> blocks, const CVector& g)
{
    Eigen::Index cols = 0;
    for (const auto& blk : blocks) cols += blk.cols();
    CVector out(cols);
    Eigen::Index in = 0;
    Eigen::Index at = 0;
    for (const auto& blk : blocks) {
        out.segment(at, blk.cols()).noalias() = blk.adjoint() * g.segment(in, blk.rows());
        in += blk.rows();
        at += blk.cols();
    }
    return out;
}

// Projection onto {f : W f = c} and onto null(W), through the Cholesky
// factor of W W^H (p^2 x p^2).
// Projections onto {f : W f = c} through an orthonormal basis Q of the row
// space of W (W^H P = Q R), which avoids squaring the condition number of W.
class AffineProjector {
public:
    AffineProjector(std::span<const CMatrix> w_blocks, const CVector& c) : w_(hconcat(w_blocks)), c_(c)
    {
        const Eigen::ColPivHouseholderQR<CMatrix> qr(w_.adjoint());
        const auto k = w_.rows();
        if (k > w_.cols()) throw RankError("norm-ball design: W has more rows than columns");
        r_ = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
        const double r0 = k > 0 ? std::abs(r_(0, 0)) : 0.0;
        const double rk = k > 0 ? std::abs(r_(k - 1, k - 1)) : 0.0;
        if (!(r0 > 0.0) || !(rk * rk > 1e-13 * r0 * r0)) throw RankError("norm-ball design: W is rank deficient");
        q_ = qr.householderQ() * CMatrix::Identity(w_.cols(), k);
        perm_ = qr.colsPermutation();
    }

    CVector min_norm() const { return q_ * coefficients(c_); }
    CVector tangent(const CVector& g) const { return g - q_ * (q_.adjoint() * g); }
    CVector onto(const CVector& f) const { return f - q_ * coefficients(w_ * f - c_); }
    double residual(const CVector& f) const
    {
        const double cn = c_.norm();
        return (w_ * f - c_).norm() / (cn > 0.0 ? cn : 1.0);
    }

private:
    // x with W (Q x) = v, i.e. R^H x = P^T v.
    CVector coefficients(const CVector& v) const
    {
        const CVector pv = perm_.transpose() * v;
        return r_.adjoint().triangularView<Eigen::Lower>().solve(pv);
    }

    CMatrix w_;
    CVector c_;
    CMatrix q_;
    CMatrix r_;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> perm_;
};

}  // namespace

CMatrix correlated_expectation(const CMatrix& x_hat, const CMatrix& z, const CMatrix& r_r, const CMatrix& r_t,
                           ExpectationSide side)
{
    const auto r = x_hat.rows();
    const auto t = x_hat.cols();
    if (r_r.rows() != r || r_r.cols() != r || r_t.rows() != t || r_t.cols() != t) {
        throw DimensionError("correlated_expectation: correlation shapes do not match X");
    }
    if (side == ExpectationSide::left) {
        if (z.rows() != t || z.cols() != t) throw DimensionError("correlated_expectation: Z must be t x t");
        return x_hat * z * x_hat.adjoint() + (z * r_t.transpose()).trace() * r_r;
    }
    if (z.rows() != r || z.cols() != r) throw DimensionError("correlated_expectation: Z must be r x r");
    return x_hat.adjoint() * z * x_hat + (z * r_r).trace() * r_t.transpose();
}

RobustProblemStochastic assemble_stochastic(std::span<const CMatrix> h_hat, std::span<const NodeModel> nodes,
                                            const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf,
                                            const StochasticUncertainty& u)
{
    check_node_shapes(h_hat, nodes, prior, fc, w_rf, "assemble_stochastic");
    if (u.beta.size() != nodes.size()) throw DimensionError("assemble_stochastic: one beta per node required");
    const auto p = w_rf.cols();
    RobustProblemStochastic prob;
    prob.q = static_cast<int>(nodes.front().a_obs.rows());
    prob.n_t = static_cast<int>(h_hat.front().cols());
    prob.c = vec(CMatrix::Identity(p, p));
    prob.noise_floor = (w_rf.adjoint() * fc.r_u * w_rf).trace().real();
    const CMatrix r_fc = u.receive_correlation(static_cast<int>(w_rf.rows()));
    prob.alpha_scalar = (w_rf.adjoint() * r_fc.transpose() * w_rf).trace().real();

    for (std::size_t m = 0; m < nodes.size(); ++m) {
        const auto& node = nodes[m];
        const CMatrix g = w_rf.adjoint() * h_hat[m];
        const CMatrix r_s_t = u.transmit_correlation(m, prob.n_t).transpose();
        CMatrix l = kron(node.r_noise.transpose(), g.adjoint() * g);
        const CMatrix j = kron((node.a_obs * prior.r_theta * node.a_obs.adjoint()).transpose(), r_s_t);
        const CMatrix t = kron(node.r_noise.transpose(), r_s_t);
        prob.omega_blocks.push_back(l + prob.alpha_scalar * (j + t));
        prob.l_blocks.push_back(std::move(l));
        prob.w_blocks.push_back(kron(node.a_obs.transpose(), g));
    }
    return prob;
}

DigitalPrecoder design_robust_stochastic(const RobustProblemStochastic& prob)
{
    CVector f = solve_eq_qp_blocks(prob.omega_blocks, prob.w_blocks, prob.c);
    return DigitalPrecoder::from_stacked(std::move(f), prob.nodes(), prob.n_t, prob.q);
}

double stochastic_average_mse(const DigitalPrecoder& f, const RobustProblemStochastic& prob)
{
    double s = 0.0;
    for (std::size_t m = 0; m < prob.nodes(); ++m) {
        const CVector v = vec(f.per_node.at(m));
        s += v.dot(prob.omega_blocks[m] * v).real();
    }
    return s + prob.noise_floor;
}

double decoupled_error_mse(std::span<const CMatrix> h_hat, std::span<const CMatrix> delta_h, const CMatrix& w_rf,
                           std::span<const CMatrix> per_node, std::span<const NodeModel> nodes,
                           const PriorModel& prior, const FcModel& fc)
{
    if (h_hat.size() != delta_h.size() || h_hat.size() != per_node.size() || h_hat.size() != nodes.size()) {
        throw DimensionError("decoupled_error_mse: node count mismatch");
    }
    const CMatrix r_theta_sqrt = hermitian_sqrt(prior.r_theta);
    double mse = (w_rf.adjoint() * fc.r_u * w_rf).trace().real();
    for (std::size_t m = 0; m < h_hat.size(); ++m) {
        const CMatrix wd = w_rf.adjoint() * delta_h[m] * per_node[m];
        mse += (wd * nodes[m].a_obs * r_theta_sqrt).squaredNorm();
        const CMatrix g = w_rf.adjoint() * (h_hat[m] + delta_h[m]) * per_node[m];
        mse += (g * nodes[m].r_noise * g.adjoint()).trace().real();
    }
    return mse;
}

NormBallConstants compute_norm_ball_constants(std::span<const NodeModel> nodes, const PriorModel& prior,
                                              const CMatrix& w_rf, double eps_h)
{
    if (eps_h < 0.0) throw DimensionError("compute_norm_ball_constants: negative radius");
    if (eps_h == 0.0) return {};
    const double lmax = std::max(0.0, max_eigenvalue(w_rf * w_rf.adjoint()));
    double tr_signal = 0.0;
    double tr_noise = 0.0;
    for (const auto& node : nodes) {
        tr_signal += (node.a_obs * prior.r_theta * node.a_obs.adjoint()).trace().real();
        tr_noise += node.r_noise.trace().real();
    }
    return {eps_h * std::sqrt(tr_signal * lmax), eps_h * std::sqrt(tr_noise * lmax)};
}

RobustProblemNormBall assemble_norm_ball(std::span<const CMatrix> h_hat, std::span<const NodeModel> nodes,
                                         const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf,
                                         double eps_h)
{
    check_node_shapes(h_hat, nodes, prior, fc, w_rf, "assemble_norm_ball");
    const auto p = w_rf.cols();
    RobustProblemNormBall prob;
    prob.q = static_cast<int>(nodes.front().a_obs.rows());
    prob.n_t = static_cast<int>(h_hat.front().cols());
    prob.c = vec(CMatrix::Identity(p, p));
    prob.noise_floor = (w_rf.adjoint() * fc.r_u * w_rf).trace().real();
    const auto k = compute_norm_ball_constants(nodes, prior, w_rf, eps_h);
    prob.eta = k.eta;
    prob.zeta = k.zeta;
    for (std::size_t m = 0; m < nodes.size(); ++m) {
        const CMatrix g = w_rf.adjoint() * h_hat[m];
        prob.l_hat_blocks.push_back(kron(hermitian_sqrt(nodes[m].r_noise).transpose(), g));
        prob.w_blocks.push_back(kron(nodes[m].a_obs.transpose(), g));
    }
    return prob;
}

double norm_ball_objective(const RobustProblemNormBall& prob, const CVector& f)
{
    const double a = apply_blocks(prob.l_hat_blocks, f).norm();
    const double b = f.norm();
    const double s = a + prob.zeta * b;
    return s * s + prob.eta * prob.eta * b * b;
}

CVector norm_ball_gradient(const RobustProblemNormBall& prob, const CVector& f)
{
    const CVector lf = apply_blocks(prob.l_hat_blocks, f);
    const double a = lf.norm();
    const double b = f.norm();
    CVector dir = CVector::Zero(f.size());
    if (a > 0.0) dir += apply_blocks_adjoint(prob.l_hat_blocks, lf) / a;
    if (b > 0.0) dir += (prob.zeta / b) * f;
    return 2.0 * (a + prob.zeta * b) * dir + 2.0 * prob.eta * prob.eta * f;
}

NormBallDesign design_robust_norm_ball(const RobustProblemNormBall& prob, const NormBallOptions& opts)
{
    if (prob.l_hat_blocks.size() != prob.w_blocks.size() || prob.l_hat_blocks.empty()) {
        throw DimensionError("design_robust_norm_ball: block count mismatch");
    }
    const AffineProjector proj(prob.w_blocks, prob.c);
    auto h = [&](const CVector& f) { return norm_ball_objective(prob, f); };

    // Starting point.  At a minimizer the stationarity condition matches that
    // of min ||L f||^2 + mu ||f||^2 s.t. W f = c with
    //   mu = zeta a / b + eta^2 a / (a + zeta b),  a = ||L f||, b = ||f||,
    // so the scalar fixed point mu = m(mu) is located by a bracketed
    // regula falsi (Illinois) in log mu, and the descent below only polishes.
    CVector f = proj.min_norm();
    double h_f = h(f);
    {
        std::vector<CMatrix> gram;
        for (const auto& l : prob.l_hat_blocks) gram.push_back(l.adjoint() * l);
        // Fixed-point residual m(mu) - mu; NaN when the solve fails.
        auto residual = [&](double mu) {
            std::vector<CMatrix> q_blocks;
            for (const auto& gm : gram) q_blocks.push_back(gm + mu * CMatrix::Identity(gm.rows(), gm.cols()));
            CVector cand;
            try {
                cand = proj.onto(solve_eq_qp_blocks(q_blocks, prob.w_blocks, prob.c));
            } catch (const Error&) {
                return std::numeric_limits<double>::quiet_NaN();
            }
            const double hc = h(cand);
            if (hc < h_f) {
                f = cand;
                h_f = hc;
            }
            const double a = apply_blocks(prob.l_hat_blocks, cand).norm();
            const double b = cand.norm();
            if (!(b > 0.0)) return std::numeric_limits<double>::quiet_NaN();
            const double denom = a + prob.zeta * b;
            const double next = prob.zeta * a / b + (denom > 0.0 ? prob.eta * prob.eta * a / denom : 0.0);
            return next - mu;
        };
        const double mu0 = prob.zeta * prob.zeta + prob.eta * prob.eta;
        double r0 = residual(mu0);
        if (mu0 > 0.0 && std::isfinite(r0) && r0 != 0.0) {
            // m(0) >= 0 and m is bounded, so stepping by 4x brackets the root.
            const double dir = r0 > 0.0 ? 4.0 : 0.25;
            double x0 = std::log(mu0);
            double x1 = x0;
            double r1 = r0;
            for (int k = 0; k < 40 && std::isfinite(r1) && (r1 > 0.0) == (r0 > 0.0); ++k) {
                x0 = x1;
                r0 = r1;
                x1 = x0 + std::log(dir);
                r1 = residual(std::exp(x1));
            }
            if (std::isfinite(r1) && (r1 > 0.0) != (r0 > 0.0)) {
                int side = 0;
                for (int k = 0; k < 100; ++k) {
                    const double x = (x0 * r1 - x1 * r0) / (r1 - r0);
                    const double r = residual(std::exp(x));
                    if (!std::isfinite(r) || std::abs(r) <= 1e-12 * std::exp(x) || std::abs(x1 - x0) <= 1e-13) break;
                    if ((r > 0.0) == (r1 > 0.0)) {
                        x1 = x;
                        r1 = r;
                        if (side == 1) r0 *= 0.5;
                        side = 1;
                    } else {
                        x0 = x;
                        r0 = r;
                        if (side == -1) r1 *= 0.5;
                        side = -1;
                    }
                }
            }
        }
    }

    // Accelerated projected gradient with backtracking and function-value
    // restart.  Every iterate stays on the affine set.
    CVector x = f;
    CVector y = f;
    double t = 1.0;
    double lip = 1.0;
    std::deque<double> history{h_f};
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const CVector g = proj.tangent(norm_ball_gradient(prob, y));
        const double h_y = h(y);
        const double g2 = g.squaredNorm();
        CVector x_new;
        double h_new = 0.0;
        for (int bt = 0;; ++bt) {
            x_new = y - g / lip;
            h_new = h(x_new);
            if (h_new <= h_y - 0.5 * g2 / lip + 1e-15 * std::abs(h_y)) break;
            lip *= 2.0;
            if (bt > 200) throw ConvergenceError("design_robust_norm_ball: backtracking failed");
        }
        if (h_new > h_f) {
            y = x;
            t = 1.0;
        } else {
            const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            y = x_new + ((t - 1.0) / t_new) * (x_new - x);
            x = std::move(x_new);
            t = t_new;
            h_f = h_new;
        }
        lip *= 0.9;

        history.push_back(h_f);
        if (static_cast<int>(history.size()) > opts.window + 1) history.pop_front();
        if (static_cast<int>(history.size()) == opts.window + 1 &&
            history.front() - h_f <= opts.rel_decrease_tol * std::abs(h_f)) {
            CVector out = proj.onto(x);
            NormBallDesign d;
            d.objective = h(out);
            d.iterations = it;
            d.precoder = DigitalPrecoder::from_stacked(std::move(out), prob.nodes(), prob.n_t, prob.q);
            return d;
        }
    }
    throw ConvergenceError("design_robust_norm_ball: no convergence in " + std::to_string(opts.max_iterations) +
                           " iterations");
}

double worst_case_mse_bound(const DigitalPrecoder& f, const RobustProblemNormBall& prob)
{
    return norm_ball_objective(prob, f.f) + prob.noise_floor;
}

}  // namespace hbf
