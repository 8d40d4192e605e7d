#include "hbf/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "hbf/error.hpp"

namespace hbf {

namespace {

constexpr double kConstraintTol = 1e-8;
constexpr double kRangeTol = 1e-10;  // relative eigenvalue cut for the range of a singular block
constexpr double kBlockRcond = 1e-13;

void check_blocks(std::span<const CMatrix> q_blocks, std::span<const CMatrix> z_blocks, const CVector& b)
{
    if (q_blocks.size() != z_blocks.size()) throw DimensionError("eq-QP: block count mismatch");
    for (std::size_t m = 0; m < q_blocks.size(); ++m) {
        if (q_blocks[m].rows() != q_blocks[m].cols() || z_blocks[m].cols() != q_blocks[m].rows() ||
            z_blocks[m].rows() != b.size()) {
            throw DimensionError("eq-QP: inconsistent dimensions in block " + std::to_string(m));
        }
    }
}

std::vector<CMatrix> combine(std::span<const CMatrix> a, std::span<const CMatrix> b, double weight)
{
    std::vector<CMatrix> out;
    out.reserve(a.size());
    for (std::size_t m = 0; m < a.size(); ++m) out.push_back(a[m] + weight * b[m]);
    return out;
}

double quad_blocks(std::span<const CMatrix> blocks, const CVector& f)
{
    double s = 0.0;
    Eigen::Index at = 0;
    for (const auto& blk : blocks) {
        const auto seg = f.segment(at, blk.rows());
        s += seg.dot(blk * seg).real();
        at += blk.rows();
    }
    return s;
}

std::vector<double> block_powers(const DesignProblem& prob, const CVector& f)
{
    std::vector<double> out;
    const auto d = prob.node_dim();
    for (std::size_t m = 0; m < prob.nodes(); ++m) {
        const auto seg = f.segment(Eigen::Index(m) * d, d);
        out.push_back(seg.dot(prob.gamma_blocks[m] * seg).real());
    }
    return out;
}

}  // namespace

DigitalPrecoder DigitalPrecoder::from_stacked(CVector f, std::size_t nodes, int n_t, int q)
{
    const Eigen::Index d = Eigen::Index(n_t) * q;
    if (f.size() != d * Eigen::Index(nodes)) throw DimensionError("DigitalPrecoder: stacked length mismatch");
    DigitalPrecoder out;
    for (std::size_t m = 0; m < nodes; ++m) {
        out.per_node.push_back(unvec(f.segment(Eigen::Index(m) * d, d), n_t));
    }
    out.f = std::move(f);
    return out;
}

DigitalPrecoder DigitalPrecoder::from_per_node(std::vector<CMatrix> per_node)
{
    std::vector<CVector> parts;
    for (const auto& fm : per_node) parts.push_back(vec(fm));
    DigitalPrecoder out;
    out.f = vconcat(parts);
    out.per_node = std::move(per_node);
    return out;
}

std::vector<int> rank_clusters(const ChannelRealization& chan)
{
    const Eigen::Index n_cl = chan.n_clusters();
    std::vector<double> strength(n_cl, 0.0);
    for (const auto& g : chan.gains)
        for (Eigen::Index k = 0; k < n_cl; ++k) strength[k] += std::abs(g(k));
    std::vector<int> order(n_cl);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return strength[a] > strength[b]; });
    return order;
}

CMatrix select_rf_combiner(const ChannelRealization& chan, int n_rf_fc)
{
    if (n_rf_fc < 0 || n_rf_fc > chan.n_clusters()) {
        throw DimensionError("select_rf_combiner: n_rf_fc exceeds the cluster count");
    }
    const auto order = rank_clusters(chan);
    CMatrix w(chan.a_fc.rows(), n_rf_fc);
    for (int i = 0; i < n_rf_fc; ++i) w.col(i) = chan.a_fc.col(order[i]);
    return w;
}

DesignProblem assemble_problem(std::span<const CMatrix> h, std::span<const NodeModel> nodes,
                               const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf)
{
    if (h.size() != nodes.size()) throw DimensionError("assemble_problem: channel/node count mismatch");
    if (h.empty()) throw DimensionError("assemble_problem: no nodes");
    const auto p = w_rf.cols();
    if (prior.r_theta.rows() != p) throw DimensionError("assemble_problem: W_RF must have p columns");
    if (fc.r_u.rows() != w_rf.rows()) throw DimensionError("assemble_problem: R_u does not match W_RF");

    DesignProblem prob;
    prob.w_rf = w_rf;
    prob.r_theta = prior.r_theta;
    prob.q = static_cast<int>(nodes.front().a_obs.rows());
    prob.n_t = static_cast<int>(h.front().cols());
    prob.b = vec(CMatrix::Identity(p, p));
    prob.noise_floor = (w_rf.adjoint() * fc.r_u * w_rf).trace().real();

    for (std::size_t m = 0; m < h.size(); ++m) {
        const auto& node = nodes[m];
        if (h[m].rows() != w_rf.rows() || h[m].cols() != prob.n_t) {
            throw DimensionError("assemble_problem: channel " + std::to_string(m) + " has wrong shape");
        }
        if (node.a_obs.rows() != prob.q || node.a_obs.cols() != p || node.r_noise.rows() != prob.q) {
            throw DimensionError("assemble_problem: node " + std::to_string(m) + " has wrong shape");
        }
        const CMatrix g = w_rf.adjoint() * h[m];  // p x n_t effective channel
        prob.psi_blocks.push_back(kron(node.r_noise.transpose(), g.adjoint() * g));
        prob.z_blocks.push_back(kron(node.a_obs.transpose(), g));
        const CMatrix tx_cov = node.a_obs * prior.r_theta * node.a_obs.adjoint() + node.r_noise;
        prob.gamma_blocks.push_back(kron(tx_cov.transpose(), CMatrix::Identity(prob.n_t, prob.n_t)));
    }
    return prob;
}

namespace {

// Q^-1 Z^H for one block.  A singular Q (e.g. Psi_m, whose null space is
// C^q kron null(W^H H_m)) is handled on its range when Z^H lies inside it,
// so no ridge residue leaks into directions that affect neither the
// objective nor the constraint.
CMatrix block_solve(const CMatrix& q, const CMatrix& zh)
{
    const Eigen::LLT<CMatrix> llt(q);
    if (llt.info() == Eigen::Success && llt.rcond() >= kBlockRcond) {
        CMatrix x = llt.solve(zh);
        if (x.allFinite()) return x;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(q);
    const RVector& ev = es.eigenvalues();
    const double cut = kRangeTol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::Index k = 0;
    while (k < ev.size() && ev(k) <= cut) ++k;
    const CMatrix v = es.eigenvectors().rightCols(ev.size() - k);
    const CMatrix coef = v.adjoint() * zh;
    if ((zh - v * coef).norm() > kConstraintTol * zh.norm()) return hermitian_solve(q, zh);
    return v * (ev.tail(ev.size() - k).cwiseInverse().asDiagonal() * coef);
}

// f_m = X_m S^-1 b with X_m = Q_m^-1 Z_m^H and S = sum_m Z_m X_m.
CVector combine_blocks(std::span<const CMatrix> qinv_zh, std::span<const CMatrix> z_blocks, const CVector& b)
{
    const auto k = b.size();
    CMatrix schur = CMatrix::Zero(k, k);
    for (std::size_t m = 0; m < z_blocks.size(); ++m) schur.noalias() += z_blocks[m] * qinv_zh[m];
    CVector nu;
    try {
        nu = hermitian_solve(schur, b);
    } catch (const SingularMatrixError&) {
        throw RankError("eq-QP: Z Q^-1 Z^H is singular; the zero-forcing constraint is rank deficient");
    }
    std::vector<CVector> parts;
    parts.reserve(qinv_zh.size());
    for (const auto& x : qinv_zh) parts.push_back(x * nu);
    CVector f = vconcat(parts);
    if (constraint_residual(z_blocks, b, f) > kConstraintTol) {
        throw RankError("eq-QP: constraint cannot be met; Z is rank deficient");
    }
    return f;
}

}  // namespace

CVector solve_eq_qp_blocks(std::span<const CMatrix> q_blocks, std::span<const CMatrix> z_blocks,
                           const CVector& b)
{
    check_blocks(q_blocks, z_blocks, b);
    std::vector<CMatrix> qinv_zh;
    qinv_zh.reserve(q_blocks.size());
    for (std::size_t m = 0; m < q_blocks.size(); ++m) {
        qinv_zh.push_back(block_solve(q_blocks[m], z_blocks[m].adjoint()));
    }
    return combine_blocks(qinv_zh, z_blocks, b);
}

CVector solve_eq_qp(const CMatrix& q_mat, const CMatrix& z, const CVector& b)
{
    return solve_eq_qp_blocks(std::span(&q_mat, 1), std::span(&z, 1), b);
}

double constraint_residual(std::span<const CMatrix> z_blocks, const CVector& b, const CVector& f)
{
    CVector r = -b;
    Eigen::Index at = 0;
    for (const auto& z : z_blocks) {
        r.noalias() += z * f.segment(at, z.cols());
        at += z.cols();
    }
    const double bn = b.norm();
    return bn > 0.0 ? r.norm() / bn : r.norm();
}

DigitalPrecoder design_zf(const DesignProblem& prob)
{
    CVector f = solve_eq_qp_blocks(prob.psi_blocks, prob.z_blocks, prob.b);
    return DigitalPrecoder::from_stacked(std::move(f), prob.nodes(), prob.n_t, prob.q);
}

TotalPowerDesign design_total_power(const DesignProblem& prob, double rho_t)
{
    if (!(rho_t > 0.0)) throw InfeasibleError("design_total_power: rho_t must be > 0");

    auto solve_at = [&](double lambda) {
        const auto q_blocks = combine(prob.psi_blocks, prob.gamma_blocks, lambda);
        CVector f = solve_eq_qp_blocks(q_blocks, prob.z_blocks, prob.b);
        const double power = quad_blocks(prob.gamma_blocks, f);
        return std::pair{std::move(f), power};
    };
    auto finish = [&](CVector f, double lambda, double power) {
        return TotalPowerDesign{DigitalPrecoder::from_stacked(std::move(f), prob.nodes(), prob.n_t, prob.q),
                                lambda, power};
    };

    auto [f0, p0] = solve_at(0.0);
    if (p0 <= rho_t) return finish(std::move(f0), 0.0, p0);

    // Power of the minimum-power zero-forcing solution, the lambda -> inf limit.
    const CVector f_min = solve_eq_qp_blocks(prob.gamma_blocks, prob.z_blocks, prob.b);
    const double p_min = quad_blocks(prob.gamma_blocks, f_min);
    if (p_min > rho_t) {
        throw InfeasibleError("design_total_power: budget " + std::to_string(rho_t) +
                              " is below the minimum zero-forcing power " + std::to_string(p_min));
    }

    double lo = 0.0;
    double hi = 1.0;
    auto [f_hi, p_hi] = solve_at(hi);
    for (int i = 0; p_hi > rho_t; ++i) {
        if (i > 200) throw InfeasibleError("design_total_power: budget is at the feasibility limit");
        lo = hi;
        hi *= 2.0;
        std::tie(f_hi, p_hi) = solve_at(hi);
    }
    // g(lambda) = P(lambda) - rho_t is non-increasing; keep hi on the feasible side.
    for (int i = 0; i < 200; ++i) {
        if (rho_t - p_hi <= 1e-10 * rho_t) break;
        if (hi - lo <= 1e-15 * hi) break;
        const double mid = 0.5 * (lo + hi);
        auto [f_mid, p_mid] = solve_at(mid);
        if (p_mid > rho_t) {
            lo = mid;
        } else {
            hi = mid;
            f_hi = std::move(f_mid);
            p_hi = p_mid;
        }
    }
    return finish(std::move(f_hi), hi, p_hi);
}

namespace {

// Eq-QP with Q_m = Psi_m + lambda_m Gamma_m.  Each node's Q_m^-1 Z_m^H is
// kept until its multiplier changes; dual updates and Jacobian probes move
// few multipliers at a time.
class WeightedSolver {
public:
    explicit WeightedSolver(const DesignProblem& prob)
        : prob_(prob), lambda_(prob.nodes(), std::numeric_limits<double>::quiet_NaN()), x_(prob.nodes())
    {
    }

    CVector solve(std::span<const double> lambda)
    {
        for (std::size_t m = 0; m < prob_.nodes(); ++m) {
            if (lambda[m] == lambda_[m]) continue;
            const CMatrix q = prob_.psi_blocks[m] + lambda[m] * prob_.gamma_blocks[m];
            x_[m] = block_solve(q, prob_.z_blocks[m].adjoint());
            lambda_[m] = lambda[m];
        }
        return combine_blocks(x_, prob_.z_blocks, prob_.b);
    }

private:
    const DesignProblem& prob_;
    std::vector<double> lambda_;
    std::vector<CMatrix> x_;
};

// Multiplier that alone brings node m down to its budget, the others held at
// zero; located to a factor 1.1 on a log scale.  Throws InfeasibleError when no
// multiplier suffices, i.e. node m cannot meet its budget even with every
// other node unconstrained.
double solo_multiplier(const DesignProblem& prob, WeightedSolver& solver, std::size_t m, double rho, double unit)
{
    std::vector<double> lambda(prob.nodes(), 0.0);
    auto power_at = [&](double l) {
        lambda[m] = l;
        try {
            const CVector f = solver.solve(lambda);
            return block_powers(prob, f)[m];
        } catch (const RankError&) {
            // The weighting has outrun double precision.
            return std::numeric_limits<double>::infinity();
        }
    };
    double hi = unit;
    double lo = 0.0;
    int k = 0;
    if (power_at(hi) > rho) {
        for (lo = hi;; lo = hi) {
            const double pw = power_at(hi *= 10.0);
            if (pw <= rho) break;
            if (++k > 20 || !std::isfinite(pw)) {
                throw InfeasibleError("design_per_node_power: node " + std::to_string(m) +
                                      " cannot meet its budget under the zero-forcing constraint");
            }
        }
    } else {
        for (lo = hi / 10.0; power_at(lo) <= rho; lo /= 10.0) {
            hi = lo;
            if (++k > 40) return hi;
        }
    }
    while (hi > 1.1 * lo) {
        const double mid = std::sqrt(lo * hi);
        (power_at(mid) > rho ? lo : hi) = mid;
    }
    return hi;
}

}  // namespace

PerNodeDesign design_per_node_power(const DesignProblem& prob, std::span<const double> rhos,
                                    const PerNodeOptions& opts)
{
    const std::size_t m_nodes = prob.nodes();
    if (rhos.size() != m_nodes) throw DimensionError("design_per_node_power: one budget per node required");
    for (double r : rhos) {
        if (!(r > 0.0)) throw InfeasibleError("design_per_node_power: budgets must be > 0");
    }

    // Node powers sum to the total power, so a minimum-power zero-forcing
    // precoder above the summed budgets rules out every allocation.
    const CVector f_min = solve_eq_qp_blocks(prob.gamma_blocks, prob.z_blocks, prob.b);
    const double p_min = quad_blocks(prob.gamma_blocks, f_min);
    const double rho_sum = std::accumulate(rhos.begin(), rhos.end(), 0.0);
    if (p_min > rho_sum) {
        throw InfeasibleError("design_per_node_power: summed budget " + std::to_string(rho_sum) +
                              " is below the minimum zero-forcing power " + std::to_string(p_min));
    }

    // Multiplier units: objective per unit power.
    double psi_tr = 0.0;
    double gamma_tr = 0.0;
    for (std::size_t m = 0; m < m_nodes; ++m) {
        psi_tr += prob.psi_blocks[m].trace().real();
        gamma_tr += prob.gamma_blocks[m].trace().real();
    }
    const double unit = psi_tr > 0.0 && gamma_tr > 0.0 ? psi_tr / gamma_tr : 1.0;

    WeightedSolver solver(prob);
    auto residuals = [&](const std::vector<double>& lambda) {
        const CVector f = solver.solve(lambda);
        const auto pw = block_powers(prob, f);
        RVector g(m_nodes);
        for (std::size_t m = 0; m < m_nodes; ++m) g(m) = (pw[m] - rhos[m]) / rhos[m];
        return g;
    };

    // The dual gradient is the relative violation g.  Steps are scaled by
    // the inverse of its Jacobian over the active set, estimated by finite
    // differences whenever the set changes: node powers can fall by orders
    // of magnitude over a small multiplier range and are coupled through the
    // shared constraint, so an unscaled or diagonal step stalls.
    std::vector<double> lambda(m_nodes, 0.0);
    std::vector<std::size_t> active;
    Eigen::MatrixXd jac;
    int since_refresh = 0;
    for (int t = 1; t <= opts.max_iterations; ++t) {
        CVector f = solver.solve(lambda);
        const auto powers = block_powers(prob, f);
        const double objective = quad_blocks(prob.psi_blocks, f);

        double max_violation = 0.0;
        double max_slack = 0.0;
        double slack = 0.0;
        RVector g(m_nodes);
        for (std::size_t m = 0; m < m_nodes; ++m) {
            g(m) = (powers[m] - rhos[m]) / rhos[m];
            max_violation = std::max(max_violation, g(m));
            max_slack = std::max(max_slack, std::abs(lambda[m] * g(m)));
            slack += lambda[m] * (powers[m] - rhos[m]);
        }
        const double gap = std::abs(slack) / std::max(objective, 1e-300);
        if (max_violation <= opts.violation_tol && gap <= opts.gap_tol && max_slack <= opts.gap_tol) {
            PerNodeDesign out;
            out.precoder = DigitalPrecoder::from_stacked(std::move(f), m_nodes, prob.n_t, prob.q);
            out.duals = std::move(lambda);
            out.powers = powers;
            out.iterations = t;
            return out;
        }

        if (t == 1) {
            // Warm start: each violating node at the multiplier that alone
            // meets its budget.
            for (std::size_t m = 0; m < m_nodes; ++m) {
                if (g(m) > 0.0) lambda[m] = solo_multiplier(prob, solver, m, rhos[m], unit);
            }
            continue;
        }

        std::vector<std::size_t> now;
        double ref = 0.0;
        for (std::size_t m = 0; m < m_nodes; ++m) {
            if (lambda[m] > 0.0 || g(m) > 0.0) now.push_back(m);
            ref = std::max(ref, lambda[m]);
        }
        if (ref == 0.0) ref = unit;
        if (now != active || ++since_refresh >= 50) {
            active = now;
            since_refresh = 0;
            const auto k = static_cast<Eigen::Index>(active.size());
            jac.resize(k, k);
            for (Eigen::Index j = 0; j < k; ++j) {
                auto bumped = lambda;
                const double dl = 1e-3 * (lambda[active[j]] > 0.0 ? lambda[active[j]] : ref);
                bumped[active[j]] += dl;
                const RVector gb = residuals(bumped);
                for (Eigen::Index i = 0; i < k; ++i) jac(i, j) = (gb(active[i]) - g(active[i])) / dl;
            }
        }

        const auto k = static_cast<Eigen::Index>(active.size());
        RVector ga(k);
        for (Eigen::Index i = 0; i < k; ++i) ga(i) = g(active[i]);
        RVector dir = -jac.fullPivLu().solve(ga);
        if (!dir.allFinite() || dir.dot(ga) <= 0.0) {
            for (Eigen::Index i = 0; i < k; ++i) {
                const double d = std::abs(jac(i, i));
                dir(i) = ga(i) * (d > 0.0 ? 1.0 / d : ref);
            }
        }
        const double step = opts.step / std::sqrt(double(t - 1));
        for (Eigen::Index i = 0; i < k; ++i) {
            lambda[active[i]] = std::max(0.0, lambda[active[i]] + step * dir(i));
        }
    }
    throw ConvergenceError("design_per_node_power: no convergence in " + std::to_string(opts.max_iterations) +
                           " iterations (budgets may be near infeasible)");
}

double evaluate_mse_analytic(const DigitalPrecoder& f, const DesignProblem& prob)
{
    return quad_blocks(prob.psi_blocks, f.f) + prob.noise_floor;
}

double evaluate_mse_full(const DigitalPrecoder& f, const DesignProblem& prob)
{
    const int p = prob.p();
    CVector zf = CVector::Zero(prob.b.size());
    Eigen::Index at = 0;
    for (const auto& z : prob.z_blocks) {
        zf.noalias() += z * f.f.segment(at, z.cols());
        at += z.cols();
    }
    const CMatrix bias = unvec(zf - prob.b, p);
    const double bias_term = (bias * hermitian_sqrt(prob.r_theta)).squaredNorm();
    return bias_term + evaluate_mse_analytic(f, prob);
}

double node_power(const CMatrix& f_m, const CMatrix& gamma_m)
{
    const CVector v = vec(f_m);
    if (gamma_m.rows() != v.size()) throw DimensionError("node_power: Gamma_m does not match F_m");
    return v.dot(gamma_m * v).real();
}

CMatrix end_to_end_map(std::span<const CMatrix> h, const CMatrix& w_rf, std::span<const CMatrix> per_node,
                       std::span<const NodeModel> nodes)
{
    if (h.size() != per_node.size() || h.size() != nodes.size()) {
        throw DimensionError("end_to_end_map: node count mismatch");
    }
    const auto p = nodes.empty() ? w_rf.cols() : nodes.front().a_obs.cols();
    CMatrix e = CMatrix::Zero(w_rf.cols(), p);
    for (std::size_t m = 0; m < h.size(); ++m) e.noalias() += w_rf.adjoint() * h[m] * per_node[m] * nodes[m].a_obs;
    return e;
}

double conditional_mse(std::span<const CMatrix> h, const CMatrix& w_rf, std::span<const CMatrix> per_node,
                       std::span<const NodeModel> nodes, const PriorModel& prior, const FcModel& fc)
{
    CMatrix e = end_to_end_map(h, w_rf, per_node, nodes);
    e -= CMatrix::Identity(e.rows(), e.cols());
    double mse = (e * hermitian_sqrt(prior.r_theta)).squaredNorm();
    for (std::size_t m = 0; m < h.size(); ++m) {
        const CMatrix g = w_rf.adjoint() * h[m] * per_node[m];
        mse += (g * nodes[m].r_noise * g.adjoint()).trace().real();
    }
    return mse + (w_rf.adjoint() * fc.r_u * w_rf).trace().real();
}

}  // namespace hbf
