#pragma once

// Fully digital precoder designs under perfect CSI.
//
// The stacked precoder f = [vec(F_1); ...; vec(F_M)] minimizes f^H Psi f
// subject to the zero-forcing constraint Z f = vec(I_p), optionally with a
// total or per-node transmit power budget.  Every block matrix is kept per
// node; the network-level matrices are block diagonal (Psi, Gamma) or
// horizontally stacked (Z), so solves cost M small factorizations.

#include <span>
#include <vector>

#include "hbf/channel.hpp"
#include "hbf/linalg.hpp"
#include "hbf/network.hpp"

namespace hbf {

struct DesignProblem {
    std::vector<CMatrix> psi_blocks;    // R_m^T kron (H_m^H W W^H H_m)
    std::vector<CMatrix> z_blocks;      // A_m^T kron (W^H H_m)
    CVector b;                          // vec(I_p)
    std::vector<CMatrix> gamma_blocks;  // (A_m R_theta A_m^H + R_m)^T kron I
    CMatrix w_rf;
    double noise_floor = 0.0;           // Tr[W^H R_u W]
    CMatrix r_theta;
    int q = 0;
    int n_t = 0;

    std::size_t nodes() const { return psi_blocks.size(); }
    int p() const { return static_cast<int>(w_rf.cols()); }
    Eigen::Index node_dim() const { return Eigen::Index(q) * n_t; }
};

struct DigitalPrecoder {
    CVector f;
    std::vector<CMatrix> per_node;  // n_t x q each

    /// Splits a stacked vector into per-node n_t x q matrices.
    static DigitalPrecoder from_stacked(CVector f, std::size_t nodes, int n_t, int q);
    /// Stacks per-node matrices.
    static DigitalPrecoder from_per_node(std::vector<CMatrix> per_node);
};

/// Cluster indices ordered by sum_m |gain_k^m|, descending; ties keep the
/// lower index first.
std::vector<int> rank_clusters(const ChannelRealization& chan);

/// FC combiner: A_fc columns of the n_rf_fc strongest clusters.
CMatrix select_rf_combiner(const ChannelRealization& chan, int n_rf_fc);

DesignProblem assemble_problem(std::span<const CMatrix> h, std::span<const NodeModel> nodes,
                               const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf);

inline DesignProblem assemble_problem(const ChannelRealization& chan, std::span<const NodeModel> nodes,
                                      const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf)
{
    return assemble_problem(chan.h, nodes, prior, fc, w_rf);
}

/// Minimizer of f^H Q f subject to Z f = b, with Q given as diagonal blocks
/// and Z as the matching column blocks:
///   f = Q^-1 Z^H (Z Q^-1 Z^H)^-1 b.
/// Throws RankError when Z Q^-1 Z^H cannot be inverted or the constraint
/// residual exceeds 1e-8 relative.
CVector solve_eq_qp_blocks(std::span<const CMatrix> q_blocks, std::span<const CMatrix> z_blocks,
                           const CVector& b);

/// Dense single-block form of solve_eq_qp_blocks().
CVector solve_eq_qp(const CMatrix& q_mat, const CMatrix& z, const CVector& b);

/// ||Z f - b|| / ||b||.
double constraint_residual(std::span<const CMatrix> z_blocks, const CVector& b, const CVector& f);

DigitalPrecoder design_zf(const DesignProblem& prob);

struct TotalPowerDesign {
    DigitalPrecoder precoder;
    double lambda = 0.0;
    double power = 0.0;
};

/// Adds f^H Gamma f <= rho_t; the multiplier is found by bisection.
/// Throws InfeasibleError when rho_t is below the minimum power that meets
/// the zero-forcing constraint.
TotalPowerDesign design_total_power(const DesignProblem& prob, double rho_t);

struct PerNodeOptions {
    double step = 1.0;            // c in the c/sqrt(t) step rule
    int max_iterations = 5000;
    double violation_tol = 1e-5;  // relative, per node
    double gap_tol = 1e-4;        // relative duality gap
};

struct PerNodeDesign {
    DigitalPrecoder precoder;
    std::vector<double> duals;
    std::vector<double> powers;
    int iterations = 0;
};

/// Adds f_m^H Gamma_m f_m <= rho_m for every node, solved by projected dual
/// ascent with step c/sqrt(t).  Violating nodes start at the multiplier that
/// alone meets their budget; steps are scaled by the inverse Jacobian of the
/// relative violations over the active set.  Converged when every violation,
/// the relative gap and every |lambda_m (P_m - rho_m)| / rho_m are within
/// tolerance.  Throws InfeasibleError (a node cannot meet its budget even
/// with the others unconstrained) or ConvergenceError.
PerNodeDesign design_per_node_power(const DesignProblem& prob, std::span<const double> rhos,
                                    const PerNodeOptions& opts = {});

/// f^H Psi f + noise floor.  Exact MSE only when f meets the constraint.
double evaluate_mse_analytic(const DigitalPrecoder& f, const DesignProblem& prob);

/// Expected squared error for any precoder, including the bias left when the
/// zero-forcing constraint is not met:
///   ||(sum_m W^H H_m F_m A_m - I) R_theta^{1/2}||_F^2 + f^H Psi f + floor.
double evaluate_mse_full(const DigitalPrecoder& f, const DesignProblem& prob);

/// vec(F_m)^H Gamma_m vec(F_m).
double node_power(const CMatrix& f_m, const CMatrix& gamma_m);

/// sum_m W^H H_m F_m A_m.
CMatrix end_to_end_map(std::span<const CMatrix> h, const CMatrix& w_rf, std::span<const CMatrix> per_node,
                       std::span<const NodeModel> nodes);

/// Expected squared error given the true channels, any precoder:
///   ||(E - I) R_theta^{1/2}||_F^2 + sum_m Tr[W^H H_m F_m R_m F_m^H H_m^H W]
///   + Tr[W^H R_u W],  E = end_to_end_map(...).
double conditional_mse(std::span<const CMatrix> h, const CMatrix& w_rf, std::span<const CMatrix> per_node,
                       std::span<const NodeModel> nodes, const PriorModel& prior, const FcModel& fc);

}  // namespace hbf
