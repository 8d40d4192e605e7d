#pragma once

// Precoder designs that account for CSI error.
//
// Stochastic model: H = H_hat + R_FC^{1/2} S R_s^{T/2}; the design minimizes
// the average MSE f^H Omega f under the zero-forcing constraint written with
// H_hat.  Norm-ball model: ||Delta H||_F <= eps; the design minimizes an
// upper bound on the worst-case MSE.

#include <span>
#include <vector>

#include "hbf/channel.hpp"
#include "hbf/design.hpp"
#include "hbf/linalg.hpp"
#include "hbf/network.hpp"

namespace hbf {

enum class ExpectationSide { left, right };

/// Closed-form second moments of X = X_hat + R_r^{1/2} S R_t^{T/2}:
///   left:  E[X Z X^H] = X_hat Z X_hat^H + Tr[Z R_t^T] R_r
///   right: E[X^H Z X] = X_hat^H Z X_hat + Tr[Z R_r] R_t^T
CMatrix correlated_expectation(const CMatrix& x_hat, const CMatrix& z, const CMatrix& r_r, const CMatrix& r_t,
                           ExpectationSide side);

struct RobustProblemStochastic {
    std::vector<CMatrix> omega_blocks;  // L_m + alpha (J_m + T_m)
    std::vector<CMatrix> l_blocks;      // R_m^T kron (H_hat^H W W^H H_hat)
    std::vector<CMatrix> w_blocks;      // A_m^T kron (W^H H_hat_m)
    CVector c;                          // vec(I_p)
    double alpha_scalar = 0.0;          // Tr[W^H R_FC^T W]
    double noise_floor = 0.0;
    int q = 0;
    int n_t = 0;

    std::size_t nodes() const { return omega_blocks.size(); }
};

RobustProblemStochastic assemble_stochastic(std::span<const CMatrix> h_hat, std::span<const NodeModel> nodes,
                                            const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf,
                                            const StochasticUncertainty& u);

DigitalPrecoder design_robust_stochastic(const RobustProblemStochastic& prob);

/// f^H Omega f + noise floor.
double stochastic_average_mse(const DigitalPrecoder& f, const RobustProblemStochastic& prob);

/// Per-node MSE for a given error draw, cross-node error terms dropped:
///   sum_m ||W^H dH_m F_m A_m R_theta^{1/2}||_F^2
///       + Tr[W^H H_m F_m R_m F_m^H H_m^H W] + Tr[W^H R_u W],  H_m = H_hat_m + dH_m.
/// Its mean over zero-mean independent errors equals the mean of the full
/// conditional MSE.
double decoupled_error_mse(std::span<const CMatrix> h_hat, std::span<const CMatrix> delta_h, const CMatrix& w_rf,
                           std::span<const CMatrix> per_node, std::span<const NodeModel> nodes,
                           const PriorModel& prior, const FcModel& fc);

struct NormBallConstants {
    double eta = 0.0;   // bounds ||G f|| <= eta ||f||
    double zeta = 0.0;  // bounds ||Delta L||_F <= zeta
};

/// eta^2  = eps^2 * sum_m Tr[A_m R_theta A_m^H] * lambda_max(W W^H)
/// zeta^2 = eps^2 * sum_m Tr[R_m] * lambda_max(W W^H)
NormBallConstants compute_norm_ball_constants(std::span<const NodeModel> nodes, const PriorModel& prior,
                                              const CMatrix& w_rf, double eps_h);

struct RobustProblemNormBall {
    std::vector<CMatrix> l_hat_blocks;  // (R_m^{1/2})^T kron (W^H H_hat_m)
    double zeta = 0.0;
    double eta = 0.0;
    std::vector<CMatrix> w_blocks;
    CVector c;
    double noise_floor = 0.0;
    int q = 0;
    int n_t = 0;

    std::size_t nodes() const { return l_hat_blocks.size(); }
};

RobustProblemNormBall assemble_norm_ball(std::span<const CMatrix> h_hat, std::span<const NodeModel> nodes,
                                         const PriorModel& prior, const FcModel& fc, const CMatrix& w_rf,
                                         double eps_h);

/// h(f) = (||L f|| + zeta ||f||)^2 + eta^2 ||f||^2.
double norm_ball_objective(const RobustProblemNormBall& prob, const CVector& f);

/// Gradient w.r.t. conj(f), scaled so that dh = Re<grad, df>.  Terms whose
/// norm vanishes contribute the zero subgradient.
CVector norm_ball_gradient(const RobustProblemNormBall& prob, const CVector& f);

struct NormBallOptions {
    int max_iterations = 20000;
    double rel_decrease_tol = 1e-9;
    int window = 10;
};

struct NormBallDesign {
    DigitalPrecoder precoder;
    double objective = 0.0;
    int iterations = 0;
};

/// Minimizes h(f) subject to W f = c with accelerated projected gradient and
/// backtracking, started from the better of the minimum-norm feasible point
/// and a reweighted quadratic solve.  Throws RankError or ConvergenceError.
NormBallDesign design_robust_norm_ball(const RobustProblemNormBall& prob, const NormBallOptions& opts = {});

/// h(f) + noise floor.
double worst_case_mse_bound(const DigitalPrecoder& f, const RobustProblemNormBall& prob);

}  // namespace hbf
