#pragma once

// Sensor observation model, parameter prior and the centralized MMSE
// benchmark.

#include <span>
#include <vector>

#include "hbf/linalg.hpp"
#include "hbf/rng.hpp"
#include "hbf/scenario.hpp"

namespace hbf {

struct NodeModel {
    CMatrix a_obs;    // q x p observation matrix
    CMatrix r_noise;  // q x q observation noise covariance
    double rho = 1.0; // transmit power budget
};

struct PriorModel {
    CMatrix r_theta;  // p x p
};

struct FcModel {
    CMatrix r_u;      // n_r x n_r receiver noise covariance
    int n_rf_fc = 0;
};

/// Nodes with A_m i.i.d. CN(0,1), R_m = sigma_m^2 I and rho_m = rho_node.
std::vector<NodeModel> sample_nodes(const ScenarioConfig& cfg, SeededRng& rng);

/// R_theta = I_p.
PriorModel default_prior(const ScenarioConfig& cfg);

/// R_u = sigma_u^2 I; validates n_rf_fc == p.
FcModel make_fc(const ScenarioConfig& cfg);

/// theta = R_theta^{1/2} g, g ~ CN(0, I).
CVector sample_parameter(const PriorModel& prior, SeededRng& rng);

/// x = A theta + v, v ~ CN(0, R).
CVector generate_observation(const NodeModel& node, const CVector& theta, SeededRng& rng);

/// Tr[(R_theta^-1 + sum_m A_m^H R_m^-1 A_m)^-1].  Throws SingularMatrixError
/// when R_theta or any R_m is not invertible, DimensionError when the nodes
/// disagree on p.
double centralized_mmse_bound(std::span<const NodeModel> nodes, const PriorModel& prior);

}  // namespace hbf
