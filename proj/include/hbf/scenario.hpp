#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace hbf {

enum class UncertaintyModel { stochastic, norm_ball };
enum class NormBallSampling { surface, uniform_ball };

/// Every knob of a simulated network.  Defaults reproduce the reference
/// setup: 24 nodes with 5 antennas and 3 RF chains each, a 16-antenna fusion
/// center with 4 RF chains, 10 clusters, p = 4 parameters, q = 5
/// observations per node.
struct ScenarioConfig {
    int m_nodes = 24;
    int n_t = 5;
    int n_r = 16;
    int p = 4;
    int q = 5;
    int n_cl = 10;
    int n_rf_node = 3;
    int n_rf_fc = 4;

    double snr_ob_db = 10.0;
    double snr_fc_db = 10.0;

    double beta = 0.6;      // transmit correlation at every node
    double alpha_fc = 0.6;  // receive correlation at the FC
    double sigma_h_sq = 0.0;
    double eps_h = 0.0;
    UncertaintyModel uncertainty = UncertaintyModel::stochastic;
    NormBallSampling norm_ball_sampling = NormBallSampling::surface;

    // Power budgets; unset means rho_t = m_nodes * q and rho_node = q.
    std::optional<double> rho_t;
    std::optional<double> rho_node;

    double spacing_over_wavelength = 0.5;

    int trials = 2000;
    std::uint64_t master_seed = 1;

    double total_power_budget() const { return rho_t.value_or(double(m_nodes) * q); }
    double node_power_budget() const { return rho_node.value_or(double(q)); }

    /// sigma_m^2 = 10^(-SNR_OB/10); +inf dB gives exactly zero.
    double observation_noise_var() const;
    /// sigma_u^2 = 10^(-SNR_FC/10).
    double fc_noise_var() const;

    /// Throws ConfigError naming the violated invariant.
    void validate() const;

    bool operator==(const ScenarioConfig&) const = default;
};

std::string to_string(UncertaintyModel m);
std::string to_string(NormBallSampling s);

}  // namespace hbf
