#include "hbf/scenario.hpp"

#include <cmath>

#include "hbf/error.hpp"

namespace hbf {

double ScenarioConfig::observation_noise_var() const
{
    return std::pow(10.0, -snr_ob_db / 10.0);
}

double ScenarioConfig::fc_noise_var() const
{
    return std::pow(10.0, -snr_fc_db / 10.0);
}

void ScenarioConfig::validate() const
{
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(m_nodes >= 1 && n_t >= 1 && n_r >= 1 && p >= 1 && q >= 1 && n_cl >= 1 &&
                n_rf_node >= 1 && n_rf_fc >= 1,
            "all counts must be >= 1");
    require(trials >= 2, "trials must be >= 2 for a standard error");
    require(n_rf_fc == p,
            "n_rf_fc must equal p: the zero-forcing estimation constraint uses exactly p FC RF chains");
    require(n_rf_fc <= n_cl, "n_rf_fc must not exceed n_cl (combiner columns are cluster steering vectors)");
    require(n_rf_fc <= n_r, "n_rf_fc must not exceed n_r");
    require(n_rf_node <= n_cl, "n_rf_node must not exceed n_cl");
    require(n_rf_node <= n_t, "n_rf_node must not exceed n_t");
    require(static_cast<long>(p) * p <= static_cast<long>(m_nodes) * q * n_t,
            "p^2 must not exceed m_nodes*q*n_t, otherwise the zero-forcing constraint is rank deficient");
    require(!std::isnan(snr_ob_db) && !std::isnan(snr_fc_db), "SNR values must be numbers");
    require(beta >= 0.0 && beta < 1.0, "beta must lie in [0, 1)");
    require(alpha_fc >= 0.0 && alpha_fc < 1.0, "alpha_fc must lie in [0, 1)");
    require(sigma_h_sq >= 0.0 && std::isfinite(sigma_h_sq), "sigma_h_sq must be finite and >= 0");
    require(eps_h >= 0.0 && std::isfinite(eps_h), "eps_h must be finite and >= 0");
    require(!rho_t || (*rho_t > 0.0 && std::isfinite(*rho_t)), "rho_t must be > 0");
    require(!rho_node || (*rho_node > 0.0 && std::isfinite(*rho_node)), "rho_node must be > 0");
    require(spacing_over_wavelength > 0.0, "spacing_over_wavelength must be > 0");
}

std::string to_string(UncertaintyModel m)
{
    return m == UncertaintyModel::stochastic ? "stochastic" : "norm_ball";
}

std::string to_string(NormBallSampling s)
{
    return s == NormBallSampling::surface ? "surface" : "uniform_ball";
}

}  // namespace hbf
