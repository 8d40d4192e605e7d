#include "hbf/network.hpp"

#include "hbf/error.hpp"

namespace hbf {

namespace {

// Strict Hermitian PD solve (no ridge): the bound is meaningless for a
// singular covariance.
CMatrix pd_solve(const CMatrix& a, const CMatrix& b, const char* what)
{
    Eigen::LLT<CMatrix> llt(0.5 * (a + a.adjoint()));
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
        throw SingularMatrixError(std::string("centralized_mmse_bound: ") + what + " is not invertible");
    }
    return llt.solve(b);
}

}  // namespace

std::vector<NodeModel> sample_nodes(const ScenarioConfig& cfg, SeededRng& rng)
{
    const double var = cfg.observation_noise_var();
    std::vector<NodeModel> nodes;
    nodes.reserve(cfg.m_nodes);
    for (int m = 0; m < cfg.m_nodes; ++m) {
        NodeModel n;
        n.a_obs = rng.complex_normal_matrix(cfg.q, cfg.p);
        n.r_noise = var * CMatrix::Identity(cfg.q, cfg.q);
        n.rho = cfg.node_power_budget();
        nodes.push_back(std::move(n));
    }
    return nodes;
}

PriorModel default_prior(const ScenarioConfig& cfg)
{
    return {CMatrix::Identity(cfg.p, cfg.p)};
}

FcModel make_fc(const ScenarioConfig& cfg)
{
    if (cfg.n_rf_fc != cfg.p) throw ConfigError("make_fc: n_rf_fc must equal p");
    return {cfg.fc_noise_var() * CMatrix::Identity(cfg.n_r, cfg.n_r), cfg.n_rf_fc};
}

CVector sample_parameter(const PriorModel& prior, SeededRng& rng)
{
    return hermitian_sqrt(prior.r_theta) * rng.complex_normal_vector(prior.r_theta.rows());
}

CVector generate_observation(const NodeModel& node, const CVector& theta, SeededRng& rng)
{
    if (node.a_obs.cols() != theta.size()) throw DimensionError("generate_observation: theta size mismatch");
    return node.a_obs * theta + hermitian_sqrt(node.r_noise) * rng.complex_normal_vector(node.r_noise.rows());
}

double centralized_mmse_bound(std::span<const NodeModel> nodes, const PriorModel& prior)
{
    const auto p = prior.r_theta.rows();
    CMatrix info = pd_solve(prior.r_theta, CMatrix::Identity(p, p), "R_theta");
    for (const auto& n : nodes) {
        if (n.a_obs.cols() != p) throw DimensionError("centralized_mmse_bound: nodes disagree on p");
        info += n.a_obs.adjoint() * pd_solve(n.r_noise, n.a_obs, "R_m");
    }
    const CMatrix cov = pd_solve(info, CMatrix::Identity(p, p), "posterior information");
    return cov.diagonal().real().sum();
}

}  // namespace hbf
