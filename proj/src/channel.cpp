#include "hbf/channel.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "hbf/error.hpp"

namespace hbf {

CVector array_response(const ArrayGeometry& geom, double angle)
{
    const int n = geom.n_elements;
    const double phase = 2.0 * std::numbers::pi * geom.spacing_over_wavelength * std::cos(angle);
    const double amp = 1.0 / std::sqrt(double(n));
    CVector a(n);
    for (int i = 0; i < n; ++i) a(i) = std::polar(amp, -phase * i);
    return a;
}

CMatrix array_response_matrix(const ArrayGeometry& geom, const RVector& angles)
{
    CMatrix m(geom.n_elements, angles.size());
    for (Eigen::Index k = 0; k < angles.size(); ++k) m.col(k) = array_response(geom, angles(k));
    return m;
}

ChannelRealization build_channel(std::vector<CVector> gains, RVector aoa, std::vector<RVector> aod,
                                 const ArrayGeometry& fc_array, const ArrayGeometry& node_array)
{
    if (gains.size() != aod.size()) throw DimensionError("build_channel: gains/aod node count mismatch");
    const Eigen::Index n_cl = aoa.size();
    ChannelRealization c;
    c.a_fc = array_response_matrix(fc_array, aoa);
    const double scale =
        std::sqrt(double(fc_array.n_elements) * node_array.n_elements / static_cast<double>(n_cl));
    for (std::size_t m = 0; m < gains.size(); ++m) {
        if (gains[m].size() != n_cl || aod[m].size() != n_cl) {
            throw DimensionError("build_channel: per-node cluster count mismatch");
        }
        CMatrix a_s = array_response_matrix(node_array, aod[m]);
        c.h.push_back(scale * c.a_fc * gains[m].asDiagonal() * a_s.adjoint());
        c.a_s.push_back(std::move(a_s));
    }
    c.gains = std::move(gains);
    c.aoa = std::move(aoa);
    c.aod = std::move(aod);
    return c;
}

ChannelRealization sample_channel(const ScenarioConfig& cfg, SeededRng& rng)
{
    if (cfg.n_cl < 1) throw ConfigError("sample_channel: n_cl must be >= 1");
    const double pi = std::numbers::pi;
    RVector aoa(cfg.n_cl);
    for (int k = 0; k < cfg.n_cl; ++k) aoa(k) = rng.uniform(0.0, pi);
    std::vector<CVector> gains;
    std::vector<RVector> aod;
    for (int m = 0; m < cfg.m_nodes; ++m) {
        RVector theta(cfg.n_cl);
        for (int k = 0; k < cfg.n_cl; ++k) theta(k) = rng.uniform(0.0, pi);
        aod.push_back(std::move(theta));
        gains.push_back(rng.complex_normal_vector(cfg.n_cl));
    }
    return build_channel(std::move(gains), std::move(aoa), std::move(aod),
                         {cfg.n_r, cfg.spacing_over_wavelength}, {cfg.n_t, cfg.spacing_over_wavelength});
}

CMatrix correlation_matrix(int n, double coeff, double variance)
{
    CMatrix r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(i, j) = variance * std::pow(coeff, std::abs(i - j));
    return r;
}

StochasticErrorSampler::StochasticErrorSampler(const StochasticUncertainty& u, int n_r, int n_t)
    : r_fc_sqrt_(hermitian_sqrt(u.receive_correlation(n_r)))
{
    for (std::size_t m = 0; m < u.beta.size(); ++m) {
        r_s_sqrt_t_.push_back(hermitian_sqrt(u.transmit_correlation(m, n_t)).transpose());
    }
}

CMatrix StochasticErrorSampler::sample(std::size_t node, SeededRng& rng) const
{
    const CMatrix& rt = r_s_sqrt_t_.at(node);
    const CMatrix s = rng.complex_normal_matrix(r_fc_sqrt_.rows(), rt.rows());
    return r_fc_sqrt_ * s * rt;
}

CMatrix apply_stochastic_error(const CMatrix& h_hat, const StochasticUncertainty& u, std::size_t node,
                               SeededRng& rng)
{
    if (u.sigma_h_sq == 0.0) return h_hat;
    const CMatrix r_fc_sqrt = hermitian_sqrt(u.receive_correlation(int(h_hat.rows())));
    const CMatrix r_s_sqrt_t = hermitian_sqrt(u.transmit_correlation(node, int(h_hat.cols()))).transpose();
    const CMatrix s = rng.complex_normal_matrix(h_hat.rows(), h_hat.cols());
    return h_hat + r_fc_sqrt * s * r_s_sqrt_t;
}

CMatrix sample_norm_ball_error(int nr, int nt, const NormBallUncertainty& u, SeededRng& rng)
{
    if (u.epsilon_h < 0.0) throw DimensionError("sample_norm_ball_error: negative radius");
    if (u.epsilon_h == 0.0) return CMatrix::Zero(nr, nt);
    CMatrix g = rng.complex_normal_matrix(nr, nt);
    double radius = u.epsilon_h;
    if (u.sampling_mode == NormBallSampling::uniform_ball) {
        radius *= std::pow(rng.uniform(), 1.0 / (2.0 * nr * nt));
    }
    return g * (radius / g.norm());
}

void write_channel_csv(std::ostream& os, const ChannelRealization& chan)
{
    os << "node,row,col,re,im\n";
    char buf[96];
    for (std::size_t m = 0; m < chan.h.size(); ++m) {
        const CMatrix& h = chan.h[m];
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g", h(i, j).real(), h(i, j).imag());
                os << m << ',' << i << ',' << j << ',' << buf << '\n';
            }
        }
    }
}

}  // namespace hbf
