#pragma once

// Clustered narrowband mmWave MIMO channel between each node and the fusion
// center, plus the two CSI-error models.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "hbf/linalg.hpp"
#include "hbf/rng.hpp"
#include "hbf/scenario.hpp"

namespace hbf {

struct ArrayGeometry {
    int n_elements = 1;
    double spacing_over_wavelength = 0.5;
};

/// ULA steering vector: a_i = exp(-j * i * 2*pi*(d/lambda)*cos(angle)) / sqrt(N).
CVector array_response(const ArrayGeometry& geom, double angle);

/// Columns are array_response() for each angle.
CMatrix array_response_matrix(const ArrayGeometry& geom, const RVector& angles);

struct ChannelRealization {
    std::vector<CVector> gains;  // per node, one complex gain per cluster
    RVector aoa;                 // per cluster, shared by all nodes
    std::vector<RVector> aod;    // per node, per cluster
    CMatrix a_fc;                // n_r x n_cl
    std::vector<CMatrix> a_s;    // per node, n_t x n_cl
    std::vector<CMatrix> h;      // per node, n_r x n_t

    std::size_t nodes() const { return h.size(); }
    Eigen::Index n_clusters() const { return aoa.size(); }
};

/// Assembles H_m = sqrt(n_t*n_r/n_cl) * A_fc * diag(gains_m) * A_s,m^H from
/// explicit cluster parameters.
ChannelRealization build_channel(std::vector<CVector> gains, RVector aoa, std::vector<RVector> aod,
                                 const ArrayGeometry& fc_array, const ArrayGeometry& node_array);

/// Draws gains i.i.d. CN(0,1), AoA and AoD i.i.d. uniform on [0, pi).
ChannelRealization sample_channel(const ScenarioConfig& cfg, SeededRng& rng);

/// Exponential correlation: entry (i,j) = variance * coeff^|i-j|.
CMatrix correlation_matrix(int n, double coeff, double variance);

struct StochasticUncertainty {
    double sigma_h_sq = 0.0;
    double alpha_fc = 0.0;       // receive correlation coefficient
    std::vector<double> beta;    // transmit correlation coefficient per node

    CMatrix receive_correlation(int n_r) const { return correlation_matrix(n_r, alpha_fc, sigma_h_sq); }
    CMatrix transmit_correlation(std::size_t node, int n_t) const
    {
        return correlation_matrix(n_t, beta.at(node), 1.0);
    }
};

/// Precomputes the square roots so repeated draws only cost two products.
class StochasticErrorSampler {
public:
    StochasticErrorSampler(const StochasticUncertainty& u, int n_r, int n_t);

    /// Delta H = R_FC^{1/2} S R_s^{T/2}, S i.i.d. CN(0,1).
    CMatrix sample(std::size_t node, SeededRng& rng) const;

private:
    CMatrix r_fc_sqrt_;
    std::vector<CMatrix> r_s_sqrt_t_;
};

/// Returns h_hat + Delta H for the given node.
CMatrix apply_stochastic_error(const CMatrix& h_hat, const StochasticUncertainty& u, std::size_t node,
                               SeededRng& rng);

struct NormBallUncertainty {
    double epsilon_h = 0.0;
    NormBallSampling sampling_mode = NormBallSampling::surface;
};

/// Error matrix with ||Delta H||_F = eps (surface) or uniform in the ball.
CMatrix sample_norm_ball_error(int nr, int nt, const NormBallUncertainty& u, SeededRng& rng);

/// Debug dump: one CSV row per channel entry, columns node,row,col,re,im.
void write_channel_csv(std::ostream& os, const ChannelRealization& chan);

}  // namespace hbf
