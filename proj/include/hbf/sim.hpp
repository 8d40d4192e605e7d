#pragma once

// Seeded Monte-Carlo evaluation of the designs through the full receive
// chain y = sum_m H_m F_m (A_m theta + v_m) + u, theta_hat = W_RF^H y.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbf/channel.hpp"
#include "hbf/rng.hpp"
#include "hbf/scenario.hpp"

namespace hbf {

enum class DesignKind {
    zf,
    total_power,
    per_node,
    zf_hybrid,
    total_hybrid,
    per_node_hybrid,
    robust_stochastic,
    robust_norm_ball,
    agnostic,
};

std::string to_string(DesignKind k);
/// Throws ConfigError for unknown names.
DesignKind parse_design_kind(std::string_view name);
/// True for kinds whose precoder is designed from an estimated channel.
bool uses_imperfect_csi(DesignKind k);

struct TrialResult {
    double sq_error = 0.0;         // ||theta_hat - theta||^2 for one draw
    double conditional_mse = 0.0;  // expected error given this trial's channels and precoder
    double bound = 0.0;            // centralized MMSE bound for this trial's nodes
    double constraint_residual = 0.0;
    int solver_iterations = 0;
};

/// One trial.  Four substreams are split off `rng` in a fixed order (channel,
/// nodes, CSI error, signal), so every design kind sees the same channel,
/// nodes and error for a given stream.  For imperfect-CSI kinds the sampled
/// channel is the estimate; the applied channel adds the configured error
/// (stochastic for robust_stochastic, norm-ball for robust_norm_ball, and
/// cfg.uncertainty for agnostic).  Design errors propagate as hbf::Error.
TrialResult run_trial(const ScenarioConfig& cfg, DesignKind kind, SeededRng& rng);

/// Stream used for trial `trial` of sweep point `value_index`.
SeededRng trial_stream(std::uint64_t master_seed, std::uint64_t value_index, std::uint64_t trial);

/// The (estimated) channel that run_trial() draws for that trial.
ChannelRealization trial_channel(const ScenarioConfig& cfg, std::uint64_t value_index, std::uint64_t trial);

struct MseEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    double bound = 0.0;  // mean centralized bound over all trials, NaN if any was singular
    int trials_used = 0;
    int failures = 0;
    std::string first_failure;
};

struct EstimateOptions {
    std::uint64_t value_index = 0;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Mean and standard error of sq_error over cfg.trials trials.  Failed
/// trials are counted and skipped; throws Error when every trial fails.
MseEstimate estimate_mse(const ScenarioConfig& cfg, DesignKind kind, const EstimateOptions& opts = {});

enum class SweepAxis { snr_fc, m_nodes, sigma_h_sq, eps_h };

std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view name);

/// Copy of cfg with the axis parameter set to value.  Throws ConfigError for
/// a non-integral m_nodes value.
ScenarioConfig apply_axis(const ScenarioConfig& cfg, SweepAxis axis, double value);

struct SweepRow {
    double sweep_value = 0.0;
    DesignKind design = DesignKind::zf;
    double mse_mean = 0.0;
    double mse_stderr = 0.0;
    double bound = 0.0;
    int trials_used = 0;
    int failures = 0;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::snr_fc;
    std::vector<SweepRow> rows;  // value-major, then design order

    int total_failures() const;
};

/// One row per (value, design).  All designs at a sweep point share trial
/// streams.  A cell whose trials all fail is recorded with trials_used = 0
/// and NaN statistics.
SweepResult sweep(const ScenarioConfig& cfg, SweepAxis axis, std::span<const double> values,
                  std::span<const DesignKind> designs, unsigned threads = 0);

}  // namespace hbf
