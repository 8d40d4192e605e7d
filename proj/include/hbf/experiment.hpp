#pragma once

// Experiment files and CSV output.
//
// Config format (version 1): one `key = value` per line, `#` starts a
// comment, blank lines ignored.  Lists are comma separated.  Keys:
//
//   format_version      1 (optional)
//   sweep_axis          snr_fc | m_nodes | sigma_h_sq | eps_h      (required)
//   sweep_values        strictly monotone list of numbers           (required)
//   designs             list of design names                        (required)
//   output              CSV path (optional; stdout when absent)
//   m_nodes n_t n_r p q n_cl n_rf_node n_rf_fc trials     integers
//   snr_ob_db snr_fc_db beta alpha_fc sigma_h_sq eps_h
//   spacing_over_wavelength rho_t rho_node                numbers
//   uncertainty         stochastic | norm_ball
//   norm_ball_sampling  surface | uniform_ball
//   seed                unsigned 64-bit master seed
//
// Unknown or repeated keys are errors.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hbf/error.hpp"
#include "hbf/scenario.hpp"
#include "hbf/sim.hpp"

namespace hbf {

inline constexpr int kConfigFormatVersion = 1;

/// Syntax or value error, message prefixed with "line N: key 'k': ".
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct ExperimentSpec {
    ScenarioConfig scenario;
    SweepAxis axis = SweepAxis::snr_fc;
    std::vector<double> values;
    std::vector<DesignKind> designs;
    std::optional<std::string> output;

    bool operator==(const ExperimentSpec&) const = default;
};

/// Parses and validates.  Throws ParseError or ConfigError.
ExperimentSpec parse_config(std::string_view text);

/// Reads the file and calls parse_config().
ExperimentSpec load_config(const std::string& path);

/// Writes every key; doubles use 17 significant digits so that
/// parse_config(serialize(s)) == s.
std::string serialize(const ExperimentSpec& spec);

/// Throws ConfigError when the sweep or any sweep point is invalid.
void validate(const ExperimentSpec& spec);

/// 9 significant digits; scientific notation for 0 < |x| < 1e-3.
std::string format_number(double x);

inline const char* kCsvHeader = "sweep_axis,sweep_value,design,mse_mean,mse_stderr,bound,trials_used,failures";

void write_csv(std::ostream& os, const SweepResult& result);

/// Runs the sweep and writes the CSV (to spec.output, or `fallback` when
/// unset).  Returns 0 when no trial failed, 2 otherwise.
int run_experiment(const ExperimentSpec& spec, std::ostream& fallback, unsigned threads = 0);

}  // namespace hbf
