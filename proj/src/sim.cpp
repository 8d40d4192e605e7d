#include "hbf/sim.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "hbf/channel.hpp"
#include "hbf/design.hpp"
#include "hbf/error.hpp"
#include "hbf/network.hpp"
#include "hbf/robust.hpp"
#include "hbf/somp.hpp"

namespace hbf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct KindName {
    DesignKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {DesignKind::zf, "zf"},
    {DesignKind::total_power, "total_power"},
    {DesignKind::per_node, "per_node"},
    {DesignKind::zf_hybrid, "zf_hybrid"},
    {DesignKind::total_hybrid, "total_hybrid"},
    {DesignKind::per_node_hybrid, "per_node_hybrid"},
    {DesignKind::robust_stochastic, "robust_stochastic"},
    {DesignKind::robust_norm_ball, "robust_norm_ball"},
    {DesignKind::agnostic, "agnostic"},
};

bool is_hybrid(DesignKind k)
{
    return k == DesignKind::zf_hybrid || k == DesignKind::total_hybrid || k == DesignKind::per_node_hybrid;
}

double pairwise_sum(const double* x, std::size_t n)
{
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double pairwise_sum(const std::vector<double>& x)
{
    return pairwise_sum(x.data(), x.size());
}

// Fills out.bound before designing so that failed trials still report it.
void trial_impl(const ScenarioConfig& cfg, DesignKind kind, SeededRng& rng, TrialResult& out)
{
    SeededRng chan_rng(splitmix64(rng.engine()()));
    SeededRng node_rng(splitmix64(rng.engine()()));
    SeededRng err_rng(splitmix64(rng.engine()()));
    SeededRng sig_rng(splitmix64(rng.engine()()));

    const ChannelRealization chan = sample_channel(cfg, chan_rng);
    const std::vector<NodeModel> nodes = sample_nodes(cfg, node_rng);
    const PriorModel prior = default_prior(cfg);
    const FcModel fc = make_fc(cfg);
    const CMatrix w_rf = select_rf_combiner(chan, cfg.n_rf_fc);
    try {
        out.bound = centralized_mmse_bound(nodes, prior);
    } catch (const SingularMatrixError&) {
        out.bound = kNaN;
    }

    const std::size_t m_nodes = nodes.size();
    const StochasticUncertainty stoch{cfg.sigma_h_sq, cfg.alpha_fc, std::vector<double>(m_nodes, cfg.beta)};
    const NormBallUncertainty ball{cfg.eps_h, cfg.norm_ball_sampling};

    // Channel the design sees and channel the signal goes through.
    const std::vector<CMatrix>& h_design = chan.h;
    std::vector<CMatrix> h_true = chan.h;
    if (uses_imperfect_csi(kind)) {
        UncertaintyModel model = cfg.uncertainty;
        if (kind == DesignKind::robust_stochastic) model = UncertaintyModel::stochastic;
        if (kind == DesignKind::robust_norm_ball) model = UncertaintyModel::norm_ball;
        if (model == UncertaintyModel::stochastic) {
            if (cfg.sigma_h_sq > 0.0) {
                const StochasticErrorSampler sampler(stoch, cfg.n_r, cfg.n_t);
                for (std::size_t m = 0; m < m_nodes; ++m) h_true[m] += sampler.sample(m, err_rng);
            }
        } else {
            for (std::size_t m = 0; m < m_nodes; ++m) {
                h_true[m] += sample_norm_ball_error(cfg.n_r, cfg.n_t, ball, err_rng);
            }
        }
    }

    DigitalPrecoder digital;
    switch (kind) {
    case DesignKind::robust_stochastic:
        digital = design_robust_stochastic(assemble_stochastic(h_design, nodes, prior, fc, w_rf, stoch));
        break;
    case DesignKind::robust_norm_ball: {
        auto d = design_robust_norm_ball(assemble_norm_ball(h_design, nodes, prior, fc, w_rf, cfg.eps_h));
        out.solver_iterations = d.iterations;
        digital = std::move(d.precoder);
        break;
    }
    default: {
        const DesignProblem prob = assemble_problem(h_design, nodes, prior, fc, w_rf);
        if (kind == DesignKind::total_power || kind == DesignKind::total_hybrid) {
            digital = design_total_power(prob, cfg.total_power_budget()).precoder;
        } else if (kind == DesignKind::per_node || kind == DesignKind::per_node_hybrid) {
            std::vector<double> rhos;
            for (const auto& n : nodes) rhos.push_back(n.rho);
            auto d = design_per_node_power(prob, rhos);
            out.solver_iterations = d.iterations;
            digital = std::move(d.precoder);
        } else {
            digital = design_zf(prob);
        }
    }
    }

    std::vector<CMatrix> per_node =
        is_hybrid(kind) ? design_hybrid(digital, chan.a_s, cfg.n_rf_node).effective() : digital.per_node;

    const auto p = w_rf.cols();
    out.constraint_residual =
        (end_to_end_map(h_design, w_rf, per_node, nodes) - CMatrix::Identity(p, p)).norm() / std::sqrt(double(p));
    out.conditional_mse = conditional_mse(h_true, w_rf, per_node, nodes, prior, fc);

    const CVector theta = sample_parameter(prior, sig_rng);
    CVector y = CVector::Zero(cfg.n_r);
    for (std::size_t m = 0; m < m_nodes; ++m) {
        y.noalias() += h_true[m] * (per_node[m] * generate_observation(nodes[m], theta, sig_rng));
    }
    y.noalias() += hermitian_sqrt(fc.r_u) * sig_rng.complex_normal_vector(cfg.n_r);
    const CVector theta_hat = w_rf.adjoint() * y;
    out.sq_error = (theta_hat - theta).squaredNorm();
}

}  // namespace

std::string to_string(DesignKind k)
{
    for (const auto& kn : kKindNames)
        if (kn.kind == k) return kn.name;
    return "unknown";
}

DesignKind parse_design_kind(std::string_view name)
{
    for (const auto& kn : kKindNames)
        if (name == kn.name) return kn.kind;
    throw ConfigError("unknown design '" + std::string(name) + "'");
}

bool uses_imperfect_csi(DesignKind k)
{
    return k == DesignKind::robust_stochastic || k == DesignKind::robust_norm_ball || k == DesignKind::agnostic;
}

TrialResult run_trial(const ScenarioConfig& cfg, DesignKind kind, SeededRng& rng)
{
    TrialResult out;
    trial_impl(cfg, kind, rng, out);
    return out;
}

SeededRng trial_stream(std::uint64_t master_seed, std::uint64_t value_index, std::uint64_t trial)
{
    return SeededRng::derive(master_seed, {value_index, trial});
}

ChannelRealization trial_channel(const ScenarioConfig& cfg, std::uint64_t value_index, std::uint64_t trial)
{
    SeededRng rng = trial_stream(cfg.master_seed, value_index, trial);
    SeededRng chan_rng(splitmix64(rng.engine()()));
    return sample_channel(cfg, chan_rng);
}

MseEstimate estimate_mse(const ScenarioConfig& cfg, DesignKind kind, const EstimateOptions& opts)
{
    if (cfg.trials < 2) throw ConfigError("estimate_mse: trials must be >= 2");
    const auto n = static_cast<std::size_t>(cfg.trials);
    std::vector<double> err(n, kNaN);
    std::vector<double> bound(n, kNaN);
    std::vector<std::string> failure(n);

    auto work = [&](std::size_t i) {
        SeededRng rng = trial_stream(cfg.master_seed, opts.value_index, i);
        TrialResult r;
        try {
            trial_impl(cfg, kind, rng, r);
            err[i] = r.sq_error;
        } catch (const Error& e) {
            failure[i] = e.what();
        }
        bound[i] = r.bound;
    };

    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) work(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    MseEstimate out;
    std::vector<double> ok;
    ok.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (failure[i].empty()) {
            ok.push_back(err[i]);
        } else {
            if (out.failures == 0) out.first_failure = failure[i];
            ++out.failures;
        }
    }
    out.bound = pairwise_sum(bound) / double(n);
    out.trials_used = static_cast<int>(ok.size());
    if (ok.empty()) throw Error("estimate_mse: all " + std::to_string(n) + " trials failed; first: " + out.first_failure);
    out.mean = pairwise_sum(ok) / double(ok.size());
    if (ok.size() >= 2) {
        std::vector<double> dev(ok.size());
        for (std::size_t i = 0; i < ok.size(); ++i) dev[i] = (ok[i] - out.mean) * (ok[i] - out.mean);
        const double var = pairwise_sum(dev) / double(ok.size() - 1);
        out.stderr_ = std::sqrt(var / double(ok.size()));
    }
    return out;
}

std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::snr_fc: return "snr_fc";
    case SweepAxis::m_nodes: return "m_nodes";
    case SweepAxis::sigma_h_sq: return "sigma_h_sq";
    case SweepAxis::eps_h: return "eps_h";
    }
    return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view name)
{
    for (auto a : {SweepAxis::snr_fc, SweepAxis::m_nodes, SweepAxis::sigma_h_sq, SweepAxis::eps_h})
        if (name == to_string(a)) return a;
    throw ConfigError("unknown sweep axis '" + std::string(name) + "'");
}

ScenarioConfig apply_axis(const ScenarioConfig& cfg, SweepAxis axis, double value)
{
    ScenarioConfig out = cfg;
    switch (axis) {
    case SweepAxis::snr_fc: out.snr_fc_db = value; break;
    case SweepAxis::sigma_h_sq: out.sigma_h_sq = value; break;
    case SweepAxis::eps_h: out.eps_h = value; break;
    case SweepAxis::m_nodes:
        if (value != std::floor(value) || value < 1.0 || value > 1e6) {
            throw ConfigError("m_nodes sweep values must be positive integers");
        }
        out.m_nodes = static_cast<int>(value);
        break;
    }
    return out;
}

int SweepResult::total_failures() const
{
    int s = 0;
    for (const auto& r : rows) s += r.failures;
    return s;
}

SweepResult sweep(const ScenarioConfig& cfg, SweepAxis axis, std::span<const double> values,
                  std::span<const DesignKind> designs, unsigned threads)
{
    if (values.empty()) throw ConfigError("sweep: no values");
    if (designs.empty()) throw ConfigError("sweep: no designs");
    SweepResult res;
    res.axis = axis;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        const ScenarioConfig point = apply_axis(cfg, axis, values[vi]);
        point.validate();
        for (DesignKind d : designs) {
            SweepRow row;
            row.sweep_value = values[vi];
            row.design = d;
            try {
                const auto est = estimate_mse(point, d, {vi, threads});
                row.mse_mean = est.mean;
                row.mse_stderr = est.stderr_;
                row.bound = est.bound;
                row.trials_used = est.trials_used;
                row.failures = est.failures;
            } catch (const ConfigError&) {
                throw;
            } catch (const Error&) {
                row.mse_mean = row.mse_stderr = row.bound = kNaN;
                row.trials_used = 0;
                row.failures = point.trials;
            }
            res.rows.push_back(row);
        }
    }
    return res;
}

}  // namespace hbf
