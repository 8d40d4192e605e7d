#pragma once

// Random problem instances built through the public API.

#include <cstdint>
#include <vector>

#include "hbf/channel.hpp"
#include "hbf/design.hpp"
#include "hbf/network.hpp"
#include "hbf/scenario.hpp"

namespace fixture {

struct Instance {
    hbf::ScenarioConfig cfg;
    hbf::ChannelRealization chan;
    std::vector<hbf::NodeModel> nodes;
    hbf::PriorModel prior;
    hbf::FcModel fc;
    hbf::CMatrix w_rf;
    hbf::DesignProblem prob;
};

inline Instance make_instance(const hbf::ScenarioConfig& cfg, std::uint64_t seed)
{
    Instance in;
    in.cfg = cfg;
    hbf::SeededRng chan_rng = hbf::SeededRng::derive(seed, {1});
    hbf::SeededRng node_rng = hbf::SeededRng::derive(seed, {2});
    in.chan = hbf::sample_channel(cfg, chan_rng);
    in.nodes = hbf::sample_nodes(cfg, node_rng);
    in.prior = hbf::default_prior(cfg);
    in.fc = hbf::make_fc(cfg);
    in.w_rf = hbf::select_rf_combiner(in.chan, cfg.n_rf_fc);
    in.prob = hbf::assemble_problem(in.chan, in.nodes, in.prior, in.fc, in.w_rf);
    return in;
}

// A small but non-trivial network: 3 nodes, p = 2.
inline hbf::ScenarioConfig small_config()
{
    hbf::ScenarioConfig c;
    c.m_nodes = 3;
    c.n_t = 4;
    c.n_r = 6;
    c.p = 2;
    c.q = 3;
    c.n_cl = 5;
    c.n_rf_node = 2;
    c.n_rf_fc = 2;
    return c;
}

}  // namespace fixture
