// hbfsim: runs a parameter sweep described by a config file and writes the
// results as CSV.
//
// Exit status: 0 success, 1 invalid config or arguments, 2 runtime failure
// (including any failed trial; the CSV is still written).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hbf/channel.hpp"
#include "hbf/error.hpp"
#include "hbf/experiment.hpp"
#include "hbf/sim.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Monte-Carlo MSE sweeps for hybrid precoder designs"};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<std::string> output;
    std::optional<std::string> dump_channel;
    unsigned threads = 0;
    app.add_option("-c,--config", config_path, "experiment config file")->required();
    app.add_option("-s,--seed", seed, "override the master seed");
    app.add_option("-t,--trials", trials, "override the trial count");
    app.add_option("-o,--output", output, "CSV output path (overrides the config)");
    app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");
    app.add_option("--dump-channel", dump_channel,
                   "write the channel of the first trial at the first sweep point as CSV and exit");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    hbf::ExperimentSpec spec;
    try {
        spec = hbf::load_config(config_path);
        if (seed) spec.scenario.master_seed = *seed;
        if (trials) spec.scenario.trials = *trials;
        if (output) spec.output = *output;
        hbf::validate(spec);
    } catch (const hbf::ConfigError& e) {
        std::cerr << "hbfsim: " << config_path << ": " << e.what() << '\n';
        return 1;
    }

    try {
        if (dump_channel) {
            const auto cfg = hbf::apply_axis(spec.scenario, spec.axis, spec.values.front());
            std::ofstream out(*dump_channel, std::ios::binary);
            if (!out) throw hbf::Error("cannot open '" + *dump_channel + "'");
            hbf::write_channel_csv(out, hbf::trial_channel(cfg, 0, 0));
            return 0;
        }
        const int rc = hbf::run_experiment(spec, std::cout, threads);
        if (rc != 0) std::cerr << "hbfsim: some trials failed; see the failures column\n";
        return rc;
    } catch (const hbf::ConfigError& e) {
        std::cerr << "hbfsim: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "hbfsim: " << e.what() << '\n';
        return 2;
    }
}
