#include "hbf/experiment.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace hbf {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s)
{
    std::vector<std::string_view> out;
    while (true) {
        const auto c = s.find(',');
        out.push_back(trim(s.substr(0, c)));
        if (c == std::string_view::npos) break;
        s.remove_prefix(c + 1);
    }
    return out;
}

double parse_double(std::string_view v)
{
    const std::string s(v);
    if (s.empty()) throw ConfigError("expected a number");
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw ConfigError("'" + s + "' is not a number");
    return x;
}

long long parse_int(std::string_view v)
{
    const std::string s(v);
    if (s.empty()) throw ConfigError("expected an integer");
    char* end = nullptr;
    errno = 0;
    const long long x = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw ConfigError("'" + s + "' is not an integer");
    return x;
}

int parse_count(std::string_view v)
{
    const long long x = parse_int(v);
    if (x < -2147483647LL || x > 2147483647LL) throw ConfigError("integer out of range");
    return static_cast<int>(x);
}

std::uint64_t parse_seed(std::string_view v)
{
    const std::string s(v);
    if (s.empty() || s[0] == '-') throw ConfigError("seed must be a non-negative integer");
    char* end = nullptr;
    errno = 0;
    const unsigned long long x = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) throw ConfigError("'" + s + "' is not a valid seed");
    return x;
}

std::string g17(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

using Setter = std::function<void(ExperimentSpec&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters()
{
    static const std::map<std::string, Setter, std::less<>> table = [] {
        std::map<std::string, Setter, std::less<>> t;
        auto count = [&](const char* key, int ScenarioConfig::*field) {
            t[key] = [field](ExperimentSpec& s, std::string_view v) { s.scenario.*field = parse_count(v); };
        };
        auto real = [&](const char* key, double ScenarioConfig::*field) {
            t[key] = [field](ExperimentSpec& s, std::string_view v) { s.scenario.*field = parse_double(v); };
        };
        count("m_nodes", &ScenarioConfig::m_nodes);
        count("n_t", &ScenarioConfig::n_t);
        count("n_r", &ScenarioConfig::n_r);
        count("p", &ScenarioConfig::p);
        count("q", &ScenarioConfig::q);
        count("n_cl", &ScenarioConfig::n_cl);
        count("n_rf_node", &ScenarioConfig::n_rf_node);
        count("n_rf_fc", &ScenarioConfig::n_rf_fc);
        count("trials", &ScenarioConfig::trials);
        real("snr_ob_db", &ScenarioConfig::snr_ob_db);
        real("snr_fc_db", &ScenarioConfig::snr_fc_db);
        real("beta", &ScenarioConfig::beta);
        real("alpha_fc", &ScenarioConfig::alpha_fc);
        real("sigma_h_sq", &ScenarioConfig::sigma_h_sq);
        real("eps_h", &ScenarioConfig::eps_h);
        real("spacing_over_wavelength", &ScenarioConfig::spacing_over_wavelength);
        t["rho_t"] = [](ExperimentSpec& s, std::string_view v) { s.scenario.rho_t = parse_double(v); };
        t["rho_node"] = [](ExperimentSpec& s, std::string_view v) { s.scenario.rho_node = parse_double(v); };
        t["seed"] = [](ExperimentSpec& s, std::string_view v) { s.scenario.master_seed = parse_seed(v); };
        t["uncertainty"] = [](ExperimentSpec& s, std::string_view v) {
            if (v == "stochastic") s.scenario.uncertainty = UncertaintyModel::stochastic;
            else if (v == "norm_ball") s.scenario.uncertainty = UncertaintyModel::norm_ball;
            else throw ConfigError("expected stochastic or norm_ball");
        };
        t["norm_ball_sampling"] = [](ExperimentSpec& s, std::string_view v) {
            if (v == "surface") s.scenario.norm_ball_sampling = NormBallSampling::surface;
            else if (v == "uniform_ball") s.scenario.norm_ball_sampling = NormBallSampling::uniform_ball;
            else throw ConfigError("expected surface or uniform_ball");
        };
        t["format_version"] = [](ExperimentSpec&, std::string_view v) {
            if (parse_int(v) != kConfigFormatVersion) {
                throw ConfigError("unsupported format version (expected " + std::to_string(kConfigFormatVersion) + ")");
            }
        };
        t["sweep_axis"] = [](ExperimentSpec& s, std::string_view v) { s.axis = parse_sweep_axis(v); };
        t["sweep_values"] = [](ExperimentSpec& s, std::string_view v) {
            s.values.clear();
            for (auto item : split_list(v)) s.values.push_back(parse_double(item));
        };
        t["designs"] = [](ExperimentSpec& s, std::string_view v) {
            s.designs.clear();
            for (auto item : split_list(v)) s.designs.push_back(parse_design_kind(item));
        };
        t["output"] = [](ExperimentSpec& s, std::string_view v) {
            if (v.empty()) throw ConfigError("output path is empty");
            s.output = std::string(v);
        };
        return t;
    }();
    return table;
}

}  // namespace

void validate(const ExperimentSpec& spec)
{
    spec.scenario.validate();
    if (spec.values.empty()) throw ConfigError("sweep_values must not be empty");
    if (spec.designs.empty()) throw ConfigError("designs must not be empty");
    for (double v : spec.values) {
        if (!std::isfinite(v) && spec.axis != SweepAxis::snr_fc) {
            throw ConfigError("sweep_values must be finite");
        }
    }
    if (spec.values.size() > 1) {
        const bool up = spec.values[1] > spec.values[0];
        for (std::size_t i = 1; i < spec.values.size(); ++i) {
            const bool ok = up ? spec.values[i] > spec.values[i - 1] : spec.values[i] < spec.values[i - 1];
            if (!ok) throw ConfigError("sweep_values must be strictly monotone");
        }
    }
    for (double v : spec.values) apply_axis(spec.scenario, spec.axis, v).validate();
}

ExperimentSpec parse_config(std::string_view text)
{
    ExperimentSpec spec;
    std::set<std::string, std::less<>> seen;
    int line_no = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(where + "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ParseError(where + "key '" + key + "': unknown key");
        if (!seen.insert(key).second) throw ParseError(where + "key '" + key + "': repeated key");
        try {
            it->second(spec, value);
        } catch (const ConfigError& e) {
            throw ParseError(where + "key '" + key + "': " + e.what());
        }
    }
    for (const char* req : {"sweep_axis", "sweep_values", "designs"}) {
        if (!seen.contains(req)) throw ParseError(std::string("missing required key '") + req + "'");
    }
    validate(spec);
    return spec;
}

ExperimentSpec load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize(const ExperimentSpec& spec)
{
    const auto& c = spec.scenario;
    std::ostringstream os;
    os << "format_version = " << kConfigFormatVersion << '\n';
    os << "sweep_axis = " << to_string(spec.axis) << '\n';
    os << "sweep_values = ";
    for (std::size_t i = 0; i < spec.values.size(); ++i) os << (i ? ", " : "") << g17(spec.values[i]);
    os << "\ndesigns = ";
    for (std::size_t i = 0; i < spec.designs.size(); ++i) os << (i ? ", " : "") << to_string(spec.designs[i]);
    os << '\n';
    if (spec.output) os << "output = " << *spec.output << '\n';
    os << "m_nodes = " << c.m_nodes << "\nn_t = " << c.n_t << "\nn_r = " << c.n_r << "\np = " << c.p
       << "\nq = " << c.q << "\nn_cl = " << c.n_cl << "\nn_rf_node = " << c.n_rf_node
       << "\nn_rf_fc = " << c.n_rf_fc << "\ntrials = " << c.trials << '\n';
    os << "snr_ob_db = " << g17(c.snr_ob_db) << "\nsnr_fc_db = " << g17(c.snr_fc_db) << "\nbeta = " << g17(c.beta)
       << "\nalpha_fc = " << g17(c.alpha_fc) << "\nsigma_h_sq = " << g17(c.sigma_h_sq)
       << "\neps_h = " << g17(c.eps_h) << "\nspacing_over_wavelength = " << g17(c.spacing_over_wavelength) << '\n';
    if (c.rho_t) os << "rho_t = " << g17(*c.rho_t) << '\n';
    if (c.rho_node) os << "rho_node = " << g17(*c.rho_node) << '\n';
    os << "uncertainty = " << to_string(c.uncertainty) << '\n';
    os << "norm_ball_sampling = " << to_string(c.norm_ball_sampling) << '\n';
    os << "seed = " << c.master_seed << '\n';
    return os.str();
}

std::string format_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    if (x != 0.0 && std::abs(x) < 1e-3) {
        std::snprintf(buf, sizeof buf, "%.8e", x);
    } else {
        std::snprintf(buf, sizeof buf, "%.9g", x);
    }
    return buf;
}

void write_csv(std::ostream& os, const SweepResult& result)
{
    os << kCsvHeader << '\n';
    const std::string axis = to_string(result.axis);
    for (const auto& r : result.rows) {
        os << axis << ',' << format_number(r.sweep_value) << ',' << to_string(r.design) << ','
           << format_number(r.mse_mean) << ',' << format_number(r.mse_stderr) << ',' << format_number(r.bound)
           << ',' << r.trials_used << ',' << r.failures << '\n';
    }
}

int run_experiment(const ExperimentSpec& spec, std::ostream& fallback, unsigned threads)
{
    validate(spec);
    const SweepResult result = sweep(spec.scenario, spec.axis, spec.values, spec.designs, threads);
    if (spec.output) {
        std::ofstream out(*spec.output, std::ios::binary);
        if (!out) throw Error("cannot open output file '" + *spec.output + "'");
        write_csv(out, result);
        if (!out) throw Error("failed writing '" + *spec.output + "'");
    } else {
        write_csv(fallback, result);
    }
    return result.total_failures() == 0 ? 0 : 2;
}

}  // namespace hbf
