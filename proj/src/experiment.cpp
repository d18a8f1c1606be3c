#include "qsync/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "qsync/errors.hpp"
#include "qsync/format.hpp"
#include "qsync/mems.hpp"
#include "qsync/parallel.hpp"

namespace qsync {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

template <typename Int>
Int parse_integer(const std::string& text, const std::string& key) {
    Int v{};
    const std::string t = trim(text);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return v;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    if (trim(text).empty()) return out;
    for (const auto& item : split(text, ',')) out.push_back(parse_integer<int>(item, key));
    return out;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (const auto& item : split(text, ',')) out.push_back(parse_real(item, key));
    return out;
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& items, Fmt fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += fmt(items[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    return join(v, [](int x) { return std::to_string(x); });
}

std::string join_reals(const std::vector<double>& v) { return join(v, format_exact); }

std::optional<std::size_t> sample_index(double t, double dt_sample) {
    const double r = t / dt_sample;
    const double idx = std::round(r);
    if (std::abs(idx - r) > 1e-9 * std::max(1.0, r)) return std::nullopt;
    return static_cast<std::size_t>(idx);
}

}  // namespace

double parse_real(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError(key + ": expected a number");
    auto fail = [&] { return ConfigError(key + ": cannot parse '" + text + "' as a number"); };
    double value = 1.0;
    char op = '*';
    std::size_t pos = 0;
    bool negate = false;
    if (t[0] == '-' || t[0] == '+') {
        negate = t[0] == '-';
        pos = 1;
    }
    while (true) {
        while (pos < t.size() && t[pos] == ' ') ++pos;
        if (pos >= t.size()) throw fail();
        double factor = 1.0;
        bool have = false;
        if (std::isdigit(static_cast<unsigned char>(t[pos])) || t[pos] == '.') {
            auto [ptr, ec] = std::from_chars(t.data() + pos, t.data() + t.size(), factor);
            if (ec != std::errc{}) throw fail();
            pos = static_cast<std::size_t>(ptr - t.data());
            have = true;
        }
        if (t.compare(pos, 2, "pi") == 0) {
            factor *= kPi;
            pos += 2;
            have = true;
        }
        if (!have) throw fail();
        value = op == '*' ? value * factor : value / factor;
        while (pos < t.size() && t[pos] == ' ') ++pos;
        if (pos == t.size()) break;
        if (t[pos] != '*' && t[pos] != '/') throw fail();
        op = t[pos++];
    }
    if (!std::isfinite(value)) throw fail();
    return negate ? -value : value;
}

std::vector<double> linspace(double lo, double hi, int count) {
    if (count < 1) throw ConfigError("axis needs at least one point");
    if (count == 1) return {lo};
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    v.back() = hi;
    return v;
}

ExperimentConfig::ExperimentConfig() {
    chain.n_sites = 5;
    chain.noise_sites = {3};
    chain.set_reduced_noise(1.3);
    t_final = 10.0 * kPi;
    dt_sample = kPi / 40.0;
    probe_time = 3.0 * kPi;
    steady_probe_time = 2.0 * kPi;
    pearson_window = kPi;
    fit_window = {3.0 * kPi, 8.0 * kPi};
    sweep.gammas = linspace(0.1, 3.0, 21);
    sweep.deltas_over_j = linspace(-2.0, 2.0, 21);
}

void ExperimentConfig::validate() const {
    try {
        chain.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("chain: ") + e.what());
    }
    const int n = chain.n_sites;
    std::set<int> seen;
    if (initial_excitations.empty()) throw ConfigError("initial.excitations: list is empty");
    for (int s : initial_excitations) {
        if (s < 1 || s > n)
            throw ConfigError("initial.excitations: site " + std::to_string(s) + " out of range 1.." +
                              std::to_string(n));
        if (!seen.insert(s).second)
            throw ConfigError("initial.excitations: site " + std::to_string(s) + " listed twice");
    }
    if (n_trajectories < 1) throw ConfigError("noise.n_trajectories: must be positive");
    if (!(pulse_width > 0.0)) throw ConfigError("noise.pulse_width: must be positive");
    if (!(spectral_density >= 0.0)) throw ConfigError("noise.spectral_density: must be >= 0");
    if (!(t_final > 0.0)) throw ConfigError("run.t_final: must be positive");
    if (!(dt_sample > 0.0)) throw ConfigError("run.dt_sample: must be positive");
    if (!(probe_time > 0.0) || probe_time > t_final * (1.0 + 1e-12))
        throw ConfigError("run.probe_time: must lie in (0, t_final]");
    if (!sample_index(probe_time, dt_sample))
        throw ConfigError("run.probe_time: must be a multiple of run.dt_sample");
    if (!(steady_probe_time > 0.0) || steady_probe_time > t_final * (1.0 + 1e-12))
        throw ConfigError("run.steady_probe_time: must lie in (0, t_final]");
    if (!sample_index(steady_probe_time, dt_sample))
        throw ConfigError("run.steady_probe_time: must be a multiple of run.dt_sample");
    for (const auto& [a, b] : pearson_pairs) {
        if (a < 1 || a > n || b < 1 || b > n || a == b)
            throw ConfigError("analysis.pearson_pairs: invalid pair " + std::to_string(a) + "-" +
                              std::to_string(b));
    }
    if (!(pearson_window > 0.0)) throw ConfigError("analysis.pearson_window: must be positive");
    if (fit_site < 1 || fit_site > n) throw ConfigError("analysis.fit_site: out of range");
    if (!(fit_window.end > fit_window.begin) || fit_window.begin < 0.0)
        throw ConfigError("analysis.fit_window: need 0 <= begin < end");
    if (sweep.gammas.empty() || sweep.deltas_over_j.empty())
        throw ConfigError("sweep: axes must be non-empty");
    for (double g : sweep.gammas)
        if (!(g >= 0.0)) throw ConfigError("sweep.gamma_values: values must be >= 0");
    if (!std::is_sorted(sweep.gammas.begin(), sweep.gammas.end()))
        throw ConfigError("sweep.gamma_values: must be ascending");
    if (!std::is_sorted(sweep.deltas_over_j.begin(), sweep.deltas_over_j.end()))
        throw ConfigError("sweep.delta_over_j_values: must be ascending");
}

NoiseSpec ExperimentConfig::noise_spec() const {
    NoiseSpec spec;
    spec.n_trajectories = n_trajectories;
    spec.pulse_width = pulse_width;
    spec.pulses_per_trajectory =
        std::max(1, static_cast<int>(std::ceil(t_final / pulse_width - 1e-9)));
    if ((static_cast<long long>(spec.pulses_per_trajectory) * n_trajectories) % 2 != 0)
        ++spec.pulses_per_trajectory;
    const double s = spectral_density;
    spec.spectral_density = [s](double) { return s; };
    spec.target_gamma = chain.noise_strength;
    spec.seed = seed;
    return spec;
}

std::vector<std::string> preset_names() {
    return {"paper-5q",           "paper-5q-unitary", "paper-5q-violation-u1",
            "paper-5q-violation-u2", "paper-5q-trajectories", "paper-8q-1ex",
            "paper-8q-2ex",       "paper-11q-1ex",    "paper-11q-3ex"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    if (name == "paper-5q") return c;
    if (name == "paper-5q-unitary") {
        c.chain.set_reduced_noise(0.0);
        return c;
    }
    if (name == "paper-5q-violation-u1") {
        c.chain.noise_sites = {1};
        return c;
    }
    if (name == "paper-5q-violation-u2") {
        c.chain.noise_sites = {2};
        return c;
    }
    if (name == "paper-5q-trajectories") {
        c.method = NoiseMethod::trajectories;
        c.n_trajectories = 1000;
        c.pulse_width = 0.04;
        return c;
    }
    if (name == "paper-8q-1ex" || name == "paper-8q-2ex") {
        c.chain.n_sites = 8;
        c.chain.noise_sites = {3, 6};
        c.chain.set_reduced_noise(0.5);
        c.initial_excitations = name == "paper-8q-1ex" ? std::vector<int>{1} : std::vector<int>{1, 5};
        c.pearson_pairs = {{1, 5}, {1, 7}, {2, 4}, {2, 8}};
        return c;
    }
    if (name == "paper-11q-1ex" || name == "paper-11q-3ex") {
        c.chain.n_sites = 11;
        c.chain.noise_sites = {3, 6, 9};
        c.chain.set_reduced_noise(0.3);
        c.initial_excitations =
            name == "paper-11q-1ex" ? std::vector<int>{1} : std::vector<int>{1, 5, 7};
        c.pearson_pairs = {{1, 5}, {1, 11}, {2, 4}, {2, 10}};
        return c;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
    ExperimentConfig c = std::move(base);
    double gamma = c.chain.reduced_noise();
    std::string line;
    int lineno = 0;
    bool seen_key = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "preset") {
            if (seen_key) throw ConfigError("preset: must be the first key in the file");
            c = preset(val);
            gamma = c.chain.reduced_noise();
        } else if (key == "name") {
            c.name = val;
        } else if (key == "chain.n_sites") {
            c.chain.n_sites = parse_integer<int>(val, key);
        } else if (key == "chain.coupling") {
            c.chain.coupling = parse_real(val, key);
        } else if (key == "chain.base_frequency") {
            c.chain.base_frequency = parse_real(val, key);
        } else if (key == "chain.site_frequencies") {
            c.chain.site_frequencies = parse_real_list(val, key);
        } else if (key == "chain.edge_detuning") {
            c.chain.edge_detuning = parse_real(val, key);
        } else if (key == "chain.noise_sites") {
            c.chain.noise_sites = parse_int_list(val, key);
        } else if (key == "chain.gamma") {
            gamma = parse_real(val, key);
        } else if (key == "initial.excitations") {
            c.initial_excitations = parse_int_list(val, key);
        } else if (key == "noise.method") {
            if (val == "exact-lindblad") c.method = NoiseMethod::exact_lindblad;
            else if (val == "trajectories") c.method = NoiseMethod::trajectories;
            else throw ConfigError(key + ": expected 'exact-lindblad' or 'trajectories'");
        } else if (key == "noise.n_trajectories") {
            c.n_trajectories = parse_integer<int>(val, key);
        } else if (key == "noise.pulse_width") {
            c.pulse_width = parse_real(val, key);
        } else if (key == "noise.spectral_density") {
            c.spectral_density = parse_real(val, key);
        } else if (key == "run.t_final") {
            c.t_final = parse_real(val, key);
        } else if (key == "run.dt_sample") {
            c.dt_sample = parse_real(val, key);
        } else if (key == "run.probe_time") {
            c.probe_time = parse_real(val, key);
        } else if (key == "run.steady_probe_time") {
            c.steady_probe_time = parse_real(val, key);
        } else if (key == "run.seed") {
            c.seed = parse_integer<std::uint64_t>(val, key);
        } else if (key == "analysis.pearson_pairs") {
            c.pearson_pairs.clear();
            for (const auto& item : split(val, ',')) {
                const auto parts = split(item, '-');
                if (parts.size() != 2) throw ConfigError(key + ": expected pairs like '1-5'");
                c.pearson_pairs.emplace_back(parse_integer<int>(parts[0], key),
                                             parse_integer<int>(parts[1], key));
            }
        } else if (key == "analysis.pearson_window") {
            c.pearson_window = parse_real(val, key);
        } else if (key == "analysis.fit_site") {
            c.fit_site = parse_integer<int>(val, key);
        } else if (key == "analysis.fit_window") {
            const auto v = parse_real_list(val, key);
            if (v.size() != 2) throw ConfigError(key + ": expected 'begin, end'");
            c.fit_window = {v[0], v[1]};
        } else if (key == "sweep.gamma_values") {
            c.sweep.gammas = parse_real_list(val, key);
        } else if (key == "sweep.delta_over_j_values") {
            c.sweep.deltas_over_j = parse_real_list(val, key);
        } else if (key == "sweep.gamma_range" || key == "sweep.delta_over_j_range") {
            const auto parts = split(val, ',');
            if (parts.size() != 3) throw ConfigError(key + ": expected 'min, max, count'");
            auto axis = linspace(parse_real(parts[0], key), parse_real(parts[1], key),
                                 parse_integer<int>(parts[2], key));
            (key == "sweep.gamma_range" ? c.sweep.gammas : c.sweep.deltas_over_j) = std::move(axis);
        } else {
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        seen_key = true;
    }
    c.chain.set_reduced_noise(gamma);
    c.validate();
    return c;
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, std::move(base));
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "name = " << c.name << '\n';
    out << "chain.n_sites = " << c.chain.n_sites << '\n';
    out << "chain.coupling = " << format_exact(c.chain.coupling) << '\n';
    out << "chain.base_frequency = " << format_exact(c.chain.base_frequency) << '\n';
    if (!c.chain.site_frequencies.empty())
        out << "chain.site_frequencies = " << join_reals(c.chain.site_frequencies) << '\n';
    out << "chain.edge_detuning = " << format_exact(c.chain.edge_detuning) << '\n';
    out << "chain.noise_sites = " << join_ints(c.chain.noise_sites) << '\n';
    out << "chain.gamma = " << format_exact(c.chain.reduced_noise()) << '\n';
    out << "initial.excitations = " << join_ints(c.initial_excitations) << '\n';
    out << "noise.method = "
        << (c.method == NoiseMethod::trajectories ? "trajectories" : "exact-lindblad") << '\n';
    out << "noise.n_trajectories = " << c.n_trajectories << '\n';
    out << "noise.pulse_width = " << format_exact(c.pulse_width) << '\n';
    out << "noise.spectral_density = " << format_exact(c.spectral_density) << '\n';
    out << "run.t_final = " << format_exact(c.t_final) << '\n';
    out << "run.dt_sample = " << format_exact(c.dt_sample) << '\n';
    out << "run.probe_time = " << format_exact(c.probe_time) << '\n';
    out << "run.steady_probe_time = " << format_exact(c.steady_probe_time) << '\n';
    out << "run.seed = " << c.seed << '\n';
    out << "analysis.pearson_pairs = "
        << join(c.pearson_pairs,
                [](const std::pair<int, int>& p) {
                    return std::to_string(p.first) + "-" + std::to_string(p.second);
                })
        << '\n';
    out << "analysis.pearson_window = " << format_exact(c.pearson_window) << '\n';
    out << "analysis.fit_site = " << c.fit_site << '\n';
    out << "analysis.fit_window = " << format_exact(c.fit_window.begin) << ", "
        << format_exact(c.fit_window.end) << '\n';
    out << "sweep.gamma_values = " << join_reals(c.sweep.gammas) << '\n';
    out << "sweep.delta_over_j_values = " << join_reals(c.sweep.deltas_over_j) << '\n';
    return out.str();
}

std::string metric_csv_header(int n_sites) {
    std::string h = "jt";
    for (int j = 1; j <= n_sites; ++j) h += ",sz_" + std::to_string(j);
    h += ",c15,c24,concurrence,fidelity_mems,purity";
    return h;
}

namespace {

std::optional<TwoQubitState> reference_matrix(int n_sites) {
    if ((n_sites + 1) % 3 != 0) return std::nullopt;
    return mems_reference(n_sites).matrix;
}

struct EdgeMetrics {
    double concurrence = kNaN;
    double fidelity_mems = kNaN;
    double fidelity_main_text = kNaN;
    double purity = kNaN;
    TwoQubitState state = TwoQubitState::Zero();
};

EdgeMetrics edge_metrics(const TwoQubitState& state, const std::optional<TwoQubitState>& ref) {
    EdgeMetrics m;
    m.state = state;
    m.concurrence = concurrence(m.state);
    m.purity = purity(m.state);
    if (ref) m.fidelity_mems = fidelity(*ref, m.state);
    m.fidelity_main_text = fidelity(main_text_mems(), m.state);
    return m;
}

EdgeMetrics edge_metrics(const DensityMatrix& rho, const std::optional<TwoQubitState>& ref) {
    return edge_metrics(edge_reduced_state(rho, 1, rho.basis().n_sites()), ref);
}

// Records and enforces the density-matrix invariants along a run.
class InvariantMonitor {
public:
    explicit InvariantMonitor(bool unital_dissipator) : unital_(unital_dissipator) {}

    void observe(double t, const DensityMatrix& rho, const std::vector<double>& sz) {
        const double total = std::accumulate(sz.begin(), sz.end(), 0.0);
        const double p = purity(rho);
        if (first_) {
            total0_ = total;
            purity0_ = p;
            first_ = false;
        } else {
            stats_.max_purity_increase = std::max(stats_.max_purity_increase, p - last_purity_);
        }
        last_purity_ = p;
        stats_.max_trace_error = std::max(stats_.max_trace_error, rho.trace_error());
        stats_.max_hermiticity_error = std::max(stats_.max_hermiticity_error, rho.hermiticity_error());
        stats_.max_magnetization_drift = std::max(stats_.max_magnetization_drift, std::abs(total - total0_));
        stats_.max_purity_drift = std::max(stats_.max_purity_drift, std::abs(p - purity0_));
        const double lo = rho.min_eigenvalue();
        stats_.min_eigenvalue = std::min(stats_.min_eigenvalue, lo);
        if (lo < -1e-6)
            throw NumericalError("negative eigenvalue " + format_number(lo) + " at t=" + format_number(t));
        if (stats_.max_trace_error > 1e-8 || stats_.max_hermiticity_error > 1e-10)
            throw NumericalError("trace or Hermiticity drift at t=" + format_number(t));
        if (unital_ && stats_.max_purity_increase > 1e-8)
            throw NumericalError("purity increased under a unital map at t=" + format_number(t));
    }

    const InvariantStats& stats() const { return stats_; }

private:
    bool unital_;
    bool first_ = true;
    double total0_ = 0.0;
    double purity0_ = 0.0;
    double last_purity_ = 0.0;
    InvariantStats stats_;
};

struct Trace {
    std::vector<double> times;
    std::vector<std::vector<double>> sz;  // [time][site]
    std::vector<EdgeMetrics> edge;
};

std::string metrics_csv(const Trace& tr, int n_sites) {
    auto site_series = [&](int j) {
        std::vector<double> v(tr.times.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = tr.sz[i][static_cast<std::size_t>(j - 1)];
        return v;
    };
    std::vector<double> c15(tr.times.size(), kNaN), c24(tr.times.size(), kNaN);
    if (n_sites >= 5) {
        c15 = cumulative_pearson(site_series(1), site_series(5), tr.times);
        c24 = cumulative_pearson(site_series(2), site_series(4), tr.times);
    }
    std::ostringstream out;
    out << metric_csv_header(n_sites) << '\n';
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        out << format_number(tr.times[i]);
        for (double v : tr.sz[i]) out << ',' << format_number(v);
        out << ',' << format_number(c15[i]) << ',' << format_number(c24[i]) << ','
            << format_number(tr.edge[i].concurrence) << ',' << format_number(tr.edge[i].fidelity_mems)
            << ',' << format_number(tr.edge[i].purity) << '\n';
    }
    return out.str();
}

ProbeMetrics to_probe(double t, const EdgeMetrics& m) {
    return {t, m.concurrence, m.fidelity_mems, m.fidelity_main_text, m.purity, m.state};
}

nlohmann::ordered_json probe_json(const ProbeMetrics& p) {
    nlohmann::ordered_json j;
    j["jt"] = p.time;
    j["concurrence"] = p.concurrence;
    j["fidelity_mems"] = p.fidelity_mems;
    j["fidelity_main_text_m"] = p.fidelity_main_text;
    j["purity"] = p.purity;
    return j;
}

nlohmann::ordered_json invariants_json(const InvariantStats& s) {
    nlohmann::ordered_json j;
    j["max_trace_error"] = s.max_trace_error;
    j["max_hermiticity_error"] = s.max_hermiticity_error;
    j["max_total_magnetization_drift"] = s.max_magnetization_drift;
    j["min_eigenvalue"] = s.min_eigenvalue;
    j["max_purity_drift"] = s.max_purity_drift;
    j["max_purity_increase"] = s.max_purity_increase;
    return j;
}

}  // namespace

SingleRunResult run_single(const ExperimentConfig& config, int workers) {
    config.validate();
    const ChainSpec& chain = config.chain;
    const int n = chain.n_sites;
    const DensityMatrix initial = DensityMatrix::product_state(n, config.initial_excitations);
    const auto ref = reference_matrix(n);
    const bool unital = true;  // sigma^z dephasing is a unital channel

    SingleRunResult result;
    result.verdict = check_sync_conditions(chain);
    result.sector_dim = initial.dim();
    result.n_excitations = initial.basis().n_excitations();

    const std::size_t probe_idx = *sample_index(config.probe_time, config.dt_sample);
    const std::size_t steady_idx = *sample_index(config.steady_probe_time, config.dt_sample);

    Trace lind;
    InvariantMonitor monitor(unital);
    std::optional<DensityMatrix> probe_state;
    LindbladOptions opts;
    opts.check_invariants = false;  // the monitor enforces the same limits
    lindblad_stream(
        chain, initial, config.t_final, config.dt_sample,
        [&](double t, const DensityMatrix& rho) {
            const std::vector<double> sz = magnetizations(rho);
            monitor.observe(t, rho, sz);
            if (lind.times.size() == probe_idx) probe_state = rho;
            lind.times.push_back(t);
            lind.sz.push_back(sz);
            lind.edge.push_back(edge_metrics(rho, ref));
        },
        opts);
    result.invariants = monitor.stats();
    result.times = lind.times;
    result.metrics_csv = metrics_csv(lind, n);

    result.lindblad_magnetization.times = lind.times;
    result.lindblad_magnetization.values.assign(static_cast<std::size_t>(n),
                                                std::vector<double>(lind.times.size()));
    for (std::size_t i = 0; i < lind.times.size(); ++i)
        for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j)
            result.lindblad_magnetization.values[j][i] = lind.sz[i][j];

    for (const auto& [a, b] : config.pearson_pairs) {
        PearsonAtProbe p{a, b, std::nullopt, std::nullopt};
        const auto& xa = result.lindblad_magnetization.site(a);
        const auto& xb = result.lindblad_magnetization.site(b);
        try {
            p.value = pearson(xa, xb, lind.times, {0.0, config.probe_time});
        } catch (const DegenerateInput&) {
        }
        try {
            p.trailing = pearson(xa, xb, lind.times,
                                 {std::max(0.0, config.probe_time - config.pearson_window), config.probe_time});
        } catch (const DegenerateInput&) {
        }
        result.pearson.push_back(p);
    }

    if (config.fit_window.end > config.t_final * (1.0 + 1e-12)) {
        result.fit_status = "skipped: fit window extends beyond t_final";
    } else {
        try {
            result.fit = fit_cosine(result.lindblad_magnetization.site(config.fit_site), lind.times,
                                    config.fit_window, chain.coupling, 3.0 * chain.coupling);
        } catch (const DegenerateInput& e) {
            result.fit_status = std::string("no oscillation: ") + e.what();
        }
    }
    result.probe = to_probe(lind.times[probe_idx], lind.edge[probe_idx]);
    result.steady_probe = to_probe(lind.times[steady_idx], lind.edge[steady_idx]);
    TwoQubitState mean = TwoQubitState::Zero();
    for (std::size_t i = steady_idx; i < lind.edge.size(); ++i) mean += lind.edge[i].state;
    mean /= static_cast<double>(lind.edge.size() - steady_idx);
    result.long_time_average = to_probe(lind.times[steady_idx], edge_metrics(mean, ref));

    if (config.method == NoiseMethod::trajectories) {
        const auto ensembles = synthesize_site_ensembles(config.noise_spec(),
                                                         static_cast<int>(chain.noise_sites.size()));
        TrajectoryOptions topts;
        topts.workers = workers;
        const EvolutionResult traj =
            trajectory_evolve(chain, initial, ensembles, config.t_final, config.dt_sample, topts);
        Trace tt;
        InvariantMonitor tmon(false);  // a finite ensemble need not decrease purity monotonically
        for (std::size_t i = 0; i < traj.states.size(); ++i) {
            const std::vector<double> sz = magnetizations(traj.states[i]);
            tmon.observe(traj.times[i], traj.states[i], sz);
            tt.times.push_back(traj.times[i]);
            tt.sz.push_back(sz);
            tt.edge.push_back(edge_metrics(traj.states[i], ref));
        }
        result.trajectory_metrics_csv = metrics_csv(tt, n);
        result.trajectory_trace_distance =
            trace_distance(traj.states[probe_idx].entries(), probe_state->entries());
        result.trajectory_invariants = tmon.stats();
    }
    return result;
}

nlohmann::ordered_json SingleRunResult::summary_json(const ExperimentConfig& config) const {
    nlohmann::ordered_json j;
    j["name"] = config.name;
    j["n_sites"] = config.chain.n_sites;
    j["noise_sites"] = config.chain.noise_sites;
    j["gamma"] = config.chain.reduced_noise();
    j["detuning_over_j"] = config.chain.edge_detuning / config.chain.coupling;
    j["initial_excitations"] = config.initial_excitations;
    j["sync_condition"] = {{"satisfied", verdict.satisfied}, {"diagnostic", verdict.diagnostic}};
    j["sector"] = {{"n_excitations", n_excitations}, {"dimension", sector_dim}};
    j["probe_time"] = config.probe_time;
    nlohmann::ordered_json pears = nlohmann::ordered_json::array();
    for (const auto& p : pearson) {
        nlohmann::ordered_json e;
        e["pair"] = std::to_string(p.site_a) + "-" + std::to_string(p.site_b);
        if (p.value) e["value"] = *p.value;
        else e["value"] = nullptr;
        if (p.trailing) e["trailing_window_value"] = *p.trailing;
        else e["trailing_window_value"] = nullptr;
        e["synchronized"] = p.value && *p.value >= 0.9;
        pears.push_back(e);
    }
    j["pearson_trailing_window"] = config.pearson_window;
    j["pearson_at_probe"] = pears;
    nlohmann::ordered_json f;
    f["status"] = fit_status;
    f["site"] = config.fit_site;
    f["window"] = {config.fit_window.begin, config.fit_window.end};
    if (fit) {
        f["omega_over_j"] = fit->omega / config.chain.coupling;
        f["amplitude"] = fit->amplitude;
        f["phase"] = fit->phase;
        f["offset"] = fit->offset;
        f["rms_residual"] = fit->rms_residual;
        f["amplitude_zero_phase"] = fit->amplitude_zero_phase;
        f["offset_zero_phase"] = fit->offset_zero_phase;
        f["rms_residual_zero_phase"] = fit->rms_residual_zero_phase;
        f["residual_exceeds_amplitude"] = fit->rms_residual > fit->amplitude;
    }
    j["cosine_fit"] = f;
    j["probe"] = probe_json(probe);
    j["steady_probe"] = probe_json(steady_probe);
    nlohmann::ordered_json avg = probe_json(long_time_average);
    avg.erase("jt");
    j["long_time_average"] = {{"window", {config.steady_probe_time, config.t_final}}};
    j["long_time_average"].update(avg);
    j["invariants"] = invariants_json(invariants);
    if (trajectory_trace_distance) {
        nlohmann::ordered_json t;
        t["count"] = config.n_trajectories;
        t["pulse_width"] = config.pulse_width;
        t["seed"] = config.seed;
        t["trace_distance_at_probe"] = *trajectory_trace_distance;
        t["invariants"] = invariants_json(*trajectory_invariants);
        j["trajectories"] = t;
    }
    return j;
}

SweepGrid run_sweep(const ExperimentConfig& config, const SweepAxes& axes, int workers) {
    config.validate();
    if (axes.gammas.empty() || axes.deltas_over_j.empty())
        throw ConfigError("sweep: axes must be non-empty");
    SweepGrid grid;
    grid.gammas = axes.gammas;
    grid.deltas_over_j = axes.deltas_over_j;
    const std::size_t nd = axes.deltas_over_j.size();
    grid.cells.resize(axes.gammas.size() * nd);
    const int n = config.chain.n_sites;
    const auto ref = reference_matrix(n);

    parallel_for(grid.cells.size(), workers, [&](std::size_t idx) {
        SweepCell& cell = grid.cells[idx];
        cell.gamma = axes.gammas[idx / nd];
        cell.delta_over_j = axes.deltas_over_j[idx % nd];
        cell.pearson_c15 = cell.concurrence = cell.fidelity_mems = kNaN;
        try {
            if (n < 5) throw DegenerateInput("c15 needs at least 5 sites");
            ChainSpec chain = config.chain;
            chain.set_reduced_noise(cell.gamma);
            chain.edge_detuning = cell.delta_over_j * chain.coupling;
            const DensityMatrix initial = DensityMatrix::product_state(n, config.initial_excitations);
            std::vector<double> times, s1, s5;
            std::optional<DensityMatrix> last;
            lindblad_stream(chain, initial, config.probe_time, config.dt_sample,
                            [&](double t, const DensityMatrix& rho) {
                                const auto sz = magnetizations(rho);
                                times.push_back(t);
                                s1.push_back(sz[0]);
                                s5.push_back(sz[4]);
                                last = rho;
                            });
            const EdgeMetrics m = edge_metrics(*last, ref);
            cell.concurrence = m.concurrence;
            cell.fidelity_mems = m.fidelity_mems;
            cell.pearson_c15 = pearson(s1, s5, times, {0.0, config.probe_time});
        } catch (const std::exception& e) {
            cell.status = e.what();
        }
    });
    return grid;
}

std::string sweep_csv(const SweepGrid& grid) {
    std::ostringstream out;
    out << "gamma,delta_over_j,pearson_c15,concurrence,fidelity_mems\n";
    for (const auto& c : grid.cells) {
        out << format_number(c.gamma) << ',' << format_number(c.delta_over_j) << ',';
        if (!c.status.empty()) {
            std::string msg = c.status;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << "nan,nan,nan,error: " << msg << '\n';
            continue;
        }
        out << format_number(c.pearson_c15) << ',' << format_number(c.concurrence) << ','
            << format_number(c.fidelity_mems) << '\n';
    }
    return out.str();
}

DfsReport dfs_report(int n_sites, const std::vector<int>& noise_sites, double gamma) {
    DfsReport r;
    r.n_sites = n_sites;
    r.noise_sites = noise_sites;
    ChainSpec chain;
    chain.n_sites = n_sites;
    chain.noise_sites = noise_sites;
    chain.set_reduced_noise(gamma);
    r.verdict = check_sync_conditions(chain);
    if (const auto pair = dfs_states(chain)) {
        r.dfs_indices = std::make_pair(pair->first.index, pair->second.index);
        for (int u : noise_sites) {
            r.noise_site_amplitudes.push_back(
                {u, {pair->first.profile(u - 1), pair->second.profile(u - 1)}});
        }
    }
    const SectorBasis basis(n_sites, 1);
    if (basis.dim() * basis.dim() > kMaxSuperoperatorSize) {
        r.spectrum_status = "skipped: sector exceeds the dense superoperator cap";
    } else {
        const auto eig = liouvillian_spectrum(chain, basis);
        const SpectrumSummary s = classify_spectrum(eig);
        std::vector<double> freqs;
        for (double w : s.oscillation_frequencies) freqs.push_back(w / chain.coupling);
        r.oscillation_frequencies = freqs;
        r.spectrum_status = "ok";
    }
    return r;
}

nlohmann::ordered_json DfsReport::to_json() const {
    nlohmann::ordered_json j;
    j["n_sites"] = n_sites;
    j["noise_sites"] = noise_sites;
    j["satisfied"] = verdict.satisfied;
    j["diagnostic"] = verdict.diagnostic;
    if (dfs_indices) j["dfs_indices"] = {dfs_indices->first, dfs_indices->second};
    else j["dfs_indices"] = nullptr;
    nlohmann::ordered_json amps = nlohmann::ordered_json::array();
    for (const auto& [u, a] : noise_site_amplitudes)
        amps.push_back({{"site", u}, {"mode_k", a.first}, {"mode_l", a.second}});
    j["dfs_amplitudes_at_noise_sites"] = amps;
    j["spectrum_status"] = spectrum_status;
    if (oscillation_frequencies) j["oscillation_frequencies_over_j"] = *oscillation_frequencies;
    return j;
}

std::string DfsReport::to_text() const {
    std::ostringstream out;
    out << "chain length N      : " << n_sites << '\n';
    out << "noise sites         : " << join_ints(noise_sites) << '\n';
    out << "sync condition      : " << (verdict.satisfied ? "satisfied" : "violated") << '\n';
    out << "diagnostic          : " << verdict.diagnostic << '\n';
    if (dfs_indices) {
        out << "DFS modes           : k=" << dfs_indices->first << ", l=" << dfs_indices->second << '\n';
        for (const auto& [u, a] : noise_site_amplitudes)
            out << "  amplitude at u=" << std::setw(2) << u << " : " << format_number(a.first) << ", "
                << format_number(a.second) << '\n';
    } else {
        out << "DFS modes           : none (N+1 not divisible by 3)\n";
    }
    out << "undamped frequencies: ";
    if (oscillation_frequencies) {
        if (oscillation_frequencies->empty()) out << "none";
        for (std::size_t i = 0; i < oscillation_frequencies->size(); ++i)
            out << (i ? ", " : "") << format_number((*oscillation_frequencies)[i]) << " J";
    } else {
        out << spectrum_status;
    }
    out << '\n';
    return out.str();
}

std::string mems_table(int n_sites) {
    const MemsReference ref = mems_reference(n_sites);
    std::ostringstream out;
    out << "N = " << n_sites << "\n\n";
    out << "edge state (|00>, |01>, |10>, |11>):\n";
    for (int r = 0; r < 4; ++r) {
        out << "  ";
        for (int c = 0; c < 4; ++c) out << std::setw(14) << format_number(ref.matrix(r, c).real());
        out << '\n';
    }
    out << '\n';
    auto row = [&](const std::string& label, double v) {
        out << std::left << std::setw(28) << label << std::right << format_number(v) << '\n';
    };
    row("p1 (Psi-)", ref.params.p1);
    row("p2 (|00>)", ref.params.p2);
    row("p3 (Psi+)", ref.params.p3);
    row("p4 (|11>)", ref.params.p4);
    row("concurrence 3/(N+1)", ref.concurrence);
    row("concurrence (Wootters)", concurrence(ref.matrix));
    row("purity", ref.purity);
    row("overlap with |1>_1", ref.overlap);
    row("first-state coherence sign", ref.first_state_coherence_sign);
    return out.str();
}

std::string mems_csv(int n_sites) {
    const MemsReference ref = mems_reference(n_sites);
    std::ostringstream out;
    out << "n_sites,p1,p2,p3,p4,concurrence,wootters_concurrence,purity,overlap,first_state_coherence_sign\n";
    out << n_sites << ',' << format_number(ref.params.p1) << ',' << format_number(ref.params.p2) << ','
        << format_number(ref.params.p3) << ',' << format_number(ref.params.p4) << ','
        << format_number(ref.concurrence) << ',' << format_number(concurrence(ref.matrix)) << ','
        << format_number(ref.purity) << ',' << format_number(ref.overlap) << ','
        << ref.first_state_coherence_sign << '\n';
    return out.str();
}

NoiseExport noise_gen(const NoiseSpec& spec) {
    const auto ensemble = synthesize_ensemble(spec);
    NoiseExport out;
    std::ostringstream csv;
    write_ensemble_csv(csv, ensemble);
    out.csv = csv.str();
    out.stats = gaussianity_check(ensemble);
    return out;
}

nlohmann::ordered_json NoiseExport::stats_json() const {
    nlohmann::ordered_json j;
    j["samples"] = stats.samples;
    j["mean"] = stats.mean;
    j["variance"] = stats.variance;
    j["skewness"] = stats.skewness;
    j["excess_kurtosis"] = stats.excess_kurtosis;
    return j;
}

}  // namespace qsync
