#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qsync/errors.hpp"
#include "qsync/experiment.hpp"
#include "qsync/format.hpp"

namespace fs = std::filesystem;
using namespace qsync;

namespace {

struct RunOptions {
    std::string config_path;
    std::string preset_name;
    std::string out_dir = ".";
    int workers = 1;
    std::optional<std::uint64_t> seed;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--config", o.config_path, "experiment file (dotted key = value lines)");
    cmd->add_option("--preset", o.preset_name, "named preset; a config file may refine it");
    cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--workers", o.workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "noise seed override");
}

ExperimentConfig resolve_config(const RunOptions& o) {
    ExperimentConfig base = o.preset_name.empty() ? ExperimentConfig{} : preset(o.preset_name);
    ExperimentConfig c = o.config_path.empty() ? base : load_config(o.config_path, base);
    if (o.seed) c.seed = *o.seed;
    c.validate();
    return c;
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ConfigError("--out: cannot create directory '" + dir + "': " + ec.message());
    return p;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::vector<double> parse_axis(const std::string& text, const std::string& key) {
    // "lo:hi:count" or a comma-separated list
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::string item;
        std::istringstream in(text);
        while (std::getline(in, item, ':')) parts.push_back(item);
        if (parts.size() != 3) throw ConfigError(key + ": expected lo:hi:count");
        const double count = parse_real(parts[2], key);
        if (count != std::floor(count)) throw ConfigError(key + ": count must be an integer");
        return linspace(parse_real(parts[0], key), parse_real(parts[1], key), static_cast<int>(count));
    }
    std::vector<double> v;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) v.push_back(parse_real(item, key));
    if (v.empty()) throw ConfigError(key + ": empty axis");
    return v;
}

int cmd_simulate(const RunOptions& o) {
    const ExperimentConfig c = resolve_config(o);
    const SingleRunResult r = run_single(c, o.workers);
    const fs::path out = prepare_out(o.out_dir);
    write_file(out / "metrics.csv", r.metrics_csv);
    if (r.trajectory_metrics_csv) write_file(out / "trajectory_metrics.csv", *r.trajectory_metrics_csv);
    write_file(out / "summary.json", r.summary_json(c).dump(2) + "\n");
    std::cout << "run " << c.name << ": N=" << c.chain.n_sites << ", sector dimension " << r.sector_dim
              << ", sync condition " << (r.verdict.satisfied ? "satisfied" : "violated") << '\n';
    for (const auto& p : r.pearson)
        std::cout << "  C" << p.site_a << "," << p.site_b << "(Jt=" << format_number(c.probe_time)
                  << ") = " << (p.value ? format_number(*p.value) : std::string("undefined"))
                  << " cumulative, " << (p.trailing ? format_number(*p.trailing) : std::string("undefined"))
                  << " over the trailing " << format_number(c.pearson_window) << '\n';
    if (r.fit)
        std::cout << "  fitted frequency " << format_number(r.fit->omega / c.chain.coupling)
                  << " J, amplitude " << format_number(r.fit->amplitude) << ", rms residual "
                  << format_number(r.fit->rms_residual) << '\n';
    else
        std::cout << "  cosine fit: " << r.fit_status << '\n';
    std::cout << "  concurrence " << format_number(r.probe.concurrence) << ", MEMS fidelity "
              << format_number(r.probe.fidelity_mems) << ", edge purity " << format_number(r.probe.purity)
              << '\n';
    if (r.trajectory_trace_distance)
        std::cout << "  trajectory trace distance " << format_number(*r.trajectory_trace_distance) << '\n';
    std::cout << "wrote " << (out / "metrics.csv").string() << " and " << (out / "summary.json").string()
              << '\n';
    return 0;
}

int cmd_sweep(const RunOptions& o, const std::string& gammas, const std::string& deltas) {
    const ExperimentConfig c = resolve_config(o);
    SweepAxes axes = c.sweep;
    if (!gammas.empty()) axes.gammas = parse_axis(gammas, "--gammas");
    if (!deltas.empty()) axes.deltas_over_j = parse_axis(deltas, "--deltas");
    const SweepGrid grid = run_sweep(c, axes, o.workers);
    const fs::path out = prepare_out(o.out_dir);
    write_file(out / "sweep.csv", sweep_csv(grid));
    std::size_t failed = 0;
    for (const auto& cell : grid.cells) failed += !cell.status.empty();
    std::cout << "sweep " << grid.gammas.size() << "x" << grid.deltas_over_j.size() << " cells, " << failed
              << " failed; wrote " << (out / "sweep.csv").string() << '\n';
    return 0;
}

int cmd_dfs(int n_sites, const std::string& sites, double gamma, bool json) {
    std::vector<int> noise;
    std::string item;
    std::istringstream in(sites);
    while (std::getline(in, item, ',')) {
        try {
            noise.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("--noise-sites: expected integers, got '" + item + "'");
        }
    }
    DfsReport r;
    try {
        r = dfs_report(n_sites, noise, gamma);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (json) std::cout << r.to_json().dump(2) << '\n';
    else std::cout << r.to_text();
    return 0;
}

int cmd_mems(int n_sites, const std::string& csv_path) {
    std::string table, csv;
    try {
        table = mems_table(n_sites);
        csv = mems_csv(n_sites);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    std::cout << table;
    if (!csv_path.empty()) write_file(csv_path, csv);
    return 0;
}

int cmd_noise(const RunOptions& o, std::optional<int> trajectories, std::optional<int> pulses,
              std::optional<double> width, std::optional<double> gamma, std::optional<double> density) {
    ExperimentConfig c = resolve_config(o);
    if (trajectories) c.n_trajectories = *trajectories;
    if (width) c.pulse_width = *width;
    if (gamma) c.chain.set_reduced_noise(*gamma);
    if (density) c.spectral_density = *density;
    c.validate();
    NoiseSpec spec = c.noise_spec();
    if (pulses) spec.pulses_per_trajectory = *pulses;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const NoiseExport ex = noise_gen(spec);
    const fs::path out = prepare_out(o.out_dir);
    write_file(out / "noise.csv", ex.csv);
    write_file(out / "noise_stats.json", ex.stats_json().dump(2) + "\n");
    std::cout << "wrote " << spec.n_trajectories << " trajectories x " << spec.pulses_per_trajectory
              << " pulses to " << (out / "noise.csv").string() << "; variance "
              << format_number(ex.stats.variance) << ", skewness " << format_number(ex.stats.skewness)
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise-induced synchronization of a dephased XY spin chain"};
    app.require_subcommand(1);

    RunOptions sim_opts, sweep_opts, noise_opts;
    auto* sim = app.add_subcommand("simulate", "single run: metric CSV and summary JSON");
    add_run_options(sim, sim_opts);

    auto* sweep = app.add_subcommand("sweep", "grid over gamma and detuning");
    add_run_options(sweep, sweep_opts);
    std::string gammas, deltas;
    sweep->add_option("--gammas", gammas, "gamma axis: 'lo:hi:count' or a list");
    sweep->add_option("--deltas", deltas, "delta/J axis: 'lo:hi:count' or a list");

    auto* dfs = app.add_subcommand("dfs-check", "synchronization condition and DFS report");
    int dfs_n = 5;
    std::string dfs_sites = "3";
    double dfs_gamma = 1.3;
    bool dfs_json = false;
    dfs->add_option("--n-sites", dfs_n, "chain length")->capture_default_str();
    dfs->add_option("--noise-sites", dfs_sites, "comma-separated noise sites")->capture_default_str();
    dfs->add_option("--gamma", dfs_gamma, "reduced noise strength")->capture_default_str();
    dfs->add_flag("--json", dfs_json, "emit JSON");

    auto* mems = app.add_subcommand("mems", "analytic MEMS reference table");
    int mems_n = 5;
    std::string mems_csv_path;
    mems->add_option("--n-sites", mems_n, "chain length")->capture_default_str();
    mems->add_option("--csv", mems_csv_path, "also write the table as CSV");

    auto* noise = app.add_subcommand("noise-gen", "export a synthesized noise ensemble");
    add_run_options(noise, noise_opts);
    std::optional<int> n_traj, n_pulses;
    std::optional<double> width, gamma, density;
    noise->add_option("--trajectories", n_traj, "ensemble size");
    noise->add_option("--pulses", n_pulses, "pulses per trajectory");
    noise->add_option("--pulse-width", width, "J tau0");
    noise->add_option("--gamma", gamma, "reduced noise strength");
    noise->add_option("--spectral-density", density, "constant S(omega)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sim) return cmd_simulate(sim_opts);
        if (*sweep) return cmd_sweep(sweep_opts, gammas, deltas);
        if (*dfs) return cmd_dfs(dfs_n, dfs_sites, dfs_gamma, dfs_json);
        if (*mems) return cmd_mems(mems_n, mems_csv_path);
        if (*noise) return cmd_noise(noise_opts, n_traj, n_pulses, width, gamma, density);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical invariant violated: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
