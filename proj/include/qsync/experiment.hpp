#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsync/analysis.hpp"
#include "qsync/chain_model.hpp"
#include "qsync/evolver.hpp"
#include "qsync/noise_synth.hpp"

namespace qsync {

enum class NoiseMethod { exact_lindblad, trajectories };

struct SweepAxes {
    std::vector<double> gammas;
    std::vector<double> deltas_over_j;
};

/// One experiment file. Times are Jt; chain.gamma is the reduced noise
/// strength gamma = Gamma/J.
struct ExperimentConfig {
    std::string name = "custom";
    ChainSpec chain;
    std::vector<int> initial_excitations{1};
    NoiseMethod method = NoiseMethod::exact_lindblad;
    int n_trajectories = 1000;
    double pulse_width = 0.25;
    double spectral_density = 1.0;
    double t_final = 0.0;
    double dt_sample = 0.0;
    double probe_time = 0.0;
    double steady_probe_time = 0.0;
    std::vector<std::pair<int, int>> pearson_pairs{{1, 5}, {2, 4}};
    // width of the trailing window reported next to the cumulative value
    double pearson_window = 0.0;
    int fit_site = 2;
    TimeWindow fit_window;
    std::uint64_t seed = 20240611;
    SweepAxes sweep;

    ExperimentConfig();
    /// Throws ConfigError naming the offending key.
    void validate() const;
    NoiseSpec noise_spec() const;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ExperimentConfig preset(const std::string& name);

/// Line-oriented "dotted.key = value" text; '#' starts a comment. A
/// "preset = NAME" line loads that preset as the base for later keys.
/// Numeric values accept pi expressions such as "3pi", "pi/40", "2*pi/3".
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
std::string serialize_config(const ExperimentConfig& config);

/// Parses a real number or pi expression; throws ConfigError.
double parse_real(const std::string& text, const std::string& key = "value");

/// Header "jt,sz_1,...,sz_N,c15,c24,concurrence,fidelity_mems,purity".
std::string metric_csv_header(int n_sites);

struct InvariantStats {
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double max_magnetization_drift = 0.0;
    double min_eigenvalue = 1.0;
    double max_purity_drift = 0.0;     // |Tr rho^2 - Tr rho0^2|
    double max_purity_increase = 0.0;  // largest step-to-step increase
};

struct ProbeMetrics {
    double time = 0.0;
    double concurrence = 0.0;
    double fidelity_mems = 0.0;  // NaN when the chain has no DFS pair
    double fidelity_main_text = 0.0;
    double purity = 0.0;
    TwoQubitState edge_state = TwoQubitState::Zero();
};

struct PearsonAtProbe {
    int site_a = 0;
    int site_b = 0;
    std::optional<double> value;     // cumulative on [0, probe_time]; absent when degenerate
    std::optional<double> trailing;  // on [probe_time - pearson_window, probe_time]
};

struct SingleRunResult {
    SyncVerdict verdict;
    int sector_dim = 0;
    int n_excitations = 0;
    std::vector<double> times;
    MagnetizationSeries lindblad_magnetization;
    std::vector<PearsonAtProbe> pearson;
    std::optional<CosineFit> fit;
    std::string fit_status = "ok";
    ProbeMetrics probe;
    ProbeMetrics steady_probe;
    // edge state averaged over the samples in [steady_probe_time, t_final]
    ProbeMetrics long_time_average;
    InvariantStats invariants;
    std::string metrics_csv;
    // trajectory ensemble, when configured
    std::optional<std::string> trajectory_metrics_csv;
    std::optional<double> trajectory_trace_distance;
    std::optional<InvariantStats> trajectory_invariants;

    nlohmann::ordered_json summary_json(const ExperimentConfig& config) const;
};

SingleRunResult run_single(const ExperimentConfig& config, int workers = 1);

struct SweepCell {
    double gamma = 0.0;
    double delta_over_j = 0.0;
    double pearson_c15 = 0.0;
    double concurrence = 0.0;
    double fidelity_mems = 0.0;
    std::string status;  // empty on success
};

struct SweepGrid {
    std::vector<double> gammas;
    std::vector<double> deltas_over_j;
    std::vector<SweepCell> cells;  // gamma-major: cells[i * deltas + j]

    const SweepCell& at(std::size_t gamma_index, std::size_t delta_index) const {
        return cells[gamma_index * deltas_over_j.size() + delta_index];
    }
};

/// Per cell: Lindblad evolution to probe_time, cumulative Pearson C15 on
/// [0, probe_time], edge concurrence and MEMS fidelity at probe_time. A cell
/// that fails is kept with a status message. Output depends only on the
/// inputs, not on the worker count or completion order.
SweepGrid run_sweep(const ExperimentConfig& config, const SweepAxes& axes, int workers = 1);

/// Header "gamma,delta_over_j,pearson_c15,concurrence,fidelity_mems". Failed
/// cells carry "nan" metrics plus a sixth status field.
std::string sweep_csv(const SweepGrid& grid);

std::vector<double> linspace(double lo, double hi, int count);

struct DfsReport {
    int n_sites = 0;
    std::vector<int> noise_sites;
    SyncVerdict verdict;
    std::optional<std::pair<int, int>> dfs_indices;
    std::vector<std::pair<int, std::pair<double, double>>> noise_site_amplitudes;
    std::optional<std::vector<double>> oscillation_frequencies;  // over J
    std::string spectrum_status;

    nlohmann::ordered_json to_json() const;
    std::string to_text() const;
};

DfsReport dfs_report(int n_sites, const std::vector<int>& noise_sites, double gamma = 1.3);

/// Aligned text table of the analytic MEMS values, and the same as CSV.
std::string mems_table(int n_sites);
std::string mems_csv(int n_sites);

struct NoiseExport {
    std::string csv;
    GaussianityReport stats;
    nlohmann::ordered_json stats_json() const;
};

NoiseExport noise_gen(const NoiseSpec& spec);

}  // namespace qsync
