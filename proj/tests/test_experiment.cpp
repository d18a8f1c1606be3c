#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qsync/errors.hpp"
#include "qsync/experiment.hpp"
#include "qsync/format.hpp"

using namespace qsync;

namespace {

constexpr double kPi = std::numbers::pi;

std::string first_data_row(const std::string& csv) {
    const auto a = csv.find('\n');
    return csv.substr(a + 1, csv.find('\n', a + 1) - a - 1);
}

}  // namespace

TEST_CASE("number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0 / 3.0) == "0.333333333");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(1e-20) == "1e-20");
    CHECK(format_number(123456789012.0) == "123456789000");
    CHECK(format_number(1.234567891e-11) == "1.23456789e-11");
    for (double x : {kPi, 1.0 / 3.0, -2.5e-7, 6.02214076e23}) CHECK(std::stod(format_exact(x)) == x);
}

TEST_CASE("pi expressions") {
    CHECK(parse_real("3pi") == 3 * kPi);
    CHECK(parse_real("pi/40") == kPi / 40);
    CHECK(parse_real("2*pi/3") == 2 * kPi / 3);
    CHECK(parse_real("-1.5") == -1.5);
    CHECK(parse_real(" 0.25 ") == 0.25);
    CHECK(parse_real("1e-3") == 1e-3);
    CHECK_THROWS_AS(parse_real("abc", "k"), ConfigError);
    CHECK_THROWS_AS(parse_real("3pi*", "k"), ConfigError);
    CHECK_THROWS_AS(parse_real("", "k"), ConfigError);
}

TEST_CASE("presets round-trip through serialization") {
    for (const auto& name : preset_names()) {
        const ExperimentConfig p = preset(name);
        CHECK_NOTHROW(p.validate());
        const std::string text = serialize_config(p);
        const ExperimentConfig q = parse_config_text(text);
        CHECK(serialize_config(q) == text);
        CHECK(q.chain.n_sites == p.chain.n_sites);
        CHECK(q.chain.noise_sites == p.chain.noise_sites);
        CHECK(q.chain.noise_strength == p.chain.noise_strength);
        CHECK(q.initial_excitations == p.initial_excitations);
        CHECK(q.t_final == p.t_final);
        CHECK(q.dt_sample == p.dt_sample);
        CHECK(q.probe_time == p.probe_time);
        CHECK(q.method == p.method);
        CHECK(q.pulse_width == p.pulse_width);
        CHECK(q.seed == p.seed);
        CHECK(q.pearson_pairs == p.pearson_pairs);
        CHECK(q.sweep.gammas == p.sweep.gammas);
        CHECK(q.sweep.deltas_over_j == p.sweep.deltas_over_j);
    }
    CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("preset parameters") {
    const ExperimentConfig p5 = preset("paper-5q");
    CHECK(p5.chain.n_sites == 5);
    CHECK(p5.chain.noise_sites == std::vector<int>{3});
    CHECK(p5.chain.reduced_noise() == doctest::Approx(1.3));
    CHECK(p5.t_final == doctest::Approx(10 * kPi));
    CHECK(p5.probe_time == doctest::Approx(3 * kPi));
    const ExperimentConfig p11 = preset("paper-11q-3ex");
    CHECK(p11.initial_excitations == std::vector<int>{1, 5, 7});
    CHECK(p11.chain.reduced_noise() == doctest::Approx(0.3));
    CHECK(preset("paper-8q-2ex").initial_excitations == std::vector<int>{1, 5});
    CHECK(preset("paper-5q-unitary").chain.noise_strength == 0.0);
}

TEST_CASE("config parsing: comments, presets, ranges and field-level errors") {
    const ExperimentConfig c = parse_config_text(
        "preset = paper-8q-1ex   # start from the 8-site run\n"
        "\n"
        "chain.gamma = 0.75\n"
        "chain.coupling = 2\n"
        "run.t_final = 4pi\n"
        "analysis.fit_window = pi, 4pi\n"
        "analysis.pearson_pairs = 1-8, 3-6\n"
        "sweep.gamma_range = 0.5, 1.5, 3\n");
    CHECK(c.chain.n_sites == 8);
    CHECK(c.chain.coupling == 2.0);
    CHECK(c.chain.noise_strength == doctest::Approx(1.5));
    CHECK(c.pearson_pairs == std::vector<std::pair<int, int>>{{1, 8}, {3, 6}});
    CHECK(c.sweep.gammas == std::vector<double>{0.5, 1.0, 1.5});

    auto message = [](const std::string& text) {
        try {
            parse_config_text(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("chain.n_sitez = 5\n").find("chain.n_sitez") != std::string::npos);
    CHECK(message("initial.excitations = 1, 1\n").find("initial.excitations") != std::string::npos);
    CHECK(message("initial.excitations = 9\n").find("initial.excitations") != std::string::npos);
    CHECK(message("run.probe_time = 20pi\n").find("run.probe_time") != std::string::npos);
    CHECK(message("chain.noise_sites = 7\n").find("chain") != std::string::npos);
    CHECK(message("noise.method = monte-carlo\n").find("noise.method") != std::string::npos);
    CHECK(message("chain.n_sites = five\n").find("chain.n_sites") != std::string::npos);
    CHECK(message("just some words\n").find("line 1") != std::string::npos);
    CHECK(message("name = x\npreset = paper-5q\n").find("preset") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("noise spec covers t_final with an even series") {
    ExperimentConfig c = preset("paper-5q-trajectories");
    const NoiseSpec s = c.noise_spec();
    CHECK(s.pulse_width * s.pulses_per_trajectory >= c.t_final);
    CHECK(s.series_length() % 2 == 0);
    CHECK(s.target_gamma == c.chain.noise_strength);
    c.n_trajectories = 3;
    c.pulse_width = c.t_final / 5;
    CHECK(c.noise_spec().series_length() % 2 == 0);
}

TEST_CASE("metric CSV layout") {
    CHECK(metric_csv_header(5) == "jt,sz_1,sz_2,sz_3,sz_4,sz_5,c15,c24,concurrence,fidelity_mems,purity");
    ExperimentConfig c = preset("paper-5q");
    c.t_final = 3 * kPi;
    c.fit_window = {kPi, 3 * kPi};
    const SingleRunResult r = run_single(c);
    std::istringstream in(r.metrics_csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == metric_csv_header(5));
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 121);
    CHECK(first_data_row(r.metrics_csv) == "0,1,-1,-1,-1,-1,nan,nan,0,0.5,1");
    CHECK(r.sector_dim == 5);
    CHECK(r.verdict.satisfied);
    CHECK(r.invariants.max_trace_error <= 1e-10);
    CHECK(r.invariants.max_magnetization_drift <= 1e-10);
}

TEST_CASE("run_single is deterministic and reports the three-excitation sector") {
    ExperimentConfig c = preset("paper-11q-3ex");
    c.t_final = kPi;
    c.probe_time = kPi;
    c.steady_probe_time = kPi / 2;
    c.fit_window = {0.0, kPi};
    const SingleRunResult r = run_single(c);
    CHECK(r.sector_dim == 165);
    CHECK(r.n_excitations == 3);
    const auto json = r.summary_json(c);
    CHECK(json["sector"]["dimension"] == 165);
}

TEST_CASE("summary JSON and unitary purity") {
    ExperimentConfig c = preset("paper-5q-unitary");
    c.t_final = 3 * kPi;
    c.fit_window = {kPi, 3 * kPi};
    const SingleRunResult a = run_single(c);
    const SingleRunResult b = run_single(c);
    CHECK(a.metrics_csv == b.metrics_csv);
    CHECK(a.summary_json(c).dump() == b.summary_json(c).dump());
    CHECK(a.invariants.max_purity_drift <= 1e-10);
    const auto j = a.summary_json(c);
    CHECK(j["pearson_at_probe"].size() == 2);
    // structural check: N and noise sites, independent of the noise strength
    CHECK(j["sync_condition"]["satisfied"] == true);
}

TEST_CASE("trajectory runs are seed-deterministic") {
    ExperimentConfig c = preset("paper-5q-trajectories");
    c.t_final = kPi;
    c.probe_time = kPi;
    c.steady_probe_time = kPi;
    c.fit_window = {0, kPi};
    c.n_trajectories = 64;
    const SingleRunResult a = run_single(c, 1);
    const SingleRunResult b = run_single(c, 2);
    REQUIRE(a.trajectory_metrics_csv);
    CHECK(*a.trajectory_metrics_csv == *b.trajectory_metrics_csv);
    c.seed += 1;
    CHECK(*run_single(c).trajectory_metrics_csv != *a.trajectory_metrics_csv);
}

TEST_CASE("1x1 sweep reproduces the single run") {
    const ExperimentConfig c = preset("paper-5q");
    const SweepGrid g = run_sweep(c, {{1.3}, {0.0}});
    ExperimentConfig s = c;
    s.t_final = c.probe_time;
    s.fit_window = {kPi, 3 * kPi};
    const SingleRunResult r = run_single(s);
    REQUIRE(g.cells.size() == 1);
    CHECK(g.at(0, 0).status.empty());
    CHECK(format_number(g.at(0, 0).pearson_c15) == format_number(*r.pearson[0].value));
    CHECK(format_number(g.at(0, 0).concurrence) == format_number(r.probe.concurrence));
    CHECK(format_number(g.at(0, 0).fidelity_mems) == format_number(r.probe.fidelity_mems));
}

TEST_CASE("sweep CSV is independent of worker count and records failed cells in-row") {
    const ExperimentConfig c = preset("paper-5q");
    const SweepAxes axes{{0.5, 1.3, 2.0}, {-1.0, 0.0, 1.0}};
    const std::string one = sweep_csv(run_sweep(c, axes, 1));
    CHECK(one == sweep_csv(run_sweep(c, axes, 3)));
    CHECK(one.rfind("gamma,delta_over_j,pearson_c15,concurrence,fidelity_mems\n", 0) == 0);

    ExperimentConfig small = c;
    small.chain.n_sites = 4;
    small.chain.noise_sites = {3};
    small.pearson_pairs = {{1, 4}};
    small.fit_site = 2;
    const SweepGrid g = run_sweep(small, {{1.0}, {0.0, 0.5}});
    CHECK_FALSE(g.at(0, 0).status.empty());
    const std::string csv = sweep_csv(g);
    CHECK(csv.find("1,0,nan,nan,nan,error: ") != std::string::npos);
    CHECK_THROWS_AS(run_sweep(c, {{}, {0.0}}), ConfigError);
}

TEST_CASE("DFS report") {
    const DfsReport a = dfs_report(5, {3});
    CHECK(a.verdict.satisfied);
    REQUIRE(a.oscillation_frequencies);
    REQUIRE(a.oscillation_frequencies->size() == 1);
    CHECK(std::abs((*a.oscillation_frequencies)[0] - 2.0) <= 1e-8);
    CHECK(a.dfs_indices == std::pair<int, int>{2, 4});
    CHECK(std::abs(a.noise_site_amplitudes[0].second.first) <= 1e-12);
    CHECK_FALSE(dfs_report(5, {2}).verdict.satisfied);
    CHECK(dfs_report(5, {2}).oscillation_frequencies->empty());
    CHECK(dfs_report(8, {3, 6}).verdict.satisfied);
    CHECK(dfs_report(8, {3, 6}).to_text().find("satisfied") != std::string::npos);
    CHECK(dfs_report(6, {3}).to_json()["dfs_indices"].is_null());
}

TEST_CASE("MEMS table and CSV") {
    const std::string csv = mems_csv(5);
    CHECK(csv.rfind("n_sites,p1,p2,p3,p4,concurrence,wootters_concurrence,purity,overlap,first_state_coherence_sign\n", 0) ==
          0);
    CHECK(csv.find("5,0.5,0.5,0,0,0.5,0.5,0.5,0.25,-1") != std::string::npos);
    CHECK(mems_table(8).find("N = 8") != std::string::npos);
}

TEST_CASE("noise export") {
    NoiseSpec s;
    s.n_trajectories = 4;
    s.pulses_per_trajectory = 8;
    s.seed = 17;
    CHECK(noise_gen(s).csv == noise_gen(s).csv);
    s.spectral_density = [](double) { return 0.0; };
    const NoiseExport z = noise_gen(s);
    CHECK(z.csv.find("0,0,0,0,0,0,0,0,0\n") != std::string::npos);
    CHECK(z.stats.variance == 0.0);
    CHECK(z.stats_json()["samples"] == 32);
}

TEST_CASE("violation presets: no synchronization and no single-frequency oscillation") {
    for (const std::string name : {"paper-5q-violation-u1", "paper-5q-violation-u2"}) {
        CAPTURE(name);
        const ExperimentConfig c = preset(name);
        const SingleRunResult r = run_single(c);
        const auto j = r.summary_json(c);
        CHECK(j["sync_condition"]["satisfied"] == false);
        REQUIRE(r.fit.has_value());
        CHECK(r.fit->rms_residual > std::abs(r.fit->amplitude));
    }
}

TEST_CASE("long-time average of the edge state") {
    ExperimentConfig c = preset("paper-5q");
    c.t_final = 4 * kPi;
    c.fit_window = {kPi, 4 * kPi};
    const SingleRunResult r = run_single(c);
    const auto j = r.summary_json(c);
    REQUIRE(j.contains("long_time_average"));
    CHECK(j["long_time_average"]["window"][0] == c.steady_probe_time);
    CHECK(j["long_time_average"]["window"][1] == c.t_final);
    const double f = r.long_time_average.fidelity_mems;
    CHECK(f > 0.0);
    CHECK(f <= 1.0);
    CHECK(r.long_time_average.fidelity_main_text > 0.0);
    CHECK(r.long_time_average.purity <= 1.0);
}
