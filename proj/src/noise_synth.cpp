#include "qsync/noise_synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <fftw3.h>

#include "qsync/errors.hpp"
#include "qsync/format.hpp"

namespace qsync {

void NoiseSpec::validate() const {
    if (n_trajectories < 1) throw std::invalid_argument("n_trajectories must be positive");
    if (pulses_per_trajectory < 1)
        throw std::invalid_argument("pulses_per_trajectory must be positive");
    if (!(pulse_width > 0.0)) throw std::invalid_argument("pulse_width must be positive");
    if (!(target_gamma >= 0.0)) throw std::invalid_argument("target_gamma must be >= 0");
    if (!spectral_density) throw std::invalid_argument("spectral_density is empty");
    if (series_length() < 2)
        throw std::invalid_argument("frequency grid is empty: need at least two samples");
    if (series_length() % 2 != 0)
        throw std::invalid_argument("n_trajectories * pulses_per_trajectory must be even");
}

double NoiseTrajectory::at(double t) const {
    if (t < 0.0 || amplitudes.empty()) return 0.0;
    auto i = static_cast<std::size_t>(t / pulse_width);
    if (i >= amplitudes.size()) i = amplitudes.size() - 1;
    return amplitudes[i];
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// Uniform on [0, 1) from the top 53 bits; fixed across standard libraries,
// unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<NoiseTrajectory> synthesize_ensemble(const NoiseSpec& spec,
                                                 SynthesisDiagnostics* diag) {
    spec.validate();
    const std::size_t len = spec.series_length();
    const std::size_t half = len / 2;
    const double domega = 2.0 * std::numbers::pi / (static_cast<double>(len) * spec.pulse_width);

    std::unique_ptr<fftw_complex[], FftwFree> buf(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * len)));
    for (std::size_t i = 0; i < len; ++i) buf[i][0] = buf[i][1] = 0.0;

    std::mt19937_64 rng(spec.seed);
    // m = 0 stays zero: the series has exactly zero mean.
    for (std::size_t m = 1; m <= half; ++m) {
        const double s = spec.spectral_density(domega * static_cast<double>(m));
        if (!(s >= 0.0))
            throw std::invalid_argument("spectral density is negative at grid point m=" +
                                        std::to_string(m));
        const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
        const double amp = std::sqrt(s);
        if (m == half) {
            // Nyquist bin must be real; keep the sign of cos(theta).
            buf[m][0] = std::cos(theta) >= 0.0 ? amp : -amp;
            continue;
        }
        buf[m][0] = amp * std::cos(theta);
        buf[m][1] = amp * std::sin(theta);
        buf[len - m][0] = buf[m][0];
        buf[len - m][1] = -buf[m][1];
    }

    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(len), buf.get(), buf.get(), FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }

    std::vector<double> series(len);
    double max_real = 0.0;
    double max_imag = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        series[i] = buf[i][0];
        max_real = std::max(max_real, std::abs(buf[i][0]));
        max_imag = std::max(max_imag, std::abs(buf[i][1]));
    }
    const double imag_residual = max_real > 0.0 ? max_imag / max_real : max_imag;
    if (imag_residual > 1e-10)
        throw NumericalError("inverse transform is not real: relative imaginary residual " +
                             format_number(imag_residual));

    const double variance = autocovariance(series, 0);
    if (variance > 0.0) {
        const double scale = std::sqrt(spec.target_gamma / spec.pulse_width / variance);
        for (double& x : series) x *= scale;
    }
    if (diag) *diag = {imag_residual, variance};

    std::vector<NoiseTrajectory> out(static_cast<std::size_t>(spec.n_trajectories));
    const auto k = static_cast<std::size_t>(spec.pulses_per_trajectory);
    for (std::size_t t = 0; t < out.size(); ++t) {
        out[t].pulse_width = spec.pulse_width;
        out[t].amplitudes.assign(series.begin() + static_cast<std::ptrdiff_t>(t * k),
                                 series.begin() + static_cast<std::ptrdiff_t>((t + 1) * k));
    }
    return out;
}

std::vector<std::vector<NoiseTrajectory>> synthesize_site_ensembles(const NoiseSpec& spec,
                                                                    int n_noise_sites) {
    std::vector<std::vector<NoiseTrajectory>> out;
    for (int s = 0; s < n_noise_sites; ++s) {
        NoiseSpec site_spec = spec;
        site_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(s));
        out.push_back(synthesize_ensemble(site_spec));
    }
    return out;
}

std::vector<double> concatenate(std::span<const NoiseTrajectory> ensemble) {
    std::vector<double> series;
    for (const auto& t : ensemble) series.insert(series.end(), t.amplitudes.begin(), t.amplitudes.end());
    return series;
}

GaussianityReport gaussianity_check(std::span<const NoiseTrajectory> ensemble) {
    if (ensemble.empty()) throw std::invalid_argument("empty ensemble");
    GaussianityReport r;
    for (const auto& t : ensemble) {
        for (double x : t.amplitudes) {
            r.mean += x;
            ++r.samples;
        }
    }
    if (r.samples == 0) return r;
    const double n = static_cast<double>(r.samples);
    r.mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (const auto& t : ensemble) {
        for (double x : t.amplitudes) {
            const double d = x - r.mean;
            const double d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    r.variance = m2;
    if (m2 > 0.0) {
        r.skewness = m3 / std::pow(m2, 1.5);
        r.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return r;
}

double autocovariance(std::span<const double> series, std::size_t lag) {
    const std::size_t n = series.size();
    if (n == 0 || lag >= n) return 0.0;
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (series[i] - mean) * (series[i + lag] - mean);
    return acc / static_cast<double>(n);
}

double autocorrelation(std::span<const double> series, std::size_t lag) {
    const double c0 = autocovariance(series, 0);
    if (c0 == 0.0) throw DegenerateInput("autocorrelation of a constant series");
    return autocovariance(series, lag) / c0;
}

void write_ensemble_csv(std::ostream& out, std::span<const NoiseTrajectory> ensemble) {
    std::size_t width = 0;
    for (const auto& t : ensemble) width = std::max(width, t.amplitudes.size());
    out << "traj_id";
    for (std::size_t i = 0; i < width; ++i) out << ",a" << i;
    out << '\n';
    for (std::size_t id = 0; id < ensemble.size(); ++id) {
        out << id;
        for (double a : ensemble[id].amplitudes) out << ',' << format_number(a);
        out << '\n';
    }
}

}  // namespace qsync
