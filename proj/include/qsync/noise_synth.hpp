#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

namespace qsync {

/// Parameters of one synthesized ensemble of piecewise-constant noise
/// trajectories. Times are in units of 1/J.
struct NoiseSpec {
    int n_trajectories = 1000;
    int pulses_per_trajectory = 256;
    double pulse_width = 0.25;  // J*tau0 for 4 ns at J/2pi = 10 MHz is 0.2513
    std::function<double(double)> spectral_density = [](double) { return 1.0; };
    double target_gamma = 1.3;  // Gamma (absolute strength, not Gamma/J)
    std::uint64_t seed = 0x5eed;

    std::size_t series_length() const {
        return static_cast<std::size_t>(n_trajectories) *
               static_cast<std::size_t>(pulses_per_trajectory);
    }
    void validate() const;
};

struct NoiseTrajectory {
    std::vector<double> amplitudes;
    double pulse_width = 0.0;

    double duration() const { return pulse_width * static_cast<double>(amplitudes.size()); }
    /// Pulse height in effect at time t (t in [0, duration)).
    double at(double t) const;
};

struct SynthesisDiagnostics {
    double max_imag_residual = 0.0;  // of the inverse transform, before discarding
    double raw_variance = 0.0;       // before rescaling
};

/// Spectral synthesis: random-phase spectrum on the grid 2 pi m/(N k tau0),
/// Hermitian completion, inverse FFT, variance calibration to Gamma/tau0 and
/// slicing into n_trajectories contiguous pieces.
std::vector<NoiseTrajectory> synthesize_ensemble(const NoiseSpec& spec,
                                                 SynthesisDiagnostics* diag = nullptr);

/// One independent ensemble per noise site; site s uses a seed derived
/// from spec.seed and s.
std::vector<std::vector<NoiseTrajectory>> synthesize_site_ensembles(const NoiseSpec& spec,
                                                                    int n_noise_sites);

/// The full real series before slicing.
std::vector<double> concatenate(std::span<const NoiseTrajectory> ensemble);

struct GaussianityReport {
    std::size_t samples = 0;
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

GaussianityReport gaussianity_check(std::span<const NoiseTrajectory> ensemble);

/// Biased sample autocovariance at the given lag; lag 0 is the variance.
double autocovariance(std::span<const double> series, std::size_t lag);
/// autocovariance(lag) / autocovariance(0).
double autocorrelation(std::span<const double> series, std::size_t lag);

/// CSV: header "traj_id,a0,a1,...", one row per trajectory.
void write_ensemble_csv(std::ostream& out, std::span<const NoiseTrajectory> ensemble);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace qsync
