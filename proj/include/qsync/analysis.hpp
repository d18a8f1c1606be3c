#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qsync/evolver.hpp"

namespace qsync {

/// <sigma^z_j>(t) for every site; values[j-1][i] is site j at times[i].
struct MagnetizationSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> values;

    const std::vector<double>& site(int j) const { return values.at(static_cast<std::size_t>(j - 1)); }
};

/// 4x4 state in the order |00>, |01>, |10>, |11>, lower site index on the left.
using TwoQubitState = Eigen::Matrix4cd;

struct TimeWindow {
    double begin = 0.0;
    double end = 0.0;
};

struct CosineFit {
    double amplitude = 0.0;  // c1 >= 0
    double phase = 0.0;      // phi in c1 cos(omega t + phi) + c2
    double offset = 0.0;     // c2
    double omega = 0.0;
    double rms_residual = 0.0;
    // c1 cos(omega t) + c2 refitted with the phase pinned to zero
    double amplitude_zero_phase = 0.0;
    double offset_zero_phase = 0.0;
    double rms_residual_zero_phase = 0.0;
};

std::vector<double> magnetizations(const DensityMatrix& rho);
MagnetizationSeries magnetizations(const EvolutionResult& result);

/// Pearson correlation of the samples whose times fall in the window
/// (inclusive, with a 1e-9 relative slack). Throws DegenerateInput for fewer
/// than 3 samples or zero variance.
double pearson(std::span<const double> x, std::span<const double> y,
               std::span<const double> times, TimeWindow window);

/// Cumulative C(t) on [t0, t] for every sample time t; NaN where undefined.
std::vector<double> cumulative_pearson(std::span<const double> x, std::span<const double> y,
                                       std::span<const double> times, double t0 = 0.0);

/// C(t) on the sliding window [t - width, t]; NaN where undefined.
std::vector<double> sliding_pearson(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> times, double width);

/// Partial trace over every site except (site_a, site_b).
TwoQubitState edge_reduced_state(const DensityMatrix& rho, int site_a, int site_b);

/// Wootters concurrence.
double concurrence(const TwoQubitState& rho);

/// Uhlmann fidelity Tr sqrt(sqrt(a) b sqrt(a)).
double fidelity(const TwoQubitState& a, const TwoQubitState& b);

double purity(const TwoQubitState& rho);
double purity(const DensityMatrix& rho);

CosineFit fit_cosine(std::span<const double> values, std::span<const double> times,
                     TimeWindow window, double omega_min = 1.0, double omega_max = 3.0);

}  // namespace qsync
