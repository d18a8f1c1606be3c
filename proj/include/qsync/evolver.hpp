#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qsync/chain_model.hpp"
#include "qsync/noise_synth.hpp"

namespace qsync {

/// Density matrix restricted to one excitation-number sector.
class DensityMatrix {
public:
    DensityMatrix(SectorBasis basis, Eigen::MatrixXcd entries);

    /// Computational product state with the listed sites excited (1-based).
    static DensityMatrix product_state(int n_sites, std::span<const int> excited_sites);
    static DensityMatrix pure(SectorBasis basis, const Eigen::VectorXcd& psi);

    const SectorBasis& basis() const { return basis_; }
    const Eigen::MatrixXcd& entries() const { return entries_; }
    int dim() const { return basis_.dim(); }

    double trace_error() const;        // |Tr rho - 1|
    double hermiticity_error() const;  // max |rho - rho^dagger|
    double min_eigenvalue() const;

    /// Throws NumericalError when a tolerance is exceeded.
    void check(double hermitian_tol = 1e-10, double trace_tol = 1e-10,
               double psd_tol = 1e-8) const;

private:
    SectorBasis basis_;
    Eigen::MatrixXcd entries_;
};

enum class EvolutionMethod { lindblad, trajectory_ensemble };

struct EvolutionResult {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    EvolutionMethod method = EvolutionMethod::lindblad;
    int n_trajectories = 0;
};

/// rho -> -i[H, rho] + Gamma sum_u (V_u rho V_u - rho), V_u = sigma^z_u.
/// Since every V_u is diagonal with entries +-1, the dissipator is an
/// elementwise rate mask on rho.
class LindbladGenerator {
public:
    LindbladGenerator(const ChainSpec& spec, const SectorBasis& basis);

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const;

    /// Same map for Hermitian rho = A + iB (A symmetric, B antisymmetric)
    /// and a real Hamiltonian: one sparse product per part plus a transpose.
    void apply_split(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& da,
                     Eigen::MatrixXd& db) const;
    bool real_hamiltonian() const { return real_hamiltonian_; }

    /// Dense superoperator acting on column-major vec(rho).
    Eigen::MatrixXcd superoperator() const;

    const SectorBasis& basis() const { return basis_; }
    const Eigen::SparseMatrix<cplx>& hamiltonian() const { return hamiltonian_; }
    /// Largest |H_ii - H_jj| + row hopping weight, a bound used for step control.
    double spectral_scale() const { return spectral_scale_; }

private:
    SectorBasis basis_;
    Eigen::SparseMatrix<cplx> hamiltonian_;
    Eigen::SparseMatrix<double> hamiltonian_real_;
    bool real_hamiltonian_ = false;
    Eigen::MatrixXd rates_;
    double spectral_scale_ = 0.0;
};

struct LindbladOptions {
    double dt = 0.0;                   // 0: min(0.002/J, 0.1/Gamma)
    bool check_convergence = true;     // step halving on the first interval
    double convergence_tol = 1e-7;
    int max_halvings = 8;
    bool check_invariants = true;
};

using SnapshotSink = std::function<void(double t, const DensityMatrix& rho)>;

/// Fixed-step RK4 integration of the master equation; calls sink at
/// t = 0, dt_sample, 2 dt_sample, ... <= t_final.
void lindblad_stream(const ChainSpec& spec, const DensityMatrix& initial, double t_final,
                     double dt_sample, const SnapshotSink& sink, const LindbladOptions& opts = {});

EvolutionResult lindblad_evolve(const ChainSpec& spec, const DensityMatrix& initial,
                                double t_final, double dt_sample,
                                const LindbladOptions& opts = {});

struct TrajectoryOptions {
    int workers = 1;
    int min_substeps_per_pulse = 4;
};

/// Averages pure-state evolutions under H0 + H1 + sum_u xi_u(t) sigma^z_u.
/// ensembles[s] holds the trajectories for spec.noise_sites[s]; all sites
/// need the same trajectory count. spec.noise_strength is not used: the
/// noise amplitude lives in the trajectories. A mixed initial state is
/// unravelled into its eigenvectors.
EvolutionResult trajectory_evolve(const ChainSpec& spec, const DensityMatrix& initial,
                                  const std::vector<std::vector<NoiseTrajectory>>& ensembles,
                                  double t_final, double dt_sample,
                                  const TrajectoryOptions& opts = {});

/// Dense-superoperator cap on the sector dimension: d^2 <= 4096.
inline constexpr int kMaxSuperoperatorSize = 4096;

std::vector<cplx> liouvillian_spectrum(const ChainSpec& spec, const SectorBasis& basis);

struct SpectrumSummary {
    int kernel_dim = 0;
    /// Positive imaginary parts of non-kernel eigenvalues on the imaginary axis.
    std::vector<double> oscillation_frequencies;
    /// Largest real part among the remaining (decaying) eigenvalues.
    double slowest_decay = 0.0;
    bool has_decaying = false;
};

SpectrumSummary classify_spectrum(std::span<const cplx> eigenvalues, double tol = 1e-8);

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// Number of snapshots at multiples of dt_sample up to t_final.
std::size_t snapshot_count(double t_final, double dt_sample);

}  // namespace qsync
