#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qsync {

using cplx = std::complex<double>;
using Config = std::uint32_t;  // occupation bitmask, bit j <-> site j+1

/// Physical description of one open XY chain experiment. Sites are 1-based.
/// The noise strength is stored as Gamma; gamma = Gamma / J is derived, so
/// the two can never disagree.
struct ChainSpec {
    int n_sites = 5;
    double coupling = 1.0;
    double base_frequency = 0.0;
    std::vector<double> site_frequencies;  // empty: base_frequency everywhere
    double edge_detuning = 0.0;
    std::vector<int> noise_sites;
    double noise_strength = 0.0;

    double reduced_noise() const { return noise_strength / coupling; }
    void set_reduced_noise(double gamma) { noise_strength = gamma * coupling; }

    double frequency(int site) const;
    bool homogeneous() const;
    void validate() const;
};

/// Fixed-excitation-number sector. Configurations are sorted ascending.
class SectorBasis {
public:
    SectorBasis(int n_sites, int n_excitations);

    int n_sites() const { return n_sites_; }
    int n_excitations() const { return n_excitations_; }
    int dim() const { return static_cast<int>(configs_.size()); }
    const std::vector<Config>& configs() const { return configs_; }
    Config config(int i) const { return configs_[static_cast<std::size_t>(i)]; }

    /// Index of a configuration, or -1 if it is not in this sector.
    int index_of(Config c) const;

    static bool occupied(Config c, int site) { return (c >> (site - 1)) & 1u; }

    friend bool operator==(const SectorBasis& a, const SectorBasis& b) {
        return a.n_sites_ == b.n_sites_ && a.n_excitations_ == b.n_excitations_;
    }

private:
    int n_sites_;
    int n_excitations_;
    std::vector<Config> configs_;
};

SectorBasis build_sector_basis(int n_sites, int n_excitations);

struct SectorOperator {
    SectorBasis basis;
    Eigen::MatrixXcd entries;
    bool hermitian = false;

    Eigen::SparseMatrix<cplx> sparse() const { return entries.sparseView(); }
};

SectorOperator build_hamiltonian(const ChainSpec& spec, const SectorBasis& basis);

/// sigma^z at site u restricted to the sector (diagonal, entries +-1).
SectorOperator build_dephasing_operator(int site, const SectorBasis& basis);

/// Diagonal of build_dephasing_operator as a real vector.
Eigen::VectorXd dephasing_diagonal(int site, const SectorBasis& basis);

struct EigenMode {
    int index = 0;              // k, 1-based
    Eigen::VectorXd profile;    // amplitude on sites 1..N
    double eigenvalue = 0.0;
};

/// Closed-form single-excitation mode sqrt(2/(N+1)) sin(n pi k/(N+1)).
Eigen::VectorXd sine_profile(int n_sites, int k);

/// Closed-form modes of the homogeneous chain in the single-excitation
/// sector. Throws std::invalid_argument for detuned or inhomogeneous chains.
std::vector<EigenMode> eigenmodes(const ChainSpec& spec);

/// Decoherence-free pair k = (N+1)/3, l = 2(N+1)/3 of the homogeneous chain,
/// absent unless 3 divides N+1. Only the chain length and coupling matter.
std::optional<std::pair<EigenMode, EigenMode>> dfs_states(const ChainSpec& spec);

struct SyncVerdict {
    bool satisfied = false;
    std::string diagnostic;
};

SyncVerdict check_sync_conditions(const ChainSpec& spec);

}  // namespace qsync
