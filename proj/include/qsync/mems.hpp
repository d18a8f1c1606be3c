#pragma once

#include <span>
#include <utility>

#include "qsync/analysis.hpp"

namespace qsync {

/// rho = p1 |Psi-><Psi-| + p2 |00><00| + p3 |Psi+><Psi+| + p4 |11><11|.
struct BellMixtureParams {
    double p1 = 0.0;
    double p2 = 0.0;
    double p3 = 0.0;
    double p4 = 0.0;

    void validate() const;
    TwoQubitState assemble() const;
};

/// The two decoherence-free single-excitation states
/// sqrt(2/(N+1)) sum_n sin(n pi/3) |1>_n and sqrt(2/(N+1)) sum_n sin(2 n pi/3) |1>_n,
/// expressed in the single-excitation sector of the N-site chain.
struct DfsVectors {
    SectorBasis basis;
    Eigen::VectorXcd first;
    Eigen::VectorXcd second;
};

DfsVectors dfs_vectors_fullspace(int n_sites);

/// Embeds a sector vector into the 2^N product basis (bit j <-> site j+1).
Eigen::VectorXcd embed_full_space(const SectorBasis& basis, const Eigen::VectorXcd& v);

/// Analytic edge state of the DFS pair. `matrix` is the closed form
/// 3/(2N+2) [[0,0,0,0],[0,1,-1,0],[0,-1,1,0],[0,0,0,(2N-4)/3]] with the
/// (2N-4)/3 weight moved to |00>: a single excitation cannot occupy both
/// edges, so |11> carries no weight.
///
/// The partial trace of the second DFS state reproduces `matrix` for every
/// N. For the first DFS state the |01><10| coherence is
/// (2/(N+1)) sin(pi/3) sin(N pi/3), which is negative for N = 5 (mod 6) but
/// positive for N = 2 (mod 6); `first_state_coherence_sign` records it.
/// Concurrence and purity do not depend on that sign.
struct MemsReference {
    int n_sites = 0;
    TwoQubitState matrix = TwoQubitState::Zero();
    BellMixtureParams params;
    double concurrence = 0.0;
    double purity = 0.0;
    double overlap = 0.0;
    int first_state_coherence_sign = -1;
};

MemsReference mems_reference(int n_sites);

/// The main-text comparison state (entries 1/3 and -1/6) with its third
/// diagonal weight placed on |00>, like `MemsReference::matrix`.
TwoQubitState main_text_mems();

/// max(0, p1 - p3 - 2 sqrt(p2 p4)). Only exact when p1 >= p3; for p3 > p1
/// the formula clamps to zero.
double mixture_concurrence(const BellMixtureParams& params);

/// |<v_DFS,i|Psi(0)>|^2 for both DFS states and a computational product
/// state with the given sites excited.
std::pair<double, double> overlap_with_initial(int n_sites, std::span<const int> excited_sites);

}  // namespace qsync
