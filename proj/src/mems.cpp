#include "qsync/mems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

namespace qsync {

void BellMixtureParams::validate() const {
    if (p1 < 0.0 || p2 < 0.0 || p3 < 0.0 || p4 < 0.0)
        throw std::invalid_argument("Bell mixture weights must be non-negative");
    if (std::abs(p1 + p2 + p3 + p4 - 1.0) > 1e-12)
        throw std::invalid_argument("Bell mixture weights must sum to 1");
}

TwoQubitState BellMixtureParams::assemble() const {
    TwoQubitState m = TwoQubitState::Zero();
    m(0, 0) = p2;
    m(3, 3) = p4;
    m(1, 1) = m(2, 2) = 0.5 * (p1 + p3);
    m(1, 2) = m(2, 1) = 0.5 * (p3 - p1);
    return m;
}

namespace {

void require_dfs_length(int n_sites) {
    if (n_sites < 2 || (n_sites + 1) % 3 != 0)
        throw std::invalid_argument("N=" + std::to_string(n_sites) +
                                    " has no DFS pair: N+1 must be divisible by 3");
}

}  // namespace

DfsVectors dfs_vectors_fullspace(int n_sites) {
    require_dfs_length(n_sites);
    DfsVectors out{SectorBasis(n_sites, 1), Eigen::VectorXcd(n_sites), Eigen::VectorXcd(n_sites)};
    const double norm = std::sqrt(2.0 / (n_sites + 1));
    for (int site = 1; site <= n_sites; ++site) {
        const int i = out.basis.index_of(Config{1} << (site - 1));
        out.first(i) = norm * std::sin(site * std::numbers::pi / 3.0);
        out.second(i) = norm * std::sin(2.0 * site * std::numbers::pi / 3.0);
    }
    return out;
}

Eigen::VectorXcd embed_full_space(const SectorBasis& basis, const Eigen::VectorXcd& v) {
    if (basis.n_sites() > 20) throw std::invalid_argument("full space too large to embed");
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(Eigen::Index{1} << basis.n_sites());
    for (int i = 0; i < basis.dim(); ++i) full(basis.config(i)) = v(i);
    return full;
}

MemsReference mems_reference(int n_sites) {
    require_dfs_length(n_sites);
    const double n = n_sites;
    const double scale = 3.0 / (2.0 * n + 2.0);
    MemsReference ref;
    ref.n_sites = n_sites;
    ref.matrix(0, 0) = scale * (2.0 * n - 4.0) / 3.0;
    ref.matrix(1, 1) = ref.matrix(2, 2) = scale;
    ref.matrix(1, 2) = ref.matrix(2, 1) = -scale;
    ref.params = {3.0 / (n + 1.0), (n - 2.0) / (n + 1.0), 0.0, 0.0};
    ref.concurrence = 3.0 / (n + 1.0);
    ref.purity = (9.0 + (n - 2.0) * (n - 2.0)) / ((n + 1.0) * (n + 1.0));
    ref.overlap = scale;
    ref.first_state_coherence_sign = std::sin(n * std::numbers::pi / 3.0) > 0.0 ? 1 : -1;
    return ref;
}

TwoQubitState main_text_mems() {
    TwoQubitState m = TwoQubitState::Zero();
    m(0, 0) = 1.0 / 3.0;
    m(1, 1) = m(2, 2) = 1.0 / 3.0;
    m(1, 2) = m(2, 1) = -1.0 / 6.0;
    return m;
}

double mixture_concurrence(const BellMixtureParams& params) {
    params.validate();
    return std::max(0.0, params.p1 - params.p3 - 2.0 * std::sqrt(params.p2 * params.p4));
}

std::pair<double, double> overlap_with_initial(int n_sites, std::span<const int> excited_sites) {
    const std::set<int> sites(excited_sites.begin(), excited_sites.end());
    for (int s : sites) {
        if (s < 1 || s > n_sites) throw std::invalid_argument("initial site out of range");
    }
    if (sites.size() != 1) return {0.0, 0.0};
    const DfsVectors dfs = dfs_vectors_fullspace(n_sites);
    const int i = dfs.basis.index_of(Config{1} << (*sites.begin() - 1));
    return {std::norm(dfs.first(i)), std::norm(dfs.second(i))};
}

}  // namespace qsync
