#include "qsync/chain_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qsync {

double ChainSpec::frequency(int site) const {
    if (site_frequencies.empty()) return base_frequency;
    return site_frequencies.at(static_cast<std::size_t>(site - 1));
}

bool ChainSpec::homogeneous() const {
    if (edge_detuning != 0.0) return false;
    return std::all_of(site_frequencies.begin(), site_frequencies.end(),
                       [&](double w) { return w == site_frequencies.front(); });
}

void ChainSpec::validate() const {
    if (n_sites < 2 || n_sites > 30)
        throw std::invalid_argument("n_sites must be in 2..30, got " + std::to_string(n_sites));
    if (!(coupling > 0.0)) throw std::invalid_argument("coupling must be positive");
    if (!site_frequencies.empty() && static_cast<int>(site_frequencies.size()) != n_sites)
        throw std::invalid_argument("site_frequencies must have n_sites entries");
    if (!(noise_strength >= 0.0)) throw std::invalid_argument("noise_strength must be >= 0");
    std::set<int> seen;
    for (int u : noise_sites) {
        if (u < 1 || u > n_sites)
            throw std::invalid_argument("noise site " + std::to_string(u) + " out of range");
        if (!seen.insert(u).second)
            throw std::invalid_argument("noise site " + std::to_string(u) + " listed twice");
    }
}

SectorBasis::SectorBasis(int n_sites, int n_excitations)
    : n_sites_(n_sites), n_excitations_(n_excitations) {
    if (n_sites < 1 || n_sites > 30) throw std::invalid_argument("n_sites must be in 1..30");
    if (n_excitations < 0 || n_excitations > n_sites)
        throw std::invalid_argument("excitation count " + std::to_string(n_excitations) +
                                    " outside 0.." + std::to_string(n_sites));
    if (n_excitations == 0) {
        configs_.push_back(0);
        return;
    }
    // Gosper's hack walks the fixed-popcount masks in increasing order.
    const std::uint64_t limit = std::uint64_t{1} << n_sites;
    std::uint64_t c = (std::uint64_t{1} << n_excitations) - 1;
    while (c < limit) {
        configs_.push_back(static_cast<Config>(c));
        const std::uint64_t lowest = c & (~c + 1);
        const std::uint64_t ripple = c + lowest;
        c = (((ripple ^ c) >> 2) / lowest) | ripple;
    }
}

int SectorBasis::index_of(Config c) const {
    auto it = std::lower_bound(configs_.begin(), configs_.end(), c);
    if (it == configs_.end() || *it != c) return -1;
    return static_cast<int>(it - configs_.begin());
}

SectorBasis build_sector_basis(int n_sites, int n_excitations) {
    return SectorBasis(n_sites, n_excitations);
}

SectorOperator build_hamiltonian(const ChainSpec& spec, const SectorBasis& basis) {
    spec.validate();
    if (basis.n_sites() != spec.n_sites)
        throw std::invalid_argument("sector basis has " + std::to_string(basis.n_sites()) +
                                    " sites, chain has " + std::to_string(spec.n_sites));
    const int n = spec.n_sites;
    const int d = basis.dim();
    SectorOperator op{basis, Eigen::MatrixXcd::Zero(d, d), true};
    for (int i = 0; i < d; ++i) {
        const Config c = basis.config(i);
        double diag = 0.0;
        for (int j = 1; j <= n; ++j) {
            diag += spec.frequency(j) * (SectorBasis::occupied(c, j) ? 1.0 : -1.0);
        }
        const double s1 = SectorBasis::occupied(c, 1) ? 1.0 : -1.0;
        const double sn = SectorBasis::occupied(c, n) ? 1.0 : -1.0;
        diag += 0.5 * spec.edge_detuning * (s1 - sn);
        op.entries(i, i) = diag;
        // flip-flop between sites j and j+1
        for (int j = 1; j < n; ++j) {
            if (SectorBasis::occupied(c, j) == SectorBasis::occupied(c, j + 1)) continue;
            const Config hopped = c ^ (Config{3} << (j - 1));
            op.entries(i, basis.index_of(hopped)) = spec.coupling;
        }
    }
    return op;
}

Eigen::VectorXd dephasing_diagonal(int site, const SectorBasis& basis) {
    if (site < 1 || site > basis.n_sites())
        throw std::invalid_argument("dephasing site " + std::to_string(site) + " out of range");
    Eigen::VectorXd v(basis.dim());
    for (int i = 0; i < basis.dim(); ++i) {
        v(i) = SectorBasis::occupied(basis.config(i), site) ? 1.0 : -1.0;
    }
    return v;
}

SectorOperator build_dephasing_operator(int site, const SectorBasis& basis) {
    const Eigen::VectorXd v = dephasing_diagonal(site, basis);
    return SectorOperator{basis, v.cast<cplx>().asDiagonal().toDenseMatrix(), true};
}

Eigen::VectorXd sine_profile(int n_sites, int k) {
    Eigen::VectorXd p(n_sites);
    const double norm = std::sqrt(2.0 / (n_sites + 1));
    for (int site = 1; site <= n_sites; ++site) {
        p(site - 1) = norm * std::sin(site * std::numbers::pi * k / (n_sites + 1));
    }
    return p;
}

namespace {

// Single-excitation eigenvalue of the homogeneous chain: the uniform
// diagonal omega*(2-N) plus the tight-binding band 2J cos(pi k/(N+1)).
EigenMode homogeneous_mode(int n_sites, double coupling, double omega, int k) {
    return EigenMode{k, sine_profile(n_sites, k),
                     omega * (2 - n_sites) +
                         2.0 * coupling * std::cos(std::numbers::pi * k / (n_sites + 1))};
}

}  // namespace

std::vector<EigenMode> eigenmodes(const ChainSpec& spec) {
    spec.validate();
    if (!spec.homogeneous())
        throw std::invalid_argument(
            "closed-form eigenmodes need uniform site frequencies and zero detuning");
    const double omega = spec.frequency(1);
    std::vector<EigenMode> modes;
    modes.reserve(static_cast<std::size_t>(spec.n_sites));
    for (int k = 1; k <= spec.n_sites; ++k) {
        modes.push_back(homogeneous_mode(spec.n_sites, spec.coupling, omega, k));
    }
    return modes;
}

std::optional<std::pair<EigenMode, EigenMode>> dfs_states(const ChainSpec& spec) {
    const int n = spec.n_sites;
    if ((n + 1) % 3 != 0) return std::nullopt;
    const int k = (n + 1) / 3;
    const double omega = spec.frequency(1);
    return std::make_pair(homogeneous_mode(n, spec.coupling, omega, k),
                          homogeneous_mode(n, spec.coupling, omega, 2 * k));
}

SyncVerdict check_sync_conditions(const ChainSpec& spec) {
    spec.validate();
    std::ostringstream why;
    bool ok = true;
    if (spec.n_sites < 5 || (spec.n_sites - 5) % 3 != 0) {
        ok = false;
        why << "chain length N=" << spec.n_sites << " is not of the form 5+3m; ";
    }
    if (spec.noise_sites.empty()) {
        ok = false;
        why << "no noise site; ";
    }
    for (int u : spec.noise_sites) {
        if (u % 3 != 0) {
            ok = false;
            why << "noise site u=" << u << " is not a multiple of 3; ";
        }
    }
    if (ok) {
        const auto pair = dfs_states(spec);
        for (const EigenMode* mode : {&pair->first, &pair->second}) {
            for (int u : spec.noise_sites) {
                const double amp = std::abs(mode->profile(u - 1));
                if (amp > 1e-12) {
                    ok = false;
                    why << "DFS mode k=" << mode->index << " has amplitude " << amp
                        << " at noise site " << u << "; ";
                }
            }
        }
    }
    if (ok) {
        why << "N=" << spec.n_sites << " = 5+3m and every noise site is a multiple of 3; DFS modes k="
            << (spec.n_sites + 1) / 3 << ", l=" << 2 * (spec.n_sites + 1) / 3
            << " vanish on the noise sites";
        if (!spec.homogeneous()) why << " (note: chain is detuned, conditions assume a homogeneous chain)";
    } else {
        std::string s = why.str();
        if (s.size() >= 2) s.resize(s.size() - 2);
        return {false, s};
    }
    return {true, why.str()};
}

}  // namespace qsync
