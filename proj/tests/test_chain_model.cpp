#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qsync/chain_model.hpp"

using namespace qsync;

namespace {

ChainSpec chain(int n, std::vector<int> noise = {}, double gamma = 0.0) {
    ChainSpec c;
    c.n_sites = n;
    c.noise_sites = std::move(noise);
    c.set_reduced_noise(gamma);
    return c;
}

}  // namespace

TEST_CASE("sector basis matches brute-force enumeration") {
    for (int n = 2; n <= 8; ++n) {
        for (int k = 0; k <= n; ++k) {
            const SectorBasis basis(n, k);
            const auto expected = oracle::sector_indices(n, k);
            REQUIRE(basis.dim() == static_cast<int>(expected.size()));
            for (int i = 0; i < basis.dim(); ++i) {
                CHECK(basis.config(i) == expected[static_cast<std::size_t>(i)]);
                CHECK(basis.index_of(basis.config(i)) == i);
            }
        }
    }
}

TEST_CASE("two excitations on eight sites: 28 ordered subsets") {
    std::vector<unsigned> subsets;
    for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b) subsets.push_back((1u << a) | (1u << b));
    std::sort(subsets.begin(), subsets.end());
    const SectorBasis basis(8, 2);
    REQUIRE(basis.dim() == 28);
    for (int i = 0; i < 28; ++i) CHECK(basis.config(i) == subsets[static_cast<std::size_t>(i)]);
    CHECK(basis.index_of(0b111u) == -1);
    CHECK(SectorBasis(11, 3).dim() == 165);
}

TEST_CASE("sector Hamiltonian equals the full-space Hamiltonian restricted to the sector") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 2; n <= 6; ++n) {
        ChainSpec c = chain(n);
        c.coupling = 0.7 + 0.5 * u(rng);
        c.site_frequencies.resize(static_cast<std::size_t>(n));
        for (auto& w : c.site_frequencies) w = u(rng);
        c.edge_detuning = u(rng);
        const oracle::Mat full = oracle::full_hamiltonian(n, c.coupling, c.site_frequencies, c.edge_detuning);
        for (int k = 0; k <= n; ++k) {
            const SectorBasis basis(n, k);
            const SectorOperator h = build_hamiltonian(c, basis);
            const oracle::Mat ref = oracle::restrict_to(full, oracle::sector_indices(n, k));
            CHECK((h.entries - ref).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(h.hermitian);
        }
        // excitation number is conserved: no full-space element couples sectors
        for (unsigned x = 0; x < (1u << n); ++x)
            for (unsigned y = 0; y < (1u << n); ++y)
                if (oracle::popcount(x) != oracle::popcount(y)) CHECK(std::abs(full(x, y)) == 0.0);
    }
}

TEST_CASE("dephasing operator is sigma^z with +1 on occupied sites") {
    const SectorBasis basis(5, 2);
    for (int u = 1; u <= 5; ++u) {
        const Eigen::VectorXd v = dephasing_diagonal(u, basis);
        const oracle::Mat ref = oracle::restrict_to(oracle::site_op(5, u, oracle::pauli('z')),
                                                    oracle::sector_indices(5, 2));
        CHECK((Eigen::MatrixXcd(v.cast<cplx>().asDiagonal()) - ref).cwiseAbs().maxCoeff() == 0.0);
        CHECK((build_dephasing_operator(u, basis).entries - ref).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("closed-form eigenmodes solve the single-excitation problem") {
    for (int n : {2, 3, 5, 8, 11, 14}) {
        ChainSpec c = chain(n);
        c.coupling = 1.3;
        c.base_frequency = 0.4;
        const SectorOperator h = build_hamiltonian(c, SectorBasis(n, 1));
        const auto modes = eigenmodes(c);
        REQUIRE(static_cast<int>(modes.size()) == n);
        for (const auto& m : modes) {
            CHECK(std::abs(m.profile.norm() - 1.0) <= 1e-12);
            const Eigen::VectorXcd v = m.profile.cast<cplx>();
            CHECK((h.entries * v - m.eigenvalue * v).norm() <= 1e-10);
            const double expected = 0.4 * (2 - n) + 2.0 * 1.3 * std::cos(std::numbers::pi * m.index / (n + 1));
            CHECK(std::abs(m.eigenvalue - expected) <= 1e-12);
            for (int s = 1; s <= n; ++s)
                CHECK(std::abs(m.profile(s - 1) - std::sqrt(2.0 / (n + 1)) *
                                                      std::sin(std::numbers::pi * s * m.index / (n + 1))) <= 1e-12);
        }
    }
}

TEST_CASE("eigenmodes reject a detuned chain") {
    ChainSpec c = chain(5);
    c.edge_detuning = 0.2;
    CHECK_THROWS_AS(eigenmodes(c), std::invalid_argument);
}

TEST_CASE("DFS pair exists exactly when 3 divides N+1") {
    for (int n = 2; n <= 20; ++n) {
        const auto pair = dfs_states(chain(n));
        CHECK(pair.has_value() == ((n + 1) % 3 == 0));
        if (pair) {
            CHECK(pair->first.index == (n + 1) / 3);
            CHECK(pair->second.index == 2 * (n + 1) / 3);
            for (int u = 3; u <= n; u += 3) {
                CHECK(std::abs(pair->first.profile(u - 1)) <= 1e-12);
                CHECK(std::abs(pair->second.profile(u - 1)) <= 1e-12);
            }
        }
    }
    const auto p5 = dfs_states(chain(5));
    CHECK(std::abs(p5->first.eigenvalue - p5->second.eigenvalue - 2.0) <= 1e-12);
}

TEST_CASE("synchronization condition") {
    CHECK(check_sync_conditions(chain(5, {3}, 1.3)).satisfied);
    CHECK(check_sync_conditions(chain(8, {3, 6}, 0.5)).satisfied);
    CHECK(check_sync_conditions(chain(11, {3, 6, 9}, 0.3)).satisfied);
    CHECK(check_sync_conditions(chain(8, {6}, 0.5)).satisfied);
    CHECK_FALSE(check_sync_conditions(chain(5, {1}, 1.3)).satisfied);
    CHECK_FALSE(check_sync_conditions(chain(5, {2}, 1.3)).satisfied);
    CHECK_FALSE(check_sync_conditions(chain(6, {3}, 1.3)).satisfied);
    CHECK_FALSE(check_sync_conditions(chain(8, {3, 5}, 0.5)).satisfied);
    CHECK_FALSE(check_sync_conditions(chain(5, {}, 0.0)).satisfied);
    CHECK_FALSE(check_sync_conditions(chain(5, {2}, 1.3)).diagnostic.empty());
}

TEST_CASE("chain validation") {
    CHECK_THROWS(chain(1).validate());
    CHECK_THROWS(chain(5, {6}).validate());
    CHECK_THROWS(chain(5, {3, 3}).validate());
    ChainSpec bad = chain(5, {3}, 1.0);
    bad.site_frequencies = {1.0, 2.0};
    CHECK_THROWS(bad.validate());
    CHECK_NOTHROW(chain(5, {3}, 1.3).validate());
}
