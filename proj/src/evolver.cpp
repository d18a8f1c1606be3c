#include "qsync/evolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <Eigen/Eigenvalues>

#include "qsync/errors.hpp"
#include "qsync/format.hpp"
#include "qsync/parallel.hpp"

namespace qsync {

DensityMatrix::DensityMatrix(SectorBasis basis, Eigen::MatrixXcd entries)
    : basis_(std::move(basis)), entries_(std::move(entries)) {
    if (entries_.rows() != basis_.dim() || entries_.cols() != basis_.dim())
        throw std::invalid_argument("density matrix shape does not match its sector basis");
}

DensityMatrix DensityMatrix::product_state(int n_sites, std::span<const int> excited_sites) {
    std::set<int> sites(excited_sites.begin(), excited_sites.end());
    if (sites.size() != excited_sites.size())
        throw std::invalid_argument("initial excitation sites must be distinct");
    Config c = 0;
    for (int s : sites) {
        if (s < 1 || s > n_sites)
            throw std::invalid_argument("initial excitation site " + std::to_string(s) +
                                        " out of range");
        c |= Config{1} << (s - 1);
    }
    SectorBasis basis(n_sites, static_cast<int>(sites.size()));
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(basis.dim(), basis.dim());
    const int i = basis.index_of(c);
    rho(i, i) = 1.0;
    return DensityMatrix(std::move(basis), std::move(rho));
}

DensityMatrix DensityMatrix::pure(SectorBasis basis, const Eigen::VectorXcd& psi) {
    const double norm = psi.norm();
    if (norm == 0.0) throw std::invalid_argument("zero state vector");
    const Eigen::VectorXcd v = psi / norm;
    return DensityMatrix(std::move(basis), v * v.adjoint());
}

double DensityMatrix::trace_error() const { return std::abs(entries_.trace() - cplx(1.0, 0.0)); }

double DensityMatrix::hermiticity_error() const {
    if (entries_.size() == 0) return 0.0;
    return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
    const Eigen::MatrixXcd h = 0.5 * (entries_ + entries_.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void DensityMatrix::check(double hermitian_tol, double trace_tol, double psd_tol) const {
    if (const double e = hermiticity_error(); e > hermitian_tol)
        throw NumericalError("density matrix not Hermitian: deviation " + format_number(e));
    if (const double e = trace_error(); e > trace_tol)
        throw NumericalError("density matrix trace deviates from 1 by " + format_number(e));
    if (const double e = min_eigenvalue(); e < -psd_tol)
        throw NumericalError("density matrix has negative eigenvalue " + format_number(e));
}

LindbladGenerator::LindbladGenerator(const ChainSpec& spec, const SectorBasis& basis)
    : basis_(basis) {
    const SectorOperator h = build_hamiltonian(spec, basis);
    hamiltonian_ = h.sparse();
    const int d = basis.dim();
    rates_ = Eigen::MatrixXd::Zero(d, d);
    for (int u : spec.noise_sites) {
        const Eigen::VectorXd v = dephasing_diagonal(u, basis);
        rates_ += spec.noise_strength * (v * v.transpose() - Eigen::MatrixXd::Ones(d, d));
    }
    const Eigen::VectorXd diag = h.entries.diagonal().real();
    const double hop = (h.entries - Eigen::MatrixXcd(diag.cast<cplx>().asDiagonal()))
                           .cwiseAbs()
                           .rowwise()
                           .sum()
                           .maxCoeff();
    spectral_scale_ = (d > 0 ? diag.maxCoeff() - diag.minCoeff() : 0.0) + 2.0 * hop;
    real_hamiltonian_ = h.entries.imag().cwiseAbs().maxCoeff() == 0.0;
    hamiltonian_real_ = h.entries.real().sparseView();
}

namespace {

// z = x * h for sparse column-major h, as contiguous column updates.
void right_multiply(const Eigen::MatrixXd& x, const Eigen::SparseMatrix<double>& h, Eigen::MatrixXd& z) {
    z.resize(x.rows(), h.cols());
    for (Eigen::Index k = 0; k < h.outerSize(); ++k) {
        auto col = z.col(k);
        col.setZero();
        for (Eigen::SparseMatrix<double>::InnerIterator it(h, k); it; ++it)
            col.noalias() += it.value() * x.col(it.row());
    }
}

}  // namespace

void LindbladGenerator::apply_split(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    Eigen::MatrixXd& da, Eigen::MatrixXd& db) const {
    // -i[H, A + iB] = [H, B] - i[H, A]. With H symmetric, Z = XH gives
    // [H, A] = Z^T - Z for symmetric A and [H, B] = -(Z + Z^T) for antisymmetric B.
    Eigen::MatrixXd z;
    right_multiply(b, hamiltonian_real_, z);
    da = -(z + z.transpose());
    da += rates_.cwiseProduct(a);
    right_multiply(a, hamiltonian_real_, z);
    db = z - z.transpose();
    db += rates_.cwiseProduct(b);
}

Eigen::MatrixXcd LindbladGenerator::apply(const Eigen::MatrixXcd& rho) const {
    const cplx minus_i(0.0, -1.0);
    Eigen::MatrixXcd out = hamiltonian_ * rho;
    out -= rho * hamiltonian_;
    out *= minus_i;
    out += rates_.cast<cplx>().cwiseProduct(rho);
    return out;
}

Eigen::MatrixXcd LindbladGenerator::superoperator() const {
    const int d = basis_.dim();
    if (d * d > kMaxSuperoperatorSize)
        throw std::invalid_argument("sector dimension " + std::to_string(d) +
                                    " exceeds the dense superoperator cap (d^2 <= " +
                                    std::to_string(kMaxSuperoperatorSize) + ")");
    const Eigen::MatrixXcd h(hamiltonian_);
    const cplx i_unit(0.0, 1.0);
    Eigen::MatrixXcd sup = Eigen::MatrixXcd::Zero(d * d, d * d);
    auto vec = [d](int a, int b) { return a + d * b; };
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            const int row = vec(a, b);
            for (int c = 0; c < d; ++c) {
                sup(row, vec(c, b)) += -i_unit * h(a, c);  // -i H rho
                sup(row, vec(a, c)) += i_unit * h(c, b);   // +i rho H
            }
            sup(row, row) += rates_(a, b);
        }
    }
    return sup;
}

std::size_t snapshot_count(double t_final, double dt_sample) {
    return static_cast<std::size_t>(std::floor(t_final / dt_sample * (1.0 + 1e-12) + 1e-9)) + 1;
}

namespace {

void validate_times(double t_final, double dt_sample) {
    if (!(t_final > 0.0)) throw std::invalid_argument("t_final must be positive");
    if (!(dt_sample > 0.0)) throw std::invalid_argument("dt_sample must be positive");
}

Eigen::MatrixXcd rk4(const LindbladGenerator& gen, Eigen::MatrixXcd rho, int steps, double h) {
    if (gen.real_hamiltonian()) {
        // Hermitian input stays Hermitian; integrate real and imaginary parts.
        const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
        Eigen::MatrixXd a = herm.real(), b = herm.imag();
        Eigen::MatrixXd ka1, kb1, ka2, kb2, ka3, kb3, ka4, kb4, ta, tb;
        for (int s = 0; s < steps; ++s) {
            gen.apply_split(a, b, ka1, kb1);
            ta = a + (0.5 * h) * ka1;
            tb = b + (0.5 * h) * kb1;
            gen.apply_split(ta, tb, ka2, kb2);
            ta = a + (0.5 * h) * ka2;
            tb = b + (0.5 * h) * kb2;
            gen.apply_split(ta, tb, ka3, kb3);
            ta = a + h * ka3;
            tb = b + h * kb3;
            gen.apply_split(ta, tb, ka4, kb4);
            a += (h / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
            b += (h / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
        }
        Eigen::MatrixXcd out(a.rows(), a.cols());
        out.real() = a;
        out.imag() = b;
        return out;
    }
    for (int s = 0; s < steps; ++s) {
        const Eigen::MatrixXcd k1 = gen.apply(rho);
        const Eigen::MatrixXcd k2 = gen.apply(rho + (0.5 * h) * k1);
        const Eigen::MatrixXcd k3 = gen.apply(rho + (0.5 * h) * k2);
        const Eigen::MatrixXcd k4 = gen.apply(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return rho;
}

void check_snapshot(const DensityMatrix& rho, double t) {
    // PSD drift is monitored at 1e-8 by callers; only a 1e-6 violation aborts.
    try {
        rho.check(1e-10, 1e-10, 1e-6);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at t=" + format_number(t));
    }
}

}  // namespace

void lindblad_stream(const ChainSpec& spec, const DensityMatrix& initial, double t_final,
                     double dt_sample, const SnapshotSink& sink, const LindbladOptions& opts) {
    spec.validate();
    validate_times(t_final, dt_sample);
    initial.check(1e-10, 1e-10, 1e-8);
    const LindbladGenerator gen(spec, initial.basis());

    double dt = opts.dt;
    if (dt <= 0.0) {
        dt = 0.002 / spec.coupling;
        if (spec.noise_strength > 0.0) dt = std::min(dt, 0.1 / spec.noise_strength);
        if (gen.spectral_scale() > 0.0) dt = std::min(dt, 0.1 / gen.spectral_scale());
    }
    int steps = std::max(1, static_cast<int>(std::ceil(dt_sample / dt - 1e-9)));

    if (opts.check_convergence) {
        int halvings = 0;
        while (true) {
            const Eigen::MatrixXcd coarse = rk4(gen, initial.entries(), steps, dt_sample / steps);
            const Eigen::MatrixXcd fine =
                rk4(gen, initial.entries(), 2 * steps, dt_sample / (2 * steps));
            const double change = (coarse - fine).cwiseAbs().maxCoeff();
            if (change <= opts.convergence_tol) break;
            if (++halvings > opts.max_halvings)
                throw NumericalError("RK4 did not converge under step halving: change " +
                                     format_number(change));
            steps *= 2;
        }
    }

    const double h = dt_sample / steps;
    const std::size_t count = snapshot_count(t_final, dt_sample);
    Eigen::MatrixXcd rho = initial.entries();
    sink(0.0, initial);
    for (std::size_t i = 1; i < count; ++i) {
        rho = rk4(gen, std::move(rho), steps, h);
        const double t = static_cast<double>(i) * dt_sample;
        DensityMatrix snap(initial.basis(), rho);
        if (opts.check_invariants) check_snapshot(snap, t);
        sink(t, snap);
    }
}

EvolutionResult lindblad_evolve(const ChainSpec& spec, const DensityMatrix& initial,
                                double t_final, double dt_sample, const LindbladOptions& opts) {
    EvolutionResult result;
    result.method = EvolutionMethod::lindblad;
    lindblad_stream(
        spec, initial, t_final, dt_sample,
        [&](double t, const DensityMatrix& rho) {
            result.times.push_back(t);
            result.states.push_back(rho);
        },
        opts);
    return result;
}

namespace {

struct Segment {
    double length = 0.0;
    int pulse = 0;
    int substeps = 1;
    int snapshot = -1;  // snapshot index reached at the end of the segment, or -1
};

std::vector<Segment> build_schedule(double pulse_width, bool noisy, std::size_t snapshots,
                                    double dt_sample, int min_substeps) {
    std::vector<Segment> out;
    double t = 0.0;
    int pulse = 0;
    const double max_step = noisy ? pulse_width / min_substeps : std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < snapshots; ++i) {
        const double ts = static_cast<double>(i) * dt_sample;
        while (true) {
            const double pb = noisy ? (pulse + 1) * pulse_width : std::numeric_limits<double>::infinity();
            const double eps = 1e-12 * std::max(1.0, ts);
            Segment seg;
            seg.pulse = pulse;
            double end = 0.0;
            if (std::abs(pb - ts) <= eps) {
                end = ts;
                seg.snapshot = static_cast<int>(i);
                ++pulse;
            } else if (pb < ts) {
                end = pb;
                ++pulse;
            } else {
                end = ts;
                seg.snapshot = static_cast<int>(i);
            }
            seg.length = end - t;
            seg.substeps = std::isfinite(max_step)
                               ? std::max(1, static_cast<int>(std::ceil(seg.length / max_step - 1e-9)))
                               : 1;
            t = end;
            if (seg.length > 0.0 || seg.snapshot >= 0) out.push_back(seg);
            if (seg.snapshot >= 0) break;
        }
    }
    return out;
}

}  // namespace

EvolutionResult trajectory_evolve(const ChainSpec& spec, const DensityMatrix& initial,
                                  const std::vector<std::vector<NoiseTrajectory>>& ensembles,
                                  double t_final, double dt_sample, const TrajectoryOptions& opts) {
    spec.validate();
    validate_times(t_final, dt_sample);
    initial.check(1e-10, 1e-10, 1e-8);
    if (ensembles.size() != spec.noise_sites.size())
        throw std::invalid_argument("need one trajectory ensemble per noise site");

    const bool noisy = !ensembles.empty();
    std::size_t n_traj = 1;
    double pulse_width = 0.0;
    if (noisy) {
        n_traj = ensembles.front().size();
        if (n_traj == 0) throw std::invalid_argument("empty trajectory ensemble");
        pulse_width = ensembles.front().front().pulse_width;
        for (const auto& ens : ensembles) {
            if (ens.size() != n_traj)
                throw std::invalid_argument("noise sites have different trajectory counts");
            for (const auto& tr : ens) {
                if (tr.pulse_width != pulse_width)
                    throw std::invalid_argument("trajectories use different pulse widths");
                if (tr.duration() < t_final * (1.0 - 1e-12))
                    throw std::invalid_argument("noise trajectory of duration " +
                                                format_number(tr.duration()) +
                                                " is exhausted before t_final=" +
                                                format_number(t_final));
            }
        }
    }

    const SectorBasis& basis = initial.basis();
    const int d = basis.dim();
    const Eigen::MatrixXcd h = build_hamiltonian(spec, basis).entries;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
    const Eigen::MatrixXcd q = eig.eigenvectors();
    const Eigen::MatrixXcd q_adj = q.adjoint();
    const Eigen::VectorXd energies = eig.eigenvalues();

    std::vector<Eigen::VectorXd> site_diag;
    for (int u : spec.noise_sites) site_diag.push_back(dephasing_diagonal(u, basis));

    // Unravel rho(0) into weighted pure components.
    std::vector<std::pair<double, Eigen::VectorXcd>> components;
    {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> init_eig(initial.entries());
        for (int i = 0; i < d; ++i) {
            const double p = init_eig.eigenvalues()(i);
            if (p > 1e-14) components.emplace_back(p, init_eig.eigenvectors().col(i));
        }
    }

    const std::size_t snapshots = snapshot_count(t_final, dt_sample);
    const std::vector<Segment> schedule =
        build_schedule(pulse_width, noisy, snapshots, dt_sample, opts.min_substeps_per_pulse);
    // exp(-i H h/2) in the eigenbasis, one per segment
    std::vector<Eigen::VectorXcd> half_phase(schedule.size());
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const double step = schedule[s].length / schedule[s].substeps;
        half_phase[s] = (energies.cast<cplx>() * cplx(0.0, -0.5 * step)).array().exp().matrix();
    }

    const std::size_t n_blocks = std::min<std::size_t>(64, n_traj);
    std::vector<std::vector<Eigen::MatrixXcd>> block_sums(
        n_blocks, std::vector<Eigen::MatrixXcd>(snapshots, Eigen::MatrixXcd::Zero(d, d)));

    auto run_block = [&](std::size_t b) {
        const std::size_t begin = b * n_traj / n_blocks;
        const std::size_t end = (b + 1) * n_traj / n_blocks;
        auto& acc = block_sums[b];
        Eigen::VectorXd kick(d);
        for (std::size_t m = begin; m < end; ++m) {
            for (const auto& [weight, psi0] : components) {
                Eigen::VectorXcd psi = psi0;
                acc[0] += weight * psi * psi.adjoint();
                for (std::size_t s = 0; s < schedule.size(); ++s) {
                    const Segment& seg = schedule[s];
                    const double step = seg.length / seg.substeps;
                    kick.setZero();
                    for (std::size_t k = 0; k < site_diag.size(); ++k) {
                        const auto& amps = ensembles[k][m].amplitudes;
                        const double xi =
                            amps[std::min(static_cast<std::size_t>(seg.pulse), amps.size() - 1)];
                        kick += xi * site_diag[k];
                    }
                    const Eigen::VectorXcd kick_phase =
                        (kick.cast<cplx>() * cplx(0.0, -step)).array().exp().matrix();
                    for (int n = 0; n < seg.substeps; ++n) {
                        Eigen::VectorXcd phi = half_phase[s].cwiseProduct(q_adj * psi);
                        psi = q * phi;
                        if (noisy) psi = psi.cwiseProduct(kick_phase);
                        phi = half_phase[s].cwiseProduct(q_adj * psi);
                        psi = q * phi;
                    }
                    if (seg.snapshot >= 0) {
                        const double drift = std::abs(psi.squaredNorm() - 1.0);
                        if (drift > 1e-8)
                            throw NumericalError("trajectory " + std::to_string(m) +
                                                 " lost unitarity: norm drift " +
                                                 format_number(drift));
                        acc[static_cast<std::size_t>(seg.snapshot)] += weight * psi * psi.adjoint();
                    }
                }
            }
        }
    };
    parallel_for(n_blocks, opts.workers, run_block);

    // Fixed-shape pairwise reduction over blocks: independent of thread timing.
    for (std::size_t stride = 1; stride < n_blocks; stride *= 2) {
        for (std::size_t b = 0; b + stride < n_blocks; b += 2 * stride) {
            for (std::size_t i = 0; i < snapshots; ++i) block_sums[b][i] += block_sums[b + stride][i];
        }
    }

    EvolutionResult result;
    result.method = EvolutionMethod::trajectory_ensemble;
    result.n_trajectories = static_cast<int>(n_traj);
    const double inv = 1.0 / static_cast<double>(n_traj);
    for (std::size_t i = 0; i < snapshots; ++i) {
        result.times.push_back(static_cast<double>(i) * dt_sample);
        result.states.emplace_back(basis, block_sums[0][i] * inv);
    }
    return result;
}

std::vector<cplx> liouvillian_spectrum(const ChainSpec& spec, const SectorBasis& basis) {
    spec.validate();
    const LindbladGenerator gen(spec, basis);
    const Eigen::MatrixXcd sup = gen.superoperator();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(sup, false);
    if (es.info() != Eigen::Success) throw NumericalError("Liouvillian eigensolve failed");
    std::vector<cplx> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return out;
}

SpectrumSummary classify_spectrum(std::span<const cplx> eigenvalues, double tol) {
    SpectrumSummary s;
    s.slowest_decay = -std::numeric_limits<double>::infinity();
    for (const cplx z : eigenvalues) {
        if (std::abs(z) <= tol) {
            ++s.kernel_dim;
        } else if (std::abs(z.real()) <= tol) {
            if (z.imag() > 0.0) s.oscillation_frequencies.push_back(z.imag());
        } else {
            s.has_decaying = true;
            s.slowest_decay = std::max(s.slowest_decay, z.real());
        }
    }
    std::sort(s.oscillation_frequencies.begin(), s.oscillation_frequencies.end());
    if (!s.has_decaying) s.slowest_decay = 0.0;
    return s;
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    const Eigen::MatrixXcd diff = a - b;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (diff + diff.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace qsync
