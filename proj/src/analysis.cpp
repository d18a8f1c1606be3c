#include "qsync/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <Eigen/Eigenvalues>

#include "qsync/errors.hpp"
#include "qsync/format.hpp"

namespace qsync {

std::vector<double> magnetizations(const DensityMatrix& rho) {
    const SectorBasis& basis = rho.basis();
    std::vector<double> m(static_cast<std::size_t>(basis.n_sites()), 0.0);
    for (int i = 0; i < basis.dim(); ++i) {
        const double p = rho.entries()(i, i).real();
        const Config c = basis.config(i);
        for (int j = 1; j <= basis.n_sites(); ++j) {
            m[static_cast<std::size_t>(j - 1)] += SectorBasis::occupied(c, j) ? p : -p;
        }
    }
    return m;
}

MagnetizationSeries magnetizations(const EvolutionResult& result) {
    MagnetizationSeries out;
    out.times = result.times;
    if (result.states.empty()) return out;
    const auto n = static_cast<std::size_t>(result.states.front().basis().n_sites());
    out.values.assign(n, std::vector<double>(result.states.size()));
    for (std::size_t t = 0; t < result.states.size(); ++t) {
        const std::vector<double> m = magnetizations(result.states[t]);
        for (std::size_t j = 0; j < n; ++j) out.values[j][t] = m[j];
    }
    return out;
}

namespace {

bool in_window(double t, TimeWindow w) {
    const double eps = 1e-9 * std::max({1.0, std::abs(w.begin), std::abs(w.end)});
    return t >= w.begin - eps && t <= w.end + eps;
}

bool negligible_variance(double var, double mean) { return var <= 1e-24 * (1.0 + mean * mean); }

void require_same_length(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || a != c) throw std::invalid_argument("series and time grid lengths differ");
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y,
               std::span<const double> times, TimeWindow window) {
    require_same_length(x.size(), y.size(), times.size());
    std::size_t n = 0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!in_window(times[i], window)) continue;
        mx += x[i];
        my += y[i];
        ++n;
    }
    if (n < 3) throw DegenerateInput("Pearson window holds fewer than 3 samples");
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!in_window(times[i], window)) continue;
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double nn = static_cast<double>(n);
    if (negligible_variance(sxx / nn, mx) || negligible_variance(syy / nn, my))
        throw DegenerateInput("zero variance on the Pearson window");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> cumulative_pearson(std::span<const double> x, std::span<const double> y,
                                       std::span<const double> times, double t0) {
    std::vector<double> out(times.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < times.size(); ++i) {
        try {
            out[i] = pearson(x, y, times, {t0, times[i]});
        } catch (const DegenerateInput&) {
        }
    }
    return out;
}

std::vector<double> sliding_pearson(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> times, double width) {
    std::vector<double> out(times.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < times.size(); ++i) {
        try {
            out[i] = pearson(x, y, times, {times[i] - width, times[i]});
        } catch (const DegenerateInput&) {
        }
    }
    return out;
}

TwoQubitState edge_reduced_state(const DensityMatrix& rho, int site_a, int site_b) {
    const SectorBasis& basis = rho.basis();
    const int n = basis.n_sites();
    if (site_a < 1 || site_a > n || site_b < 1 || site_b > n)
        throw std::invalid_argument("reduced-state site out of range");
    if (site_a == site_b) throw std::invalid_argument("reduced-state sites must differ");
    const Config mask = (Config{1} << (site_a - 1)) | (Config{1} << (site_b - 1));

    // Configurations sharing the occupation of all traced-out sites.
    std::map<Config, std::vector<int>> groups;
    for (int i = 0; i < basis.dim(); ++i) groups[basis.config(i) & ~mask].push_back(i);

    auto local = [&](Config c) {
        return 2 * static_cast<int>(SectorBasis::occupied(c, site_a)) +
               static_cast<int>(SectorBasis::occupied(c, site_b));
    };
    TwoQubitState out = TwoQubitState::Zero();
    for (const auto& [rest, members] : groups) {
        for (int i : members) {
            for (int j : members) {
                out(local(basis.config(i)), local(basis.config(j))) += rho.entries()(i, j);
            }
        }
    }
    return out;
}

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> hermitian_eig(const TwoQubitState& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd>(0.5 * (m + m.adjoint()));
}

void require_psd(const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd>& es, const char* what) {
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-8)
        throw NumericalError(std::string(what) + " is not positive semidefinite: eigenvalue " +
                             format_number(lo));
}

// Eigenvalues below this fraction of the largest are rounding noise around zero.
constexpr double kZeroEigenvalue = 16 * std::numeric_limits<double>::epsilon();

Eigen::Vector4d flush_small(const Eigen::Vector4d& w) {
    const double floor = kZeroEigenvalue * w.cwiseAbs().maxCoeff();
    return w.unaryExpr([floor](double x) { return x <= floor ? 0.0 : x; });
}

Eigen::Matrix4cd psd_sqrt(const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd>& es) {
    const Eigen::Vector4d roots = flush_small(es.eigenvalues()).cwiseSqrt();
    return es.eigenvectors() * roots.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

double concurrence(const TwoQubitState& rho) {
    const auto es = hermitian_eig(rho);
    require_psd(es, "two-qubit state");
    Eigen::Matrix4cd flip = Eigen::Matrix4cd::Zero();  // sigma^y (x) sigma^y
    flip(0, 3) = -1.0;
    flip(1, 2) = 1.0;
    flip(2, 1) = 1.0;
    flip(3, 0) = -1.0;
    const Eigen::Matrix4cd tilde = flip * rho.conjugate() * flip;
    // sqrt(rho) tilde sqrt(rho) is Hermitian with the same spectrum as rho*tilde.
    const Eigen::Matrix4cd root = psd_sqrt(es);
    const Eigen::Matrix4cd r = root * tilde * root;
    Eigen::Vector4d kappa = hermitian_eig(r).eigenvalues();
    const double floor = kZeroEigenvalue * kappa.cwiseAbs().maxCoeff();
    for (int i = 0; i < 4; ++i)
        if (std::abs(kappa(i)) <= floor) kappa(i) = 0.0;
    std::sort(kappa.data(), kappa.data() + 4, std::greater<>());
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        double k = kappa(i);
        if (k < 0.0) {
            if (k < -1e-10)
                throw NumericalError("rho*rho~ has negative eigenvalue " + format_number(k));
            k = 0.0;
        }
        sum += (i == 0 ? 1.0 : -1.0) * std::sqrt(k);
    }
    return std::clamp(sum, 0.0, 1.0);
}

double fidelity(const TwoQubitState& a, const TwoQubitState& b) {
    const auto ea = hermitian_eig(a);
    const auto eb = hermitian_eig(b);
    require_psd(ea, "fidelity argument");
    require_psd(eb, "fidelity argument");
    const Eigen::Matrix4cd root = psd_sqrt(ea);
    const Eigen::Matrix4cd inner = root * (0.5 * (b + b.adjoint())) * root;
    const Eigen::Vector4d mu = flush_small(hermitian_eig(inner).eigenvalues());
    double f = 0.0;
    for (int i = 0; i < 4; ++i) f += std::sqrt(mu(i));
    return std::clamp(f, 0.0, 1.0);
}

double purity(const TwoQubitState& rho) { return rho.cwiseAbs2().sum(); }

double purity(const DensityMatrix& rho) { return rho.entries().cwiseAbs2().sum(); }

namespace {

struct LinearFit {
    Eigen::Vector3d coef = Eigen::Vector3d::Zero();  // cos, sin, const
    double rss = std::numeric_limits<double>::infinity();
};

LinearFit fit_at(const Eigen::VectorXd& t, const Eigen::VectorXd& y, double omega) {
    Eigen::MatrixXd a(t.size(), 3);
    a.col(0) = (omega * t).array().cos();
    a.col(1) = (omega * t).array().sin();
    a.col(2).setOnes();
    const Eigen::Matrix3d normal = a.transpose() * a;
    Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
    LinearFit fit;
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) return fit;
    fit.coef = ldlt.solve(a.transpose() * y);
    fit.rss = (a * fit.coef - y).squaredNorm();
    return fit;
}

double model_rss(const Eigen::VectorXd& t, const Eigen::VectorXd& y, const Eigen::Vector4d& p) {
    const Eigen::ArrayXd wt = p(3) * t.array();
    return (p(0) * wt.cos() + p(1) * wt.sin() + p(2) - y.array()).matrix().squaredNorm();
}

}  // namespace

CosineFit fit_cosine(std::span<const double> values, std::span<const double> times,
                     TimeWindow window, double omega_min, double omega_max) {
    if (values.size() != times.size())
        throw std::invalid_argument("series and time grid lengths differ");
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!in_window(times[i], window)) continue;
        ts.push_back(times[i]);
        ys.push_back(values[i]);
    }
    if (ts.size() < 10) throw std::invalid_argument("cosine fit needs at least 10 samples");
    const Eigen::Map<const Eigen::VectorXd> t(ts.data(), static_cast<Eigen::Index>(ts.size()));
    const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
    const double mean = y.mean();
    if (negligible_variance((y.array() - mean).square().mean(), mean))
        throw DegenerateInput("flat series: cosine fit is singular");

    // coarse scan, then Gauss-Newton on (a, b, c, omega)
    const int scan = 600;
    LinearFit best;
    double best_omega = omega_min;
    for (int i = 0; i <= scan; ++i) {
        const double omega = omega_min + (omega_max - omega_min) * i / scan;
        const LinearFit f = fit_at(t, y, omega);
        if (f.rss < best.rss) {
            best = f;
            best_omega = omega;
        }
    }
    if (!std::isfinite(best.rss)) throw DegenerateInput("singular normal equations in cosine fit");

    Eigen::Vector4d p(best.coef(0), best.coef(1), best.coef(2), best_omega);
    double rss = model_rss(t, y, p);
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::ArrayXd wt = p(3) * t.array();
        Eigen::MatrixXd jac(t.size(), 4);
        jac.col(0) = wt.cos().matrix();
        jac.col(1) = wt.sin().matrix();
        jac.col(2).setOnes();
        jac.col(3) = (t.array() * (-p(0) * wt.sin() + p(1) * wt.cos())).matrix();
        const Eigen::VectorXd r = (p(0) * wt.cos() + p(1) * wt.sin() + p(2) - y.array()).matrix();
        Eigen::LDLT<Eigen::Matrix4d> ldlt(jac.transpose() * jac);
        if (ldlt.info() != Eigen::Success) break;
        const Eigen::Vector4d step = ldlt.solve(-jac.transpose() * r);
        double scale = 1.0;
        bool improved = false;
        for (int k = 0; k < 40; ++k, scale *= 0.5) {
            const Eigen::Vector4d trial = p + scale * step;
            if (trial(3) < omega_min || trial(3) > omega_max) continue;
            const double trial_rss = model_rss(t, y, trial);
            if (trial_rss <= rss) {
                p = trial;
                improved = trial_rss < rss;
                rss = trial_rss;
                break;
            }
        }
        if (!improved || step.norm() < 1e-14 * (1.0 + p.norm())) break;
    }

    const double n = static_cast<double>(ts.size());
    CosineFit out;
    out.amplitude = std::hypot(p(0), p(1));
    out.phase = std::atan2(-p(1), p(0));
    out.offset = p(2);
    out.omega = p(3);
    out.rms_residual = std::sqrt(rss / n);

    Eigen::MatrixXd a(t.size(), 2);
    a.col(0) = (out.omega * t).array().cos();
    a.col(1).setOnes();
    const Eigen::Vector2d c = a.colPivHouseholderQr().solve(y);
    out.amplitude_zero_phase = c(0);
    out.offset_zero_phase = c(1);
    out.rms_residual_zero_phase = std::sqrt((a * c - y).squaredNorm() / n);
    return out;
}

}  // namespace qsync
