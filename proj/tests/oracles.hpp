#pragma once

// Independent reference implementations used only by the tests. They work in
// the full 2^N product space or with textbook algorithms and share no code
// with the library beyond basic Eigen containers.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <complex>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;

inline Mat pauli(char which) {
    Mat m = Mat::Zero(2, 2);
    // local order |0> (ground), |1> (excited); sigma^z |1> = +|1>
    switch (which) {
        case 'x': m(0, 1) = m(1, 0) = 1.0; break;
        case 'y': m(0, 1) = cplx(0, -1); m(1, 0) = cplx(0, 1); break;
        case 'z': m(0, 0) = -1.0; m(1, 1) = 1.0; break;
        default: m = Mat::Identity(2, 2);
    }
    return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Operator `op` on site s (1-based) of an n-site chain; site s is bit s-1 of
// the full-space index, so site 1 is the rightmost Kronecker factor.
inline Mat site_op(int n, int s, const Mat& op) {
    Mat out = Mat::Identity(1, 1);
    for (int site = n; site >= 1; --site) out = kron(out, site == s ? op : pauli('i'));
    return out;
}

// H = J/2 sum (XX + YY) + sum omega_j Z_j + (Delta/2)(Z_1 - Z_N) on 2^n states.
inline Mat full_hamiltonian(int n, double j, const std::vector<double>& omega, double delta) {
    const Eigen::Index dim = Eigen::Index{1} << n;
    Mat h = Mat::Zero(dim, dim);
    for (int s = 1; s < n; ++s) {
        h += 0.5 * j * site_op(n, s, pauli('x')) * site_op(n, s + 1, pauli('x'));
        h += 0.5 * j * site_op(n, s, pauli('y')) * site_op(n, s + 1, pauli('y'));
    }
    for (int s = 1; s <= n; ++s) h += omega[static_cast<std::size_t>(s - 1)] * site_op(n, s, pauli('z'));
    h += 0.5 * delta * (site_op(n, 1, pauli('z')) - site_op(n, n, pauli('z')));
    return h;
}

inline int popcount(unsigned x) {
    int c = 0;
    for (; x; x >>= 1) c += static_cast<int>(x & 1u);
    return c;
}

// Full-space indices with `k` excitations, ascending.
inline std::vector<unsigned> sector_indices(int n, int k) {
    std::vector<unsigned> out;
    for (unsigned x = 0; x < (1u << n); ++x)
        if (popcount(x) == k) out.push_back(x);
    return out;
}

inline Mat restrict_to(const Mat& full, const std::vector<unsigned>& idx) {
    const auto d = static_cast<Eigen::Index>(idx.size());
    Mat out(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) out(a, b) = full(idx[a], idx[b]);
    return out;
}

inline Mat embed(const Mat& sector, const std::vector<unsigned>& idx, int n) {
    const Eigen::Index dim = Eigen::Index{1} << n;
    Mat out = Mat::Zero(dim, dim);
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
            out(idx[a], idx[b]) = sector(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return out;
}

// Reduced state of sites (sa, sb) from a full-space density matrix; two-qubit
// index 2*occ(sa) + occ(sb).
inline Eigen::Matrix4cd partial_trace_full(const Mat& rho, int n, int sa, int sb) {
    Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
    const unsigned ma = 1u << (sa - 1), mb = 1u << (sb - 1);
    const unsigned dim = 1u << n;
    for (unsigned x = 0; x < dim; ++x) {
        for (unsigned y = 0; y < dim; ++y) {
            if ((x & ~(ma | mb)) != (y & ~(ma | mb))) continue;
            const int i = 2 * ((x & ma) ? 1 : 0) + ((x & mb) ? 1 : 0);
            const int k = 2 * ((y & ma) ? 1 : 0) + ((y & mb) ? 1 : 0);
            out(i, k) += rho(x, y);
        }
    }
    return out;
}

// Cyclic Jacobi eigendecomposition of a real symmetric matrix.
inline void jacobi(Eigen::MatrixXd a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
    const Eigen::Index n = a.rows();
    vectors = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = 0.5 * std::atan2(2.0 * a(p, q), a(q, q) - a(p, p));
                const double c = std::cos(theta), s = std::sin(theta);
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = vectors(k, p), vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    values = a.diagonal();
}

inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a) {
    Eigen::VectorXd w;
    Eigen::MatrixXd v;
    jacobi(a, w, v);
    const double floor = 16 * std::numeric_limits<double>::epsilon() * w.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = w(i) <= floor ? 0.0 : std::sqrt(w(i));
    return v * w.asDiagonal() * v.transpose();
}

// Uhlmann fidelity for real symmetric density matrices.
inline double fidelity_real(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd sa = sqrt_psd(a);
    Eigen::MatrixXd m = sa * b * sa;
    m = 0.5 * (m + m.transpose());
    Eigen::VectorXd w;
    Eigen::MatrixXd v;
    jacobi(m, w, v);
    const double floor = 16 * std::numeric_limits<double>::epsilon() * w.cwiseAbs().maxCoeff();
    double f = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) f += w(i) <= floor ? 0.0 : std::sqrt(w(i));
    return f;
}

// 2 |ad - bc| for psi = a|00> + b|01> + c|10> + d|11>.
inline double pure_concurrence(const Eigen::Vector4cd& psi) {
    return 2.0 * std::abs(psi(0) * psi(3) - psi(1) * psi(2));
}

// Closed form for X states (nonzero only on the diagonal and anti-diagonal).
inline double x_state_concurrence(const Eigen::Matrix4cd& r) {
    const double c1 = std::abs(r(0, 3)) - std::sqrt(r(1, 1).real() * r(2, 2).real());
    const double c2 = std::abs(r(1, 2)) - std::sqrt(r(0, 0).real() * r(3, 3).real());
    return std::max(0.0, 2.0 * std::max(c1, c2));
}

inline Mat random_density(std::mt19937_64& rng, Eigen::Index d, int rank = -1) {
    std::normal_distribution<double> g;
    const Eigen::Index r = rank > 0 ? rank : d;
    Mat a(d, r);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < r; ++k) a(i, k) = cplx(g(rng), g(rng));
    Mat rho = a * a.adjoint();
    return rho / rho.trace().real();
}

inline Mat random_unitary(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> g;
    Mat a(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < d; ++k) a(i, k) = cplx(g(rng), g(rng));
    Eigen::HouseholderQR<Mat> qr(a);
    return qr.householderQ() * Mat::Identity(d, d);
}

}  // namespace oracle
