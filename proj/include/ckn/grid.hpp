#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ckn/params.hpp"

namespace ckn {

inline double sphere_area(int n) {
    // |S^{n}| for the unit sphere in R^{n+1}.
    return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) /
           std::tgamma(0.5 * (n + 1));
}

/// j-th eigenvalue of -Delta_theta on S^{d-1}: j(j+d-2).
inline double angular_eigenvalue(int j, int d) {
    if (j < 0) throw std::invalid_argument("angular_eigenvalue: j >= 0 required");
    return static_cast<double>(j) * (j + d - 2);
}

/// Discretization of the cylinder R x S^{d-1} for axisymmetric functions.
///
/// t-axis: uniform nodes t_min + i*h, i = 0..n_t-1, homogeneous truncation
/// boundary condition on solves. Angular factor: functions of theta_d only,
/// expanded in pole-normalized axisymmetric harmonics Pt_j (Pt_j(pole) = 1,
/// Pt_0 = 1, Pt_1 = theta_d). kappa_j = ||Pt_j||^2_{L2(S^{d-1})} carries the
/// angular normalization; the orthonormal basis is G_j = Pt_j / sqrt(kappa_j).
///
/// Quadrature: Gauss-Jacobi in x = cos(phi) with weight (1-x^2)^{(d-3)/2}
/// for d >= 3, uniform trapezoid on the circle for d = 2. Weights include
/// the full surface measure, so sum_k w_k = |S^{d-1}|.
struct Grid {
    double t_min = 0.0, t_max = 0.0;
    int n_t = 0;
    int d = 0;
    int max_mode = 0;
    int n_phi = 0;
    double h = 0.0;
    double tail_bound = 0.0;  // e^{-sqrt(lambda) * pad}, metadata

    std::vector<double> theta_nodes;   // x_k = cos(phi_k)
    std::vector<double> theta_weights; // sum to |S^{d-1}|
    Eigen::MatrixXd basis;             // basis(j,k) = Pt_j(x_k)
    std::vector<double> kappa;         // kappa_j = sum_k w_k Pt_j(x_k)^2

    double t(int i) const { return t_min + i * h; }

    Eigen::ArrayXd t_axis() const {
        Eigen::ArrayXd ts(n_t);
        for (int i = 0; i < n_t; ++i) ts[i] = t(i);
        return ts;
    }

    /// Gram matrix of the orthonormal harmonics under the stored quadrature.
    Eigen::MatrixXd harmonic_gram() const {
        const int J = max_mode + 1;
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(J, J);
        for (int a = 0; a < J; ++a)
            for (int b = 0; b < J; ++b) {
                long double s = 0.0L;
                for (int k = 0; k < n_phi; ++k)
                    s += static_cast<long double>(theta_weights[k]) * basis(a, k) * basis(b, k);
                g(a, b) = static_cast<double>(s) / std::sqrt(kappa[a] * kappa[b]);
            }
        return g;
    }
};

namespace detail {

// Gauss-Jacobi nodes/weights on [-1,1] with weight (1-x^2)^alpha, via
// Golub-Welsch on the symmetric Jacobi matrix.
inline void gauss_gegenbauer(int n, double alpha, std::vector<double>& x,
                             std::vector<double>& w) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        // Recurrence coefficients for Jacobi(alpha, alpha) polynomials.
        const double kk = k;
        const double num = kk * (kk + alpha) * (kk + alpha) * (kk + 2 * alpha);
        const double den = (2 * kk + 2 * alpha - 1) * (2 * kk + 2 * alpha) *
                           (2 * kk + 2 * alpha) * (2 * kk + 2 * alpha + 1);
        const double bk = std::sqrt(4.0 * num / den);
        J(k - 1, k) = bk;
        J(k, k - 1) = bk;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = std::sqrt(std::numbers::pi) *
                       std::tgamma(alpha + 1.0) / std::tgamma(alpha + 1.5);
    x.resize(n);
    w.resize(n);
    for (int k = 0; k < n; ++k) {
        x[k] = es.eigenvalues()[k];
        const double v = es.eigenvectors()(0, k);
        w[k] = mu0 * v * v;
    }
}

// Gegenbauer C_j^{lam}(x) for j = 0..jmax at a single point.
inline void gegenbauer_all(int jmax, double lam, double x, std::vector<double>& c) {
    c.resize(jmax + 1);
    c[0] = 1.0;
    if (jmax >= 1) c[1] = 2.0 * lam * x;
    for (int n = 1; n < jmax; ++n)
        c[n + 1] = (2.0 * (n + lam) * x * c[n] - (n + 2.0 * lam - 1.0) * c[n - 1]) / (n + 1.0);
}

}  // namespace detail

inline std::shared_ptr<const Grid> make_grid(const FsParameters& params,
                                             const std::vector<double>& centers,
                                             double pad, int n_t, int max_mode) {
    if (centers.empty()) throw std::invalid_argument("make_grid: centers must be nonempty");
    if (!(pad > 0.0)) throw std::invalid_argument("make_grid: pad must be positive");
    if (n_t < 3) throw std::invalid_argument("make_grid: n_t must be >= 3");
    if (max_mode < 0) throw std::invalid_argument("make_grid: max_mode must be >= 0");

    auto g = std::make_shared<Grid>();
    g->d = params.d;
    g->n_t = n_t;
    g->max_mode = max_mode;
    double lo = centers.front(), hi = centers.front();
    for (double c : centers) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    g->t_min = lo - pad;
    g->t_max = hi + pad;
    g->h = (g->t_max - g->t_min) / (n_t - 1);
    g->tail_bound = std::exp(-params.sqrt_lambda() * pad);
    g->n_phi = 2 * max_mode + 2;

    const int J = max_mode;
    if (params.d == 2) {
        // Uniform trapezoid on the circle; axisymmetric = even in phi,
        // modes are cos(j*phi).
        const int n = g->n_phi;
        g->theta_nodes.resize(n);
        g->theta_weights.resize(n);
        g->basis.resize(J + 1, n);
        for (int k = 0; k < n; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / n;
            g->theta_nodes[k] = std::cos(phi);
            g->theta_weights[k] = 2.0 * std::numbers::pi / n;
            for (int j = 0; j <= J; ++j) g->basis(j, k) = std::cos(j * phi);
        }
    } else {
        const double alpha = 0.5 * (params.d - 3);
        std::vector<double> x, w;
        detail::gauss_gegenbauer(g->n_phi, alpha, x, w);
        const double area_sub = sphere_area(params.d - 2);  // |S^{d-2}|
        g->theta_nodes = x;
        g->theta_weights.resize(g->n_phi);
        for (int k = 0; k < g->n_phi; ++k) g->theta_weights[k] = area_sub * w[k];

        g->basis.resize(J + 1, g->n_phi);
        const double lam = 0.5 * (params.d - 2);
        std::vector<double> c, c1;
        detail::gegenbauer_all(J, lam, 1.0, c1);  // values at the pole
        for (int k = 0; k < g->n_phi; ++k) {
            detail::gegenbauer_all(J, lam, x[k], c);
            for (int j = 0; j <= J; ++j) g->basis(j, k) = c[j] / c1[j];
        }
    }

    g->kappa.resize(J + 1);
    for (int j = 0; j <= J; ++j) {
        long double s = 0.0L;
        for (int k = 0; k < g->n_phi; ++k) {
            const long double bjk = g->basis(j, k);
            s += static_cast<long double>(g->theta_weights[k]) * bjk * bjk;
        }
        g->kappa[j] = static_cast<double>(s);
    }
    return g;
}

inline bool same_grid(const Grid& a, const Grid& b) {
    return a.t_min == b.t_min && a.t_max == b.t_max && a.n_t == b.n_t &&
           a.d == b.d && a.max_mode == b.max_mode && a.n_phi == b.n_phi;
}

}  // namespace ckn
