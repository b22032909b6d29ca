#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ckn/calculus.hpp"

namespace ckn {

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Linearized operator around the bubble sum U = sum alpha_j Psi_j:
/// L g = -dtt g - Delta_theta g + Lambda g - p U^{p-1} g.
/// U is mode 0, so the potential acts on each harmonic mode independently.
inline Field apply_L(const FsParameters& params, std::span<const BubbleSpec> specs,
                     const Field& g) {
    const Grid& gr = *g.grid;
    Eigen::ArrayXd u = bubble_sum_profile(specs, gr);
    Eigen::ArrayXd pot(gr.n_t);
    for (int i = 0; i < gr.n_t; ++i)
        pot[i] = params.p * std::pow(u[i], params.p - 1.0);
    Field out(g.grid);
    for (int j = 0; j < g.n_modes(); ++j) {
        const double shift = angular_eigenvalue(j, params.d) + params.lambda_fs;
        out.modes[j] = detail::apply_mode_operator(g.modes[j], gr.h, shift, &pot);
    }
    return out;
}

enum class ConstraintKind { trivial_kernel, nontrivial_kernel, bubble };

/// One orthogonality constraint <field, gamma> = 0 (weighted H1 product on
/// the constraint's mode) together with the Lagrange-multiplier carrier that
/// is added to the right hand side of the solve.
struct Constraint {
    ConstraintKind kind;
    int bubble = 0;  // index into the spec list
    int mode = 0;    // harmonic mode the constraint lives on
    Eigen::ArrayXd field;    // t-profile of the constraint function
    Eigen::ArrayXd carrier;  // t-profile of the multiplier carrier
    std::string name;
};

struct ConstraintSet {
    std::vector<Constraint> items;
};

/// Standard constraint set around a bubble family. Trivial kernels dtPsi_j
/// live on mode 0 with carriers Psi_j^{p-1} dtPsi_j; nontrivial kernels
/// w_{j,d} live on mode 1 with carriers Psi_j^{p-1} w_{j,d}. The bubble
/// constraints Psi_j (carriers Psi_j^p) are optional and off by default.
inline ConstraintSet make_constraint_set(const FsParameters& params,
                                         std::span<const BubbleSpec> specs,
                                         std::shared_ptr<const Grid> grid,
                                         bool trivial = true, bool nontrivial = true,
                                         bool bubble = false) {
    ConstraintSet cs;
    for (size_t j = 0; j < specs.size(); ++j) {
        const double s = specs[j].center;
        Eigen::ArrayXd psi(grid->n_t), dpsi(grid->n_t), w(grid->n_t);
        for (int i = 0; i < grid->n_t; ++i) {
            const double t = grid->t(i) - s;
            psi[i] = detail::psi_value(params, t);
            dpsi[i] = -params.sqrt_lambda() * std::tanh(0.5 * params.sqrt_lambda() *
                                                        (params.p - 1.0) * t) * psi[i];
            w[i] = detail::psi_pow(params, t, 0.5 * (params.p + 1.0));
        }
        Eigen::ArrayXd psipm1 = psi.pow(params.p - 1.0);
        if (trivial)
            cs.items.push_back({ConstraintKind::trivial_kernel, static_cast<int>(j), 0,
                                dpsi, psipm1 * dpsi, "dtPsi_" + std::to_string(j)});
        if (nontrivial && grid->max_mode >= 1)
            cs.items.push_back({ConstraintKind::nontrivial_kernel, static_cast<int>(j), 1,
                                w, psipm1 * w, "w_" + std::to_string(j)});
        if (bubble)
            cs.items.push_back({ConstraintKind::bubble, static_cast<int>(j), 0,
                                psi, psipm1 * psi, "Psi_" + std::to_string(j)});
    }
    return cs;
}

/// Lagrange multipliers of a constrained solve, grouped by constraint kind.
struct MultiplierSet {
    std::vector<double> c;       // trivial-kernel multipliers, one per bubble
    std::vector<double> sigma;   // nontrivial-kernel multipliers
    std::vector<double> bubble;  // bubble-constraint multipliers
    double residual = 0.0;       // relative residual of the bordered system
    double cond_estimate = 0.0;  // 1-norm condition estimate, worst mode
};

namespace detail {

struct BorderedSolution {
    Eigen::VectorXd gamma;        // interior values
    Eigen::VectorXd multipliers;  // one per constraint on this mode
    double rel_residual = 0.0;
    double cond_estimate = 0.0;
};

// Solve the bordered saddle system
//   [ A  C ] [gamma ]   [ rhs ]
//   [ B'  0 ] [lambda] = [  0  ]
// where A is the (possibly indefinite) tridiagonal mode operator, C holds the
// carrier columns and B' the H1-pairing rows of the constraint fields.
inline BorderedSolution solve_bordered_mode(const Eigen::ArrayXd& rhs_full, double h,
                                            double shift, const Eigen::ArrayXd& pot,
                                            const std::vector<const Constraint*>& cons,
                                            int mode, double kappa) {
    const int n = static_cast<int>(rhs_full.size());
    const int m = n - 2;
    const int nc = static_cast<int>(cons.size());
    const int dim = m + nc;
    const double ih2 = 1.0 / (h * h);
    const double ascale = 2.0 * ih2 + std::abs(shift);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * m + 2 * m * nc);
    for (int i = 0; i < m; ++i) {
        trip.emplace_back(i, i, 2.0 * ih2 + shift - pot[i + 1]);
        if (i > 0) trip.emplace_back(i, i - 1, -ih2);
        if (i + 1 < m) trip.emplace_back(i, i + 1, -ih2);
    }

    std::vector<double> col_scale(nc, 1.0);
    for (int c = 0; c < nc; ++c) {
        const auto& q = *cons[c];
        // Carrier column.
        double cmax = 0.0;
        for (int i = 0; i < m; ++i) cmax = std::max(cmax, std::abs(q.carrier[i + 1]));
        col_scale[c] = cmax > 0 ? ascale / cmax : 1.0;
        for (int i = 0; i < m; ++i) {
            const double v = q.carrier[i + 1] * col_scale[c];
            if (v != 0.0) trip.emplace_back(i, m + c, v);
        }
        // Constraint row: <q, gamma>_{H1 mode} = sum_i gamma_i * kappa*h*(A0 q)_i,
        // with A0 the plain (potential-free) mode operator using q's end samples.
        Eigen::ArrayXd wrow = apply_mode_operator(q.field, h, shift);
        double rmax = 0.0;
        for (int i = 0; i < m; ++i) rmax = std::max(rmax, std::abs(wrow[i + 1]));
        const double rs = rmax > 0 ? ascale / (kappa * h * rmax) : 1.0;
        for (int i = 0; i < m; ++i) {
            const double v = kappa * h * wrow[i + 1] * rs;
            if (v != 0.0) trip.emplace_back(m + c, i, v);
        }
    }

    Eigen::SparseMatrix<double> M(dim, dim);
    M.setFromTriplets(trip.begin(), trip.end());
    M.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success)
        throw numerical_error("solve_constrained: bordered factorization failed on mode " +
                              std::to_string(mode));

    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < m; ++i) b[i] = rhs_full[i + 1];
    Eigen::VectorXd x = lu.solve(b);
    // One step of iterative refinement.
    Eigen::VectorXd r = b - M * x;
    x += lu.solve(r);
    r = b - M * x;

    BorderedSolution sol;
    sol.rel_residual = r.norm() / std::max(1e-300, b.norm());

    // Hager-style lower bound for ||M^{-1}||_1 from a few probes.
    double inv_norm = 0.0;
    std::mt19937_64 rng(12345u + static_cast<unsigned>(mode));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int probe = 0; probe < 3; ++probe) {
        Eigen::VectorXd e(dim);
        if (probe == 0)
            e.setOnes();
        else
            for (int i = 0; i < dim; ++i) e[i] = uni(rng);
        e /= e.lpNorm<1>();
        Eigen::VectorXd y = lu.solve(e);
        inv_norm = std::max(inv_norm, y.lpNorm<1>());
    }
    double m1 = 0.0;
    for (int c = 0; c < M.outerSize(); ++c) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, c); it; ++it)
            s += std::abs(it.value());
        m1 = std::max(m1, s);
    }
    sol.cond_estimate = m1 * inv_norm;
    if (sol.cond_estimate > 1e12)
        throw numerical_error("solve_constrained: bordered system on mode " +
                              std::to_string(mode) + " has condition estimate " +
                              std::to_string(sol.cond_estimate));

    sol.gamma = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) sol.gamma[i + 1] = x[i];
    sol.multipliers.resize(nc);
    for (int c = 0; c < nc; ++c) sol.multipliers[c] = x[m + c] * col_scale[c];
    return sol;
}

}  // namespace detail

/// Constrained solve of L gamma = rhs - sum(multiplier * carrier) with
/// <gamma, constraint> = 0 for every constraint, mode by mode. Modes without
/// constraints are plain invertible solves.
inline std::pair<Field, MultiplierSet> solve_constrained(const FsParameters& params,
                                                         std::span<const BubbleSpec> specs,
                                                         const Field& rhs,
                                                         const ConstraintSet& constraints) {
    const Grid& gr = *rhs.grid;
    Eigen::ArrayXd u = bubble_sum_profile(specs, gr);
    Eigen::ArrayXd pot(gr.n_t);
    for (int i = 0; i < gr.n_t; ++i)
        pot[i] = params.p * std::pow(u[i], params.p - 1.0);

    Field gamma(rhs.grid);
    MultiplierSet mult;
    mult.c.assign(specs.size(), 0.0);
    mult.sigma.assign(specs.size(), 0.0);
    mult.bubble.assign(specs.size(), 0.0);

    for (int j = 0; j < rhs.n_modes(); ++j) {
        std::vector<const Constraint*> cons;
        for (const auto& c : constraints.items)
            if (c.mode == j) cons.push_back(&c);
        const double shift = angular_eigenvalue(j, params.d) + params.lambda_fs;
        auto sol = detail::solve_bordered_mode(rhs.modes[j], gr.h, shift, pot, cons, j,
                                               gr.kappa[j]);
        gamma.modes[j] = sol.gamma.array();
        for (size_t c = 0; c < cons.size(); ++c) {
            const double v = sol.multipliers[c];
            switch (cons[c]->kind) {
                case ConstraintKind::trivial_kernel: mult.c[cons[c]->bubble] = v; break;
                case ConstraintKind::nontrivial_kernel: mult.sigma[cons[c]->bubble] = v; break;
                case ConstraintKind::bubble: mult.bubble[cons[c]->bubble] = v; break;
            }
        }
        mult.residual = std::max(mult.residual, sol.rel_residual);
        mult.cond_estimate = std::max(mult.cond_estimate, sol.cond_estimate);
    }
    return {std::move(gamma), std::move(mult)};
}

/// Cross part of the first error term: R_{1,ex} = U^p - sum_j (alpha_j Psi_j)^p.
/// Vanishes for a single bubble; nonnegative when all alpha_j = 1.
inline Field build_r1_ex(const FsParameters& params, std::span<const BubbleSpec> specs,
                         std::shared_ptr<const Grid> grid) {
    Field out(grid);
    Eigen::ArrayXd u = bubble_sum_profile(specs, *grid);
    for (int i = 0; i < grid->n_t; ++i) {
        double v = std::pow(u[i], params.p);
        for (const auto& b : specs)
            v -= std::pow(b.alpha * detail::psi_value(params, grid->t(i) - b.center), params.p);
        out.modes[0][i] = v;
    }
    return out;
}

/// Second error term R_2 = p sum_j (U^{p-1} - (alpha_j Psi_j)^{p-1}
/// + (alpha_j^{p-1} - 1) Psi_j^{p-1}) V_j with V_j = beta_j w_{j,d}; mode 1.
inline Field build_r2(const FsParameters& params, std::span<const BubbleSpec> specs,
                      std::span<const double> betas, std::shared_ptr<const Grid> grid) {
    if (betas.size() != specs.size())
        throw std::invalid_argument("build_r2: betas must align with specs");
    Field out(grid);
    if (grid->max_mode < 1) return out;
    Eigen::ArrayXd u = bubble_sum_profile(specs, *grid);
    for (size_t j = 0; j < specs.size(); ++j) {
        if (betas[j] == 0.0) continue;
        const auto& b = specs[j];
        for (int i = 0; i < grid->n_t; ++i) {
            const double t = grid->t(i) - b.center;
            const double psi = detail::psi_value(params, t);
            const double factor = std::pow(u[i], params.p - 1.0) -
                                  std::pow(b.alpha * psi, params.p - 1.0) +
                                  (std::pow(b.alpha, params.p - 1.0) - 1.0) *
                                      std::pow(psi, params.p - 1.0);
            out.modes[1][i] += params.p * factor * betas[j] *
                               detail::psi_pow(params, t, 0.5 * (params.p + 1.0));
        }
    }
    return out;
}

}  // namespace ckn
