#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ckn/linops.hpp"

namespace ckn {

/// Result of the optimal bubble/kernel decomposition
/// v = sum alpha_j* Psi_{s_j*} + sum beta_j* w_{j,d} + rho_*.
struct DecompositionResult {
    std::vector<BubbleSpec> specs;     // fitted (alpha_j*, s_j*), centers ascending
    std::vector<double> betas;         // kernel projections beta_{j,d}*
    Field rho;                         // pre-kernel remainder
    Field rho_star;                    // remainder after kernel projection
    std::map<std::string, double> ortho_residuals;  // normalized |<rho_*, X>|
    double dist = 0.0;                 // ||v - sum alpha_j* Psi_{s_j*}||
    double q = 0.0;                    // e^{-sqrt(lambda) * min gap}
    bool nu_in_window = true;          // energy window check for the given nu
};

struct FitResult {
    std::vector<BubbleSpec> specs;
    Field rho;
    double grad_norm = 0.0;  // final relative gradient of the objective
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// Seed centers/amplitudes from the nu largest well-separated local maxima of
// the mode-0 profile.
inline std::vector<BubbleSpec> seed_from_maxima(const FsParameters& params, const Field& v,
                                                int nu, double min_gap) {
    const Grid& g = *v.grid;
    const auto& m0 = v.modes[0];
    std::vector<std::pair<double, double>> peaks;  // (height, t)
    for (int i = 1; i + 1 < g.n_t; ++i)
        if (m0[i] > m0[i - 1] && m0[i] >= m0[i + 1]) peaks.emplace_back(m0[i], g.t(i));
    std::sort(peaks.rbegin(), peaks.rend());
    std::vector<BubbleSpec> specs;
    const double psi0 = psi_value(params, 0.0);
    for (const auto& [height, t] : peaks) {
        bool ok = true;
        for (const auto& s : specs)
            if (std::abs(s.center - t) < min_gap) ok = false;
        if (!ok) continue;
        BubbleSpec b;
        b.params = params;
        b.alpha = std::max(height / psi0, 1e-3);
        b.center = t;
        specs.push_back(b);
        if (static_cast<int>(specs.size()) == nu) break;
    }
    if (static_cast<int>(specs.size()) < nu)
        throw numerical_error("fit_bubbles: found only " + std::to_string(specs.size()) +
                              " separated maxima for nu = " + std::to_string(nu));
    return specs;
}

// Amplitudes minimizing ||v - sum alpha_j Psi_{s_j}|| at fixed centers.
inline Eigen::VectorXd solve_amplitudes(const FsParameters& params, const Field& v,
                                        const std::vector<Field>& psis) {
    const int nu = static_cast<int>(psis.size());
    Eigen::MatrixXd G(nu, nu);
    Eigen::VectorXd b(nu);
    for (int i = 0; i < nu; ++i) {
        b[i] = h1_inner(params, v, psis[i]);
        for (int j = i; j < nu; ++j) G(i, j) = G(j, i) = h1_inner(params, psis[i], psis[j]);
    }
    return G.ldlt().solve(b);
}

}  // namespace detail

/// Nonlinear fit of nu bubbles: minimize ||v - sum alpha_j Psi_{s_j}||^2 over
/// amplitudes and centers. Amplitudes are solved exactly at fixed centers;
/// centers move by guarded Gauss-Newton steps.
inline FitResult fit_bubbles(const FsParameters& params, const Field& v, int nu,
                             const std::vector<BubbleSpec>* init = nullptr,
                             int max_iter = 80, double tol = 1e-12) {
    const double min_gap = 1.0;
    std::vector<BubbleSpec> specs =
        init ? *init : detail::seed_from_maxima(params, v, nu, 2.0 * min_gap);
    if (static_cast<int>(specs.size()) != nu)
        throw std::invalid_argument("fit_bubbles: init size != nu");
    std::sort(specs.begin(), specs.end(),
              [](const BubbleSpec& a, const BubbleSpec& b) { return a.center < b.center; });

    const double vnorm2 = h1_inner(params, v, v);
    FitResult out;
    Field r = v;
    double F = vnorm2;

    auto rebuild = [&](const std::vector<BubbleSpec>& sp, std::vector<Field>& psis,
                       Eigen::VectorXd& alpha, Field& res) {
        psis.clear();
        for (const auto& b : sp) psis.push_back(psi_profile(params, b.center, v.grid));
        alpha = detail::solve_amplitudes(params, v, psis);
        res = v;
        for (int j = 0; j < nu; ++j) res -= alpha[j] * psis[j];
    };

    std::vector<Field> psis;
    Eigen::VectorXd alpha;
    rebuild(specs, psis, alpha, r);
    F = h1_inner(params, r, r);

    int it = 0;
    double grad_rel = 0.0;
    for (; it < max_iter; ++it) {
        for (int j = 0; j < nu; ++j) specs[j].alpha = alpha[j];

        // Gauss-Newton direction for the centers; J_j = alpha_j dtPsi_{s_j}.
        std::vector<Field> cols;
        for (int j = 0; j < nu; ++j)
            cols.push_back(alpha[j] * dpsi_profile(params, specs[j].center, v.grid));
        Eigen::MatrixXd JtJ(nu, nu);
        Eigen::VectorXd Jtr(nu);
        for (int i = 0; i < nu; ++i) {
            Jtr[i] = h1_inner(params, r, cols[i]);
            for (int j = i; j < nu; ++j)
                JtJ(i, j) = JtJ(j, i) = h1_inner(params, cols[i], cols[j]);
        }
        grad_rel = 0.0;
        for (int i = 0; i < nu; ++i) {
            const double colnorm = std::sqrt(std::max(JtJ(i, i), 1e-300));
            grad_rel = std::max(grad_rel, std::abs(Jtr[i]) /
                                              (std::sqrt(F) * colnorm + 1e-300));
        }
        if (grad_rel < tol || F < 1e-28 * vnorm2) {
            out.converged = true;
            break;
        }

        Eigen::VectorXd delta = JtJ.ldlt().solve(-Jtr);
        // Guarded update with backtracking on the variable-projection objective.
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 12; ++bt, step *= 0.5) {
            std::vector<BubbleSpec> trial = specs;
            for (int j = 0; j < nu; ++j) trial[j].center += step * delta[j];
            std::sort(trial.begin(), trial.end(),
                      [](const BubbleSpec& a, const BubbleSpec& b) { return a.center < b.center; });
            bool collapsed = false;
            for (int j = 0; j + 1 < nu; ++j)
                if (trial[j + 1].center - trial[j].center < min_gap) collapsed = true;
            if (collapsed) {
                if (nu > 1 && step < 1e-3)
                    throw numerical_error("fit_bubbles: centers collapsing (gap < 1)");
                continue;
            }
            std::vector<Field> tpsis;
            Eigen::VectorXd talpha;
            Field tr = v;
            rebuild(trial, tpsis, talpha, tr);
            const double tF = h1_inner(params, tr, tr);
            if (tF <= F * (1.0 + 1e-14)) {
                specs = std::move(trial);
                psis = std::move(tpsis);
                alpha = std::move(talpha);
                r = std::move(tr);
                F = tF;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.converged = grad_rel < 1e-8;
            break;
        }
    }
    for (int j = 0; j < nu; ++j) specs[j].alpha = alpha[j];
    out.specs = std::move(specs);
    out.rho = std::move(r);
    out.grad_norm = grad_rel;
    out.iterations = it;
    if (!out.converged && grad_rel < 1e-8) out.converged = true;
    return out;
}

/// Kernel projection: betas solve the Gram system
/// <w_{i,d}, w_{j,d}> beta_j = <w_{i,d}, rho>, rho_star = rho - sum beta_j w_{j,d}.
inline std::pair<std::vector<double>, Field> project_kernels(const FsParameters& params,
                                                             const Field& rho,
                                                             std::span<const BubbleSpec> specs) {
    const int nu = static_cast<int>(specs.size());
    std::vector<Field> ws;
    for (const auto& b : specs) ws.push_back(kernel_profile(params, b.center, rho.grid));
    Eigen::MatrixXd G(nu, nu);
    Eigen::VectorXd b(nu);
    for (int i = 0; i < nu; ++i) {
        b[i] = h1_inner(params, rho, ws[i]);
        for (int j = i; j < nu; ++j) G(i, j) = G(j, i) = h1_inner(params, ws[i], ws[j]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw numerical_error("project_kernels: singular kernel Gram (coinciding centers?)");
    Eigen::VectorXd beta = ldlt.solve(b);
    Field rho_star = rho;
    for (int j = 0; j < nu; ++j) rho_star -= beta[j] * ws[j];
    return {std::vector<double>(beta.data(), beta.data() + nu), std::move(rho_star)};
}

/// Full optimal decomposition (fit + kernel projection + diagnostics).
inline DecompositionResult decompose(const FsParameters& params, const Field& v, int nu,
                                     const std::vector<BubbleSpec>* init = nullptr) {
    FitResult fit = fit_bubbles(params, v, nu, init);
    if (!fit.converged)
        throw numerical_error("decompose: bubble fit did not converge; final gradient " +
                              std::to_string(fit.grad_norm));
    DecompositionResult res;
    res.specs = fit.specs;
    res.rho = fit.rho;
    auto [betas, rho_star] = project_kernels(params, fit.rho, fit.specs);
    res.betas = std::move(betas);
    res.rho_star = std::move(rho_star);
    res.dist = h1_norm(params, fit.rho);

    double min_gap = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j + 1 < res.specs.size(); ++j)
        min_gap = std::min(min_gap, res.specs[j + 1].center - res.specs[j].center);
    res.q = res.specs.size() > 1 ? std::exp(-params.sqrt_lambda() * min_gap) : 0.0;

    const double rsn = h1_norm(params, res.rho_star);
    for (size_t j = 0; j < res.specs.size(); ++j) {
        const double s = res.specs[j].center;
        Field psi = psi_profile(params, s, v.grid);
        Field dpsi = dpsi_profile(params, s, v.grid);
        Field w = kernel_profile(params, s, v.grid);
        auto entry = [&](const std::string& name, const Field& x) {
            const double nx = h1_norm(params, x);
            res.ortho_residuals[name + "_" + std::to_string(j)] =
                std::abs(h1_inner(params, res.rho_star, x)) / std::max(1e-300, rsn * nx);
        };
        entry("Psi", psi);
        entry("dtPsi", dpsi);
        entry("w", w);
    }

    if (params.s_inv) {
        auto count = bubble_count(params, v);
        res.nu_in_window = count && *count == nu;
    }
    return res;
}

/// Manifold distance inf ||v - sum alpha_j Psi_{s_j}|| with a 3-seed
/// multi-start guard against shallow local minima.
inline double manifold_distance(const FsParameters& params, const Field& v, int nu,
                                uint64_t seed = 0) {
    FitResult base = fit_bubbles(params, v, nu);
    double best = h1_norm(params, base.rho);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double s_scale = 0.5 / params.sqrt_lambda();
    for (int trial = 0; trial < 2; ++trial) {
        std::vector<BubbleSpec> init = base.specs;
        for (auto& b : init) {
            b.center += s_scale * gauss(rng);
            b.alpha *= 1.0 + 0.05 * gauss(rng);
        }
        std::sort(init.begin(), init.end(),
                  [](const BubbleSpec& a, const BubbleSpec& b) { return a.center < b.center; });
        try {
            FitResult alt = fit_bubbles(params, v, nu, &init);
            if (alt.converged) best = std::min(best, h1_norm(params, alt.rho));
        } catch (const numerical_error&) {
            // A perturbed seed may collapse; the unperturbed fit stands.
        }
    }
    return best;
}

}  // namespace ckn
