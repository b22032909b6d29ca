#pragma once

#include <cmath>
#include <iostream>
#include <span>
#include <vector>

#include "ckn/field.hpp"
#include "ckn/grid.hpp"
#include "ckn/params.hpp"

namespace ckn {

/// One translated, amplitude-scaled bubble alpha * Psi(t - center).
struct BubbleSpec {
    FsParameters params;
    double alpha = 1.0;
    double center = 0.0;
};

namespace detail {

// log cosh(z), overflow-free.
inline double log_cosh(double z) {
    const double az = std::abs(z);
    return az + std::log1p(std::exp(-2.0 * az)) - std::log(2.0);
}

// Psi(t) at t relative to the bubble center, evaluated in log space.
inline double psi_value(const FsParameters& fp, double t) {
    const double k = 0.5 * fp.sqrt_lambda() * (fp.p - 1.0);
    const double logC = std::log((fp.p + 1.0) * fp.lambda_fs / 2.0) / (fp.p - 1.0);
    return std::exp(logC - (2.0 / (fp.p - 1.0)) * log_cosh(k * t));
}

// Psi(t)^e for positive exponents, stable in the far tail.
inline double psi_pow(const FsParameters& fp, double t, double e) {
    const double k = 0.5 * fp.sqrt_lambda() * (fp.p - 1.0);
    const double logC = std::log((fp.p + 1.0) * fp.lambda_fs / 2.0) / (fp.p - 1.0);
    return std::exp(e * (logC - (2.0 / (fp.p - 1.0)) * log_cosh(k * t)));
}

inline void warn_tail(const FsParameters& fp, double s, const Grid& g, const char* what) {
    const double tail = std::max(psi_value(fp, g.t_min - s), psi_value(fp, g.t_max - s));
    if (tail > 1e-10 * psi_value(fp, 0.0))
        std::cerr << "[ckn] warning: " << what << " tail at the grid boundary is "
                  << tail / psi_value(fp, 0.0) << " * Psi(0); increase pad for clean truncation\n";
}

}  // namespace detail

/// Cylinder bubble Psi_s = Psi(t - s), a pure mode-0 field.
inline Field psi_profile(const FsParameters& params, double s, std::shared_ptr<const Grid> grid) {
    detail::warn_tail(params, s, *grid, "psi_profile");
    Field f(grid);
    for (int i = 0; i < grid->n_t; ++i)
        f.modes[0][i] = detail::psi_value(params, grid->t(i) - s);
    return f;
}

/// Trivial kernel d/dt Psi_s, mode 0, odd about t = s.
inline Field dpsi_profile(const FsParameters& params, double s, std::shared_ptr<const Grid> grid) {
    Field f(grid);
    const double k = 0.5 * params.sqrt_lambda() * (params.p - 1.0);
    const double c = 2.0 * k / (params.p - 1.0);  // = sqrt(lambda)
    for (int i = 0; i < grid->n_t; ++i) {
        const double t = grid->t(i) - s;
        f.modes[0][i] = -c * std::tanh(k * t) * detail::psi_value(params, t);
    }
    return f;
}

/// Nontrivial kernel w_{s,d} = Psi_s^{(p+1)/2} * theta_d, stored as the
/// mode-1 profile Psi(t-s)^{(p+1)/2}.
inline Field kernel_profile(const FsParameters& params, double s, std::shared_ptr<const Grid> grid) {
    if (grid->max_mode < 1)
        throw std::invalid_argument("kernel_profile: grid needs max_mode >= 1");
    Field f(grid);
    const double e = 0.5 * (params.p + 1.0);
    for (int i = 0; i < grid->n_t; ++i)
        f.modes[1][i] = detail::psi_pow(params, grid->t(i) - s, e);
    return f;
}

/// Sum of bubbles: U = sum_j alpha_j Psi_{s_j}, mode 0.
inline Field bubble_sum(std::span<const BubbleSpec> specs, std::shared_ptr<const Grid> grid) {
    if (specs.empty()) throw std::invalid_argument("bubble_sum: empty spec list");
    Field f(grid);
    for (const auto& b : specs)
        for (int i = 0; i < grid->n_t; ++i)
            f.modes[0][i] += b.alpha * detail::psi_value(b.params, grid->t(i) - b.center);
    return f;
}

/// Mode-0 profile of bubble_sum as a plain array (same values, no Field).
inline Eigen::ArrayXd bubble_sum_profile(std::span<const BubbleSpec> specs, const Grid& grid) {
    Eigen::ArrayXd u = Eigen::ArrayXd::Zero(grid.n_t);
    for (const auto& b : specs)
        for (int i = 0; i < grid.n_t; ++i)
            u[i] += b.alpha * detail::psi_value(b.params, grid.t(i) - b.center);
    return u;
}

/// Euclidean bubble W(|x|) of the weighted problem; related to Psi through
/// W(x) = |x|^{-(a_c-a)} Psi(-ln|x|).
inline double euclidean_W(const FsParameters& params, double x_radius) {
    if (!(x_radius > 0.0)) throw std::invalid_argument("euclidean_W: radius must be positive");
    const double e = (params.a_c - params.a) * (params.p - 1.0);
    const double base = 2.0 * (params.p + 1.0) * params.lambda_fs;
    // Evaluate in log space: (1 + r^e)^{-2/(p-1)} with r^e = exp(e ln r).
    const double lr = std::log(x_radius);
    double log_one_plus;
    if (e * lr > 0)
        log_one_plus = e * lr + std::log1p(std::exp(-e * lr));
    else
        log_one_plus = std::log1p(std::exp(e * lr));
    return std::exp(std::log(base) / (params.p - 1.0) -
                    (2.0 / (params.p - 1.0)) * log_one_plus);
}

}  // namespace ckn
