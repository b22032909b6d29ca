#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "ckn/decompose.hpp"

namespace ckn {

enum class CorrectionLevel { none, first_order, full };
enum class Regime { kernel_dominated, interaction_dominated, mixed };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::kernel_dominated: return "kernel_dominated";
        case Regime::interaction_dominated: return "interaction_dominated";
        default: return "mixed";
    }
}

/// One two-bubble experiment v = Psi + Psi_R + beta (w_d + w_{R,d}) plus the
/// requested correction terms.
struct ExampleSpec {
    FsParameters params;
    double R = 0.0;
    double beta = 0.0;
    CorrectionLevel level = CorrectionLevel::full;
    bool positive_part = false;
};

/// Interaction strength Q_R = e^{-sqrt(lambda) R}.
inline double interaction_q(const FsParameters& params, double R) {
    if (!(R > 0.0)) return 1.0;
    return std::exp(-params.sqrt_lambda() * R);
}

struct XiTerms {
    Field xi11, xi12, xi21, xi22;
};

namespace detail {

inline std::vector<BubbleSpec> two_bubbles(const FsParameters& params, double R) {
    BubbleSpec b1{params, 1.0, 0.0}, b2{params, 1.0, R};
    return {b1, b2};
}

}  // namespace detail

/// The beta-independent building blocks of the example's residual expansion:
///   Xi_{1,1} = Gamma^p - Psi^p - Psi_R^p                             (even)
///   Xi_{1,2} = p[(Gamma^{p-1}-Psi^{p-1}) w_d + (Gamma^{p-1}-Psi_R^{p-1}) w_{R,d}]
///   Xi_{2,1} = A_p [Psi^{p-2} w_d^2 | Psi_R^{p-2} w_{R,d}^2 | Gamma^{p-2} Phi^2]
///   Xi_{2,2} = B_p [Psi^{p-3} w_d^3 | Psi_R^{p-3} w_{R,d}^3 | Gamma^{p-3} Phi^3]
/// with the indicator split over B = [-R/2, R/2), B_R = [R/2, 3R/2) and the
/// complement.
inline XiTerms build_xi_terms(const ExampleSpec& spec, std::shared_ptr<const Grid> grid) {
    const FsParameters& fp = spec.params;
    const Grid& g = *grid;
    const double R = spec.R;
    const double p = fp.p;
    const double e_w = 0.5 * (p + 1.0);

    XiTerms xi{Field(grid), Field(grid), Field(grid), Field(grid)};
    Eigen::ArrayXd t21(g.n_t), t22(g.n_t);
    for (int i = 0; i < g.n_t; ++i) {
        const double t = g.t(i);
        const double psi = detail::psi_value(fp, t);
        const double psiR = detail::psi_value(fp, t - R);
        const double gam = psi + psiR;
        const double w = detail::psi_pow(fp, t, e_w);
        const double wR = detail::psi_pow(fp, t - R, e_w);

        xi.xi11.modes[0][i] = std::pow(gam, p) - std::pow(psi, p) - std::pow(psiR, p);
        if (g.max_mode >= 1)
            xi.xi12.modes[1][i] = p * ((std::pow(gam, p - 1) - std::pow(psi, p - 1)) * w +
                                       (std::pow(gam, p - 1) - std::pow(psiR, p - 1)) * wR);

        const bool inB = t >= -0.5 * R && t < 0.5 * R;
        const bool inBR = t >= 0.5 * R && t < 1.5 * R;
        if (inB) {
            t21[i] = fp.A_p * std::pow(psi, p - 2) * w * w;
            t22[i] = fp.B_p * std::pow(psi, p - 3) * w * w * w;
        } else if (inBR) {
            t21[i] = fp.A_p * std::pow(psiR, p - 2) * wR * wR;
            t22[i] = fp.B_p * std::pow(psiR, p - 3) * wR * wR * wR;
        } else {
            const double phi = w + wR;
            t21[i] = fp.A_p * std::pow(gam, p - 2) * phi * phi;
            t22[i] = fp.B_p * std::pow(gam, p - 3) * phi * phi * phi;
        }
    }

    // Angular content: theta_d^2 for Xi_{2,1}, theta_d^3 for Xi_{2,2};
    // expand x^2 and x^3 in the pole-normalized basis (exact quadrature).
    std::vector<double> c2(g.max_mode + 1, 0.0), c3(g.max_mode + 1, 0.0);
    for (int j = 0; j <= g.max_mode; ++j) {
        long double s2 = 0.0L, s3 = 0.0L;
        for (int k = 0; k < g.n_phi; ++k) {
            const long double x = g.theta_nodes[k];
            s2 += static_cast<long double>(g.theta_weights[k]) * x * x * g.basis(j, k);
            s3 += static_cast<long double>(g.theta_weights[k]) * x * x * x * g.basis(j, k);
        }
        c2[j] = static_cast<double>(s2) / g.kappa[j];
        c3[j] = static_cast<double>(s3) / g.kappa[j];
    }
    for (int j = 0; j <= g.max_mode; ++j) {
        if (c2[j] != 0.0 && std::abs(c2[j]) > 1e-14) xi.xi21.modes[j] = c2[j] * t21;
        if (c3[j] != 0.0 && std::abs(c3[j]) > 1e-14) xi.xi22.modes[j] = c3[j] * t22;
    }
    return xi;
}

/// Corrections of the optimal example and their Lagrange multipliers. Every
/// piece solves a bordered system with the potential p Gamma_R^{p-1} and the
/// four kernel orthogonality constraints.
struct Corrections {
    Field r11, r12, r21, r22, r11s;
    MultiplierSet m11, m12, m21, m22, m11s;
    CorrectionLevel level = CorrectionLevel::none;
};

inline Corrections solve_corrections(const ExampleSpec& spec, std::shared_ptr<const Grid> grid) {
    Corrections c;
    c.level = spec.level;
    if (spec.level == CorrectionLevel::none) {
        c.r11 = Field(grid);
        c.r12 = Field(grid);
        c.r21 = Field(grid);
        c.r22 = Field(grid);
        c.r11s = Field(grid);
        return c;
    }
    const FsParameters& fp = spec.params;
    auto specs = detail::two_bubbles(fp, spec.R);
    XiTerms xi = build_xi_terms(spec, grid);
    ConstraintSet cs = make_constraint_set(fp, specs, grid, true, true, false);

    std::tie(c.r11, c.m11) = solve_constrained(fp, specs, xi.xi11, cs);
    std::tie(c.r12, c.m12) = solve_constrained(fp, specs, xi.xi12, cs);
    if (spec.level == CorrectionLevel::full) {
        std::tie(c.r21, c.m21) = solve_constrained(fp, specs, xi.xi21, cs);
        std::tie(c.r22, c.m22) = solve_constrained(fp, specs, xi.xi22, cs);
        // Xi_{1,1,*} = 2 A_p Gamma^{p-2} Phi_R rho_{1,1}; rho_{1,1} is mode 0,
        // Phi_R is mode 1, so the product is a pure mode-1 profile.
        Field xi11s(grid);
        if (grid->max_mode >= 1) {
            const double e_w = 0.5 * (fp.p + 1.0);
            for (int i = 0; i < grid->n_t; ++i) {
                const double t = grid->t(i);
                const double gam =
                    detail::psi_value(fp, t) + detail::psi_value(fp, t - spec.R);
                const double phi = detail::psi_pow(fp, t, e_w) +
                                   detail::psi_pow(fp, t - spec.R, e_w);
                xi11s.modes[1][i] = 2.0 * fp.A_p * std::pow(gam, fp.p - 2) * phi *
                                    c.r11.modes[0][i];
            }
        }
        std::tie(c.r11s, c.m11s) = solve_constrained(fp, specs, xi11s, cs);
    } else {
        c.r21 = Field(grid);
        c.r22 = Field(grid);
        c.r11s = Field(grid);
    }
    return c;
}

/// Assemble the example field
///   v = Gamma_R + beta Phi_R
///     + rho_{1,1} + beta rho_{1,2}                        (first_order)
///     + beta^2 rho_{2,1} + beta^3 rho_{2,2} + beta rho_{1,1,*}   (full)
/// with an optional nodal positive-part clamp.
inline Field assemble_example(const ExampleSpec& spec, std::shared_ptr<const Grid> grid,
                              const Corrections* pre = nullptr) {
    const FsParameters& fp = spec.params;
    Field v(grid);
    const double e_w = 0.5 * (fp.p + 1.0);
    for (int i = 0; i < grid->n_t; ++i) {
        const double t = grid->t(i);
        v.modes[0][i] = detail::psi_value(fp, t) + detail::psi_value(fp, t - spec.R);
        if (grid->max_mode >= 1)
            v.modes[1][i] = spec.beta * (detail::psi_pow(fp, t, e_w) +
                                         detail::psi_pow(fp, t - spec.R, e_w));
    }
    if (spec.level != CorrectionLevel::none) {
        Corrections local;
        const Corrections* c = pre;
        if (!c) {
            local = solve_corrections(spec, grid);
            c = &local;
        }
        const double b = spec.beta;
        v += c->r11;
        v += b * c->r12;
        if (spec.level == CorrectionLevel::full) {
            v += (b * b) * c->r21;
            v += (b * b * b) * c->r22;
            v += b * c->r11s;
        }
    }
    if (spec.positive_part) {
        Eigen::MatrixXd vals = to_nodal(v);
        vals = vals.cwiseMax(0.0);
        v = from_nodal(grid, vals);
    }
    return v;
}

/// One sweep row.
struct SweepRecord {
    double beta = 0.0, R = 0.0;
    double q_r = 0.0;
    double f_dual = 0.0;
    double dist = 0.0;
    bool nu_ok = false;
    Regime regime = Regime::mixed;
    double alpha1 = 0.0, alpha2 = 0.0, s1 = 0.0, s2 = 0.0;
    double beta1 = 0.0, beta2 = 0.0;
    bool failed = false;
    std::string message;
};

struct SweepOptions {
    int n_t = 16385;
    double pad_factor = 18.0;  // pad = pad_factor / sqrt(lambda)
    int max_mode = 4;
    int nu = 2;
    int threads = 1;
};

inline Regime classify_regime(const FsParameters& fp, double beta, double q_r) {
    const double b3 = beta * beta * beta;
    if (q_r <= b3 / 10.0) return Regime::kernel_dominated;
    if (beta <= std::pow(q_r, std::min(fp.p, 2.0) / 2.0) / 10.0)
        return Regime::interaction_dominated;
    return Regime::mixed;
}

inline SweepRecord run_one(const ExampleSpec& spec, const SweepOptions& opt) {
    SweepRecord rec;
    rec.beta = spec.beta;
    rec.R = spec.R;
    rec.q_r = interaction_q(spec.params, spec.R);
    try {
        const double pad = opt.pad_factor / spec.params.sqrt_lambda();
        auto grid = make_grid(spec.params, {0.0, spec.R}, pad, opt.n_t, opt.max_mode);
        FsParameters fp = with_sobolev_constant(spec.params, grid);
        ExampleSpec s2 = spec;
        s2.params = fp;
        Field v = assemble_example(s2, grid);

        Field f = residual(fp, v);
        rec.f_dual = riesz_solve(fp, f).value;

        auto init = detail::two_bubbles(fp, spec.R);
        DecompositionResult dec = decompose(fp, v, opt.nu, &init);
        rec.dist = dec.dist;
        rec.nu_ok = dec.nu_in_window;
        rec.alpha1 = dec.specs[0].alpha;
        rec.alpha2 = dec.specs.size() > 1 ? dec.specs[1].alpha : 0.0;
        rec.s1 = dec.specs[0].center;
        rec.s2 = dec.specs.size() > 1 ? dec.specs[1].center : 0.0;
        rec.beta1 = dec.betas.empty() ? 0.0 : dec.betas[0];
        rec.beta2 = dec.betas.size() > 1 ? dec.betas[1] : 0.0;
        rec.regime = classify_regime(fp, spec.beta, rec.q_r);
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.message = e.what();
    }
    return rec;
}

/// Run a schedule of experiments; records come back in schedule order and
/// failed rows are flagged rather than aborting the sweep.
inline std::vector<SweepRecord> run_sweep(const std::vector<ExampleSpec>& schedule,
                                          const SweepOptions& opt = {}) {
    if (schedule.empty()) throw std::invalid_argument("run_sweep: empty schedule");
    std::vector<SweepRecord> out(schedule.size());
    const int threads = std::max(1, opt.threads);
    if (threads == 1) {
        for (size_t i = 0; i < schedule.size(); ++i) out[i] = run_one(schedule[i], opt);
        return out;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= schedule.size()) return;
                out[i] = run_one(schedule[i], opt);
            }
        });
    for (auto& th : pool) th.join();
    return out;
}

struct ExponentFit {
    double slope = 0.0;
    double stderr_ = 0.0;
    int n = 0;
};

/// Least-squares slope of log y against log x with its standard error.
inline ExponentFit fit_exponent(std::span<const double> x, std::span<const double> y) {
    const int n = static_cast<int>(x.size());
    if (n < 4 || y.size() != x.size())
        throw std::invalid_argument("fit_exponent: need >= 4 aligned samples");
    bool increasing = x[1] > x[0];
    for (int i = 0; i + 1 < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("fit_exponent: inputs must be positive");
        if (increasing ? x[i + 1] <= x[i] : x[i + 1] >= x[i])
            throw std::invalid_argument("fit_exponent: x must be strictly monotone");
    }
    if (!(x[n - 1] > 0.0) || !(y[n - 1] > 0.0))
        throw std::invalid_argument("fit_exponent: inputs must be positive");

    double sx = 0, sy = 0;
    for (int i = 0; i < n; ++i) {
        sx += std::log(x[i]);
        sy += std::log(y[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    ExponentFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = std::log(y[i]) - my - fit.slope * (std::log(x[i]) - mx);
        ss += r * r;
    }
    fit.stderr_ = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
    return fit;
}

/// Record-field selector for CLI/report plumbing.
inline double sweep_field(const SweepRecord& r, const std::string& name) {
    if (name == "beta") return r.beta;
    if (name == "R") return r.R;
    if (name == "q_r") return r.q_r;
    if (name == "f_dual") return r.f_dual;
    if (name == "dist") return r.dist;
    throw std::invalid_argument("sweep_field: unknown field " + name);
}

inline ExponentFit fit_exponent(const std::vector<SweepRecord>& recs, const std::string& xname,
                                const std::string& yname) {
    std::vector<double> xs, ys;
    for (const auto& r : recs) {
        if (r.failed) continue;
        xs.push_back(sweep_field(r, xname));
        ys.push_back(sweep_field(r, yname));
    }
    return fit_exponent(xs, ys);
}

}  // namespace ckn
