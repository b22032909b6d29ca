#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ckn/grid.hpp"

namespace ckn {

/// Axisymmetric function on the cylinder: one real t-profile per harmonic
/// degree. modes[j] is the coefficient of the pole-normalized harmonic
/// Pt_j(theta_d), so a field F(t) * theta_d is stored as modes[1] = F.
struct Field {
    std::shared_ptr<const Grid> grid;
    std::vector<Eigen::ArrayXd> modes;

    Field() = default;
    explicit Field(std::shared_ptr<const Grid> g) : grid(std::move(g)) {
        modes.assign(grid->max_mode + 1, Eigen::ArrayXd::Zero(grid->n_t));
    }

    int n_modes() const { return static_cast<int>(modes.size()); }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (int j = 0; j < n_modes(); ++j) modes[j] += o.modes[j];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (int j = 0; j < n_modes(); ++j) modes[j] -= o.modes[j];
        return *this;
    }
    Field& operator*=(double c) {
        for (auto& m : modes) m *= c;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double c, Field a) { return a *= c; }

    void check_same(const Field& o) const {
        if (!grid || !o.grid || !same_grid(*grid, *o.grid))
            throw std::invalid_argument("field: grid mismatch");
    }
};

/// Evaluate on the (t_i, theta_k) lattice: out(i,k) = sum_j modes[j][i] Pt_j(x_k).
inline Eigen::MatrixXd to_nodal(const Field& f) {
    const Grid& g = *f.grid;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.n_t, g.n_phi);
    for (int j = 0; j < f.n_modes(); ++j)
        out += f.modes[j].matrix() * g.basis.row(j);
    return out;
}

/// Project nodal values back onto the harmonic basis:
/// modes[j][i] = (1/kappa_j) sum_k w_k vals(i,k) Pt_j(x_k).
inline Field from_nodal(std::shared_ptr<const Grid> grid, const Eigen::MatrixXd& vals) {
    const Grid& g = *grid;
    if (vals.rows() != g.n_t || vals.cols() != g.n_phi)
        throw std::invalid_argument("from_nodal: shape mismatch");
    Field f(grid);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(g.theta_weights.data(), g.n_phi);
    for (int j = 0; j <= g.max_mode; ++j) {
        Eigen::VectorXd wj = w.cwiseProduct(g.basis.row(j).transpose()) / g.kappa[j];
        f.modes[j] = (vals * wj).array();
    }
    return f;
}

/// Nodal power |f|^q or sign(f)|f|^q, re-projected onto the stored modes.
/// If alias_energy is non-null it receives the quadrature energy that the
/// truncated projection could not represent (integrated over t).
inline Field pointwise_power(const Field& f, double q, bool signed_power,
                             double* alias_energy = nullptr) {
    if (!(q > 0.0)) throw std::invalid_argument("pointwise_power: q must be positive");
    const Grid& g = *f.grid;
    Eigen::MatrixXd vals = to_nodal(f);
    for (int i = 0; i < vals.rows(); ++i)
        for (int k = 0; k < vals.cols(); ++k) {
            const double v = vals(i, k);
            const double pw = std::pow(std::abs(v), q);
            vals(i, k) = signed_power ? std::copysign(pw, v) : pw;
        }
    Field out = from_nodal(f.grid, vals);
    if (alias_energy) {
        long double nodal = 0.0L, modal = 0.0L;
        for (int i = 0; i < g.n_t; ++i) {
            const double tw = (i == 0 || i == g.n_t - 1) ? 0.5 * g.h : g.h;
            for (int k = 0; k < g.n_phi; ++k)
                nodal += static_cast<long double>(tw) * g.theta_weights[k] *
                         vals(i, k) * vals(i, k);
        }
        for (int j = 0; j <= g.max_mode; ++j) {
            long double s = 0.0L;
            for (int i = 0; i < g.n_t; ++i) {
                const double tw = (i == 0 || i == g.n_t - 1) ? 0.5 * g.h : g.h;
                s += static_cast<long double>(tw) * out.modes[j][i] * out.modes[j][i];
            }
            modal += static_cast<long double>(g.kappa[j]) * s;
        }
        *alias_energy = std::max(0.0, static_cast<double>(nodal - modal));
    }
    return out;
}

}  // namespace ckn
