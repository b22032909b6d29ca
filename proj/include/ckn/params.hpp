#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace ckn {

/// Parameter bundle pinned to the Felli-Schneider curve.
///
/// Given (d, p) in the degenerate regime, every other quantity is forced:
///   lambda_fs = 4(d-1)/((p+1)^2-4),  a = a_c - sqrt(lambda_fs)  (a < 0),
///   b = b_fs(a), and the Taylor coefficients A_p, B_p of the pointwise
///   expansion of t -> t^p.
struct FsParameters {
    int d = 0;
    double p = 0.0;
    double a = 0.0;
    double b = 0.0;
    double a_c = 0.0;        // (d-2)/2
    double lambda_fs = 0.0;  // (a_c - a)^2
    double A_p = 0.0;        // p(p-1)/2
    double B_p = 0.0;        // p(p-1)(p-2)/6

    // Inverse best constant S_FS^{-1}; filled lazily by sobolev_constant().
    std::optional<double> s_inv;

    double sqrt_lambda() const { return std::sqrt(lambda_fs); }
};

/// Felli-Schneider curve b_FS(a) for dimension d.
inline double felli_schneider_b(int d, double a) {
    const double a_c = 0.5 * (d - 2);
    const double t = a_c - a;
    return d * t / (2.0 * std::sqrt(t * t + (d - 1))) + a - a_c;
}

/// Exponent p determined by (d, a, b) through k = 1 + a - b.
inline double p_from_ab(int d, double a, double b) {
    const double k = 1.0 + a - b;
    return (d + 2.0 * k) / (d - 2.0 * k);
}

inline FsParameters make_params(int d, double p) {
    if (d < 2) throw std::invalid_argument("make_params: d must be >= 2");
    if (!(p > 1.0)) throw std::invalid_argument("make_params: p must exceed 1");

    FsParameters fp;
    fp.d = d;
    fp.p = p;
    fp.a_c = 0.5 * (d - 2);
    fp.lambda_fs = 4.0 * (d - 1) / ((p + 1.0) * (p + 1.0) - 4.0);
    const double root = std::sqrt(fp.lambda_fs);
    if (!(root > fp.a_c))
        throw std::invalid_argument(
            "make_params: (d,p) gives a >= 0, outside the degenerate regime");
    fp.a = fp.a_c - root;
    // k = 1 + a - b = d(p-1)/(2(p+1)); equivalent to b = b_FS(a) on the curve.
    fp.b = fp.a + 1.0 - d * (p - 1.0) / (2.0 * (p + 1.0));
    fp.A_p = p * (p - 1.0) / 2.0;
    fp.B_p = p * (p - 1.0) * (p - 2.0) / 6.0;
    return fp;
}

}  // namespace ckn
