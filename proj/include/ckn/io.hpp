#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ckn/decompose.hpp"
#include "ckn/stability.hpp"

namespace ckn {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Field file writer. Numbers carry 17 significant digits so a read-back
/// compares equal bit for bit.
inline void write_field(std::ostream& os, const FsParameters& params, const Field& f) {
    const Grid& g = *f.grid;
    os << "{\n  \"params\": {\"d\": " << params.d << ", \"p\": " << detail::num17(params.p)
       << ", \"a\": " << detail::num17(params.a) << ", \"b\": " << detail::num17(params.b)
       << ", \"lambda_fs\": " << detail::num17(params.lambda_fs) << "},\n";
    os << "  \"grid\": {\"t_min\": " << detail::num17(g.t_min)
       << ", \"t_max\": " << detail::num17(g.t_max) << ", \"n_t\": " << g.n_t
       << ", \"max_mode\": " << g.max_mode << ", \"n_phi\": " << g.n_phi
       << ", \"d\": " << g.d << "},\n";
    os << "  \"modes\": [";
    for (int j = 0; j < f.n_modes(); ++j) {
        os << (j ? ",\n    [" : "\n    [");
        for (int i = 0; i < g.n_t; ++i) os << (i ? "," : "") << detail::num17(f.modes[j][i]);
        os << "]";
    }
    os << "\n  ]\n}\n";
}

inline void write_field_file(const std::string& path, const FsParameters& params,
                             const Field& f) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open " + path + " for writing");
    write_field(os, params, f);
}

struct FieldFile {
    FsParameters params;
    Field field;
};

inline FieldFile read_field(std::istream& is) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error(std::string("field file parse error: ") + e.what());
    }
    try {
        const auto& jp = j.at("params");
        FsParameters fp = make_params(jp.at("d").get<int>(), jp.at("p").get<double>());
        const auto& jg = j.at("grid");
        const double t_min = jg.at("t_min").get<double>();
        const double t_max = jg.at("t_max").get<double>();
        const int n_t = jg.at("n_t").get<int>();
        const int max_mode = jg.at("max_mode").get<int>();
        // Rebuild the grid from its extent; pad is recovered as an exact span.
        auto grid = make_grid(fp, {0.5 * (t_min + t_max)}, 0.5 * (t_max - t_min), n_t, max_mode);
        Field f(grid);
        const auto& modes = j.at("modes");
        if (static_cast<int>(modes.size()) != max_mode + 1)
            throw io_error("field file: mode count mismatch");
        for (int m = 0; m <= max_mode; ++m) {
            const auto& arr = modes.at(m);
            if (static_cast<int>(arr.size()) != n_t)
                throw io_error("field file: profile length mismatch");
            for (int i = 0; i < n_t; ++i) f.modes[m][i] = arr.at(i).get<double>();
        }
        return {fp, std::move(f)};
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("field file schema error: ") + e.what());
    }
}

inline FieldFile read_field_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open " + path);
    return read_field(is);
}

inline nlohmann::json decomposition_report(const FsParameters& params,
                                           const DecompositionResult& dec) {
    nlohmann::json j;
    for (const auto& s : dec.specs) {
        j["alphas"].push_back(s.alpha);
        j["centers"].push_back(s.center);
    }
    j["betas"] = dec.betas;
    j["dist"] = dec.dist;
    j["q"] = dec.q;
    j["nu_in_window"] = dec.nu_in_window;
    j["rho_norm"] = h1_norm(params, dec.rho);
    j["rho_star_norm"] = h1_norm(params, dec.rho_star);
    for (const auto& [name, v] : dec.ortho_residuals) j["ortho_residuals"][name] = v;

    // Equivalence-ratio diagnostic: dist^2 vs sum beta^2 ||w||^2 + ||rho_*||^2.
    double denom = h1_inner(params, dec.rho_star, dec.rho_star);
    for (size_t k = 0; k < dec.specs.size(); ++k) {
        Field w = kernel_profile(params, dec.specs[k].center, dec.rho.grid);
        denom += dec.betas[k] * dec.betas[k] * h1_inner(params, w, w);
    }
    j["eq314_ratio"] = denom > 0 ? dec.dist * dec.dist / denom : 0.0;
    return j;
}

/// Sweep CSV with the fixed column set; one row per record in schedule order.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRecord>& recs) {
    os << "beta,R,q_r,f_dual,dist,nu_ok,regime,alpha1,alpha2,s1,s2,beta1,beta2\n";
    for (const auto& r : recs) {
        os << detail::num17(r.beta) << ',' << detail::num17(r.R) << ','
           << detail::num17(r.q_r) << ',' << detail::num17(r.f_dual) << ','
           << detail::num17(r.dist) << ',' << (r.nu_ok ? 1 : 0) << ','
           << (r.failed ? "failed" : regime_name(r.regime)) << ','
           << detail::num17(r.alpha1) << ',' << detail::num17(r.alpha2) << ','
           << detail::num17(r.s1) << ',' << detail::num17(r.s2) << ','
           << detail::num17(r.beta1) << ',' << detail::num17(r.beta2) << '\n';
    }
}

/// Two-column log-log plot data for one fitted pair.
inline void write_plot_data(std::ostream& os, const std::vector<SweepRecord>& recs,
                            const std::string& xname, const std::string& yname) {
    os << "# " << xname << ' ' << yname << '\n';
    for (const auto& r : recs) {
        if (r.failed) continue;
        os << detail::num17(sweep_field(r, xname)) << ' '
           << detail::num17(sweep_field(r, yname)) << '\n';
    }
}

}  // namespace ckn
