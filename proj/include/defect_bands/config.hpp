#pragma once

#include "defect_bands/linalg.hpp"
#include "defect_bands/model.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace defect_bands {

/// Unreadable or malformed configuration (I/O, JSON syntax, schema shape).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parsed configuration: the problem plus its sweep resolution.
struct ConfigDocument {
    ProblemSpec spec;
    SweepGrids grids;
};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& j, const std::string& where, const std::set<std::string>& required,
                         const std::set<std::string>& optional = {}) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (!required.count(key) && !optional.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
    for (const auto& key : required) {
        if (!j.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
    }
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

inline long integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<long>();
}

inline ComplexMatrix matrix(const json& re, const json& im, Eigen::Index m, const std::string& where) {
    ComplexMatrix a(m, m);
    for (const auto* part : {&re, &im}) {
        if (!part->is_array() || static_cast<Eigen::Index>(part->size()) != m) {
            throw ConfigError(where + ": expected a " + std::to_string(m) + "x" + std::to_string(m) + " array");
        }
        for (const auto& row : *part) {
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
                throw ConfigError(where + ": expected rows of length " + std::to_string(m));
            }
        }
    }
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
            const auto rr = static_cast<std::size_t>(r), cc = static_cast<std::size_t>(c);
            a(r, c) = Complex(number(re[rr][cc], where), number(im[rr][cc], where));
        }
    }
    return a;
}

/// Reads `omega_powers` into one stencil per power, offsets of length `dim`.
inline std::map<int, Stencil> stencils(const json& j, int dim, Eigen::Index m, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array");
    std::map<int, Stencil> out;
    for (std::size_t t = 0; t < j.size(); ++t) {
        const std::string at = where + "[" + std::to_string(t) + "]";
        require_keys(j[t], at, {"power", "coefficients"});
        const long power = integer(j[t]["power"], at + ".power");
        if (power < 0) throw ConfigError(at + ".power: must be >= 0");
        if (out.count(static_cast<int>(power))) throw ConfigError(at + ": repeated power " + std::to_string(power));
        Stencil st(dim, m);
        const auto& coeffs = j[t]["coefficients"];
        if (!coeffs.is_array()) throw ConfigError(at + ".coefficients: expected an array");
        for (std::size_t c = 0; c < coeffs.size(); ++c) {
            const std::string cat = at + ".coefficients[" + std::to_string(c) + "]";
            require_keys(coeffs[c], cat, {"offset", "re"}, {"im"});
            const auto& off = coeffs[c]["offset"];
            if (!off.is_array()) throw ConfigError(cat + ".offset: expected an integer array");
            Offset n;
            for (const auto& v : off) n.push_back(static_cast<int>(integer(v, cat + ".offset")));
            if (n.size() != static_cast<std::size_t>(dim)) {
                throw ConfigError(cat + ".offset: expected length " + std::to_string(dim));
            }
            if (st.hoppings.count(n)) throw ConfigError(cat + ": repeated offset " + to_string(n));
            const json zeros = json(std::vector<std::vector<double>>(static_cast<std::size_t>(m),
                                                                      std::vector<double>(static_cast<std::size_t>(m), 0.0)));
            st.hop(n, matrix(coeffs[c]["re"], coeffs[c].contains("im") ? coeffs[c]["im"] : zeros, m, cat));
        }
        out.emplace(static_cast<int>(power), std::move(st));
    }
    return out;
}

/// 1-based line and column of a byte offset.
inline std::string position(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Builds a problem from JSON text. Shape errors throw ConfigError; domain
/// problems (duplicate codims, bad tolerances, ...) are left to validate().
inline ConfigDocument parse_config(const std::string& text) {
    using nlohmann::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports the offset one past the offending byte.
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        throw ConfigError("malformed JSON at " + detail::position(text, at) + ": " + e.what());
    }
    detail::require_keys(root, "config", {"dimension", "cell_size", "bulk", "omega_window"},
                         {"defects", "tolerances", "grids"});
    ConfigDocument doc;
    auto& spec = doc.spec;
    const long n_dim = detail::integer(root["dimension"], "dimension");
    const long m = detail::integer(root["cell_size"], "cell_size");
    if (n_dim < 1 || n_dim > 8) throw ConfigError("dimension: must be in 1..8");
    if (m < 1 || m > 64) throw ConfigError("cell_size: must be in 1..64");
    spec.lattice_dim = static_cast<int>(n_dim);
    spec.cell_size = m;

    detail::require_keys(root["bulk"], "bulk", {"omega_powers"});
    spec.bulk = OmegaSymbol(spec.lattice_dim, m);
    for (const auto& [p, st] : detail::stencils(root["bulk"]["omega_powers"], spec.lattice_dim, m, "bulk.omega_powers")) {
        spec.bulk.set_term(p, stencil_to_symbol(st));
    }

    if (root.contains("defects")) {
        const auto& defects = root["defects"];
        if (!defects.is_array()) throw ConfigError("defects: expected an array");
        for (std::size_t i = 0; i < defects.size(); ++i) {
            const std::string at = "defects[" + std::to_string(i) + "]";
            detail::require_keys(defects[i], at, {"codim", "omega_powers"});
            const long codim = detail::integer(defects[i]["codim"], at + ".codim");
            if (codim < 1 || codim > n_dim) {
                throw ConfigError(at + ".codim: " + std::to_string(codim) + " outside 1.." + std::to_string(n_dim));
            }
            const int sub_dim = spec.lattice_dim - static_cast<int>(codim);
            spec.defects.push_back(DefectLayer::from_stencils(
                static_cast<int>(codim), spec.lattice_dim,
                detail::stencils(defects[i]["omega_powers"], sub_dim, m, at + ".omega_powers")));
        }
    }

    if (root.contains("tolerances")) {
        const auto& t = root["tolerances"];
        detail::require_keys(t, "tolerances", {},
                             {"det_zero_tol", "quad_rel_tol", "band_guard", "root_tol_omega", "k_grid_base"});
        auto& tol = spec.tolerances;
        if (t.contains("det_zero_tol")) tol.det_zero_tol = detail::number(t["det_zero_tol"], "tolerances.det_zero_tol");
        if (t.contains("quad_rel_tol")) tol.quad_rel_tol = detail::number(t["quad_rel_tol"], "tolerances.quad_rel_tol");
        if (t.contains("band_guard")) tol.band_guard = detail::number(t["band_guard"], "tolerances.band_guard");
        if (t.contains("root_tol_omega")) {
            tol.root_tol_omega = detail::number(t["root_tol_omega"], "tolerances.root_tol_omega");
        }
        if (t.contains("k_grid_base")) {
            tol.k_grid_base = static_cast<int>(detail::integer(t["k_grid_base"], "tolerances.k_grid_base"));
        }
    }

    const auto& w = root["omega_window"];
    detail::require_keys(w, "omega_window", {"min", "max"});
    spec.omega_window = {detail::number(w["min"], "omega_window.min"), detail::number(w["max"], "omega_window.max")};

    if (root.contains("grids")) {
        const auto& g = root["grids"];
        detail::require_keys(g, "grids", {}, {"k_points", "omega_points"});
        if (g.contains("k_points")) doc.grids.k_points = detail::integer(g["k_points"], "grids.k_points");
        if (g.contains("omega_points")) doc.grids.omega_points = detail::integer(g["omega_points"], "grids.omega_points");
        if (doc.grids.k_points < 4 || doc.grids.omega_points < 2) {
            throw ConfigError("grids: need k_points >= 4 and omega_points >= 2");
        }
    }
    return doc;
}

inline ConfigDocument load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw ConfigError("cannot read config file: " + path);
    return parse_config(ss.str());
}

}  // namespace defect_bands
