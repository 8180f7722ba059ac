#pragma once

#include "defect_bands/interval.hpp"
#include "defect_bands/linalg.hpp"
#include "defect_bands/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace defect_bands {

/// Real-space hopping stencil: hopping(n) is the M x M block carrying
/// amplitude from cell 0 into cell n.
struct Stencil {
    int dim = 0;
    Eigen::Index cell_size = 1;
    std::map<Offset, ComplexMatrix> hoppings;

    Stencil() = default;
    Stencil(int d, Eigen::Index m) : dim(d), cell_size(m) {}

    Stencil& hop(const Offset& n, const ComplexMatrix& a) {
        if (n.size() != static_cast<std::size_t>(dim)) {
            throw InputError("Stencil: offset " + to_string(n) + " does not have length " + std::to_string(dim));
        }
        require_square(a, "Stencil::hop");
        if (a.rows() != cell_size) throw InputError("Stencil: hopping block has wrong cell size");
        hoppings[n] = a;
        return *this;
    }

    bool is_self_adjoint(double rel_tol = 1e-12) const {
        double scale = std::numeric_limits<double>::min();
        for (const auto& [n, a] : hoppings) scale = std::max(scale, a.norm());
        for (const auto& [n, a] : hoppings) {
            auto it = hoppings.find(negate(n));
            const ComplexMatrix mirror =
                it == hoppings.end() ? ComplexMatrix::Zero(cell_size, cell_size) : it->second;
            if ((mirror - a.adjoint()).cwiseAbs().maxCoeff() > rel_tol * scale) return false;
        }
        return true;
    }
};

inline TrigMatrixPolynomial stencil_to_symbol(const Stencil& st) {
    TrigMatrixPolynomial p(st.dim, st.cell_size);
    for (const auto& [n, a] : st.hoppings) p.set(n, a);
    return p;
}

/// Lifts a stencil living on the codim-j sublattice (cells with the first j
/// coordinates zero) to a symbol on the full N-torus. The coefficient at
/// (0,...,0,m) is (2 pi)^{-j/2} hopping(m), so that k -> A_j(k) <f>_{1..j}
/// reproduces the real-space defect action.
inline TrigMatrixPolynomial defect_stencil_to_symbol(const Stencil& st, int codim, int lattice_dim) {
    if (codim < 1 || codim > lattice_dim) {
        throw InputError("defect_stencil_to_symbol: codim " + std::to_string(codim) + " outside 1.." +
                         std::to_string(lattice_dim));
    }
    if (st.dim != lattice_dim - codim) {
        throw InputError("defect_stencil_to_symbol: stencil dim " + std::to_string(st.dim) + " != N - codim = " +
                         std::to_string(lattice_dim - codim));
    }
    const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * codim);
    TrigMatrixPolynomial p(lattice_dim, st.cell_size);
    for (const auto& [m, a] : st.hoppings) {
        Offset n(static_cast<std::size_t>(codim), 0);
        n.insert(n.end(), m.begin(), m.end());
        p.set(n, norm * a);
    }
    return p;
}

/// Perturbation supported on the codim-j coordinate sublattice through the
/// origin cell.
struct DefectLayer {
    int codim = 1;
    OmegaSymbol symbol;
    /// Raw real-space stencils per omega power; empty when the layer was
    /// built directly from a symbol.
    std::map<int, Stencil> stencils;
    bool normalization_applied = false;

    static DefectLayer from_stencils(int codim, int lattice_dim, const std::map<int, Stencil>& per_power) {
        if (per_power.empty()) throw InputError("DefectLayer: no stencil terms");
        const Eigen::Index m = per_power.begin()->second.cell_size;
        DefectLayer d;
        d.codim = codim;
        d.symbol = OmegaSymbol(lattice_dim, m);
        for (const auto& [p, st] : per_power) {
            d.symbol.set_term(p, defect_stencil_to_symbol(st, codim, lattice_dim));
        }
        d.stencils = per_power;
        d.normalization_applied = true;
        return d;
    }

    /// Uses an already-normalized full-torus symbol as is.
    static DefectLayer from_symbol(int codim, OmegaSymbol symbol) {
        DefectLayer d;
        d.codim = codim;
        d.symbol = std::move(symbol);
        return d;
    }
};

struct ToleranceSet {
    double det_zero_tol = 1e-9;
    double quad_rel_tol = 1e-12;
    double band_guard = 1e-3;
    double root_tol_omega = 1e-12;
    int k_grid_base = 16;
};

/// Sampling resolution for sweeps: k nodes per axis, omega samples across
/// the window, and worker threads (never changes results).
struct SweepGrids {
    long k_points = 32;
    long omega_points = 200;
    int threads = 1;
};

struct ProblemSpec {
    int lattice_dim = 1;
    Eigen::Index cell_size = 1;
    OmegaSymbol bulk;
    std::vector<DefectLayer> defects;
    ToleranceSet tolerances;
    Interval omega_window{-1.0, 1.0};

    const DefectLayer* defect(int codim) const {
        for (const auto& d : defects) {
            if (d.codim == codim) return &d;
        }
        return nullptr;
    }

    int highest_defect_codim() const {
        int h = 0;
        for (const auto& d : defects) h = std::max(h, d.codim);
        return h;
    }

    void sort_defects() {
        std::stable_sort(defects.begin(), defects.end(),
                         [](const DefectLayer& a, const DefectLayer& b) { return a.codim < b.codim; });
    }
};

struct Violation {
    std::string code;
    std::string message;
};

struct Diagnostics {
    std::vector<Violation> violations;
    bool bulk_hermitian = false;
    std::map<int, bool> defect_hermitian;
    int max_power = -1;

    bool ok() const noexcept { return violations.empty(); }
    bool has(const std::string& code) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
    }
};

/// Checks every structural invariant of a problem. Violations are reported
/// in check order; nothing throws.
inline Diagnostics validate(const ProblemSpec& spec) {
    Diagnostics d;
    auto fail = [&](std::string code, std::string msg) { d.violations.push_back({std::move(code), std::move(msg)}); };

    if (spec.lattice_dim < 1) fail("lattice_dim", "lattice dimension must be >= 1");
    if (spec.cell_size < 1) fail("cell_size", "cell size must be >= 1");

    auto check_symbol = [&](const OmegaSymbol& s, const std::string& what) {
        if (s.dim() != spec.cell_size) {
            fail("cell_size_mismatch", what + " has cell size " + std::to_string(s.dim()) + ", expected " +
                                           std::to_string(spec.cell_size));
        }
        if (s.torus_dim() != spec.lattice_dim) {
            fail("torus_dim_mismatch", what + " has torus dimension " + std::to_string(s.torus_dim()) +
                                           ", expected " + std::to_string(spec.lattice_dim));
        }
        if (s.max_power() > OmegaSymbol::kMaxNativePower) {
            fail("omega_power_unsupported", what + " uses omega power " + std::to_string(s.max_power()) +
                                                "; at most " + std::to_string(OmegaSymbol::kMaxNativePower) +
                                                " is supported");
        }
        d.max_power = std::max(d.max_power, s.max_power());
    };

    if (spec.bulk.terms().empty()) fail("bulk_empty", "bulk symbol has no terms");
    check_symbol(spec.bulk, "bulk symbol");
    d.bulk_hermitian = spec.bulk.is_hermitian_family();

    std::map<int, int> seen;
    for (const auto& layer : spec.defects) {
        const std::string what = "defect codim " + std::to_string(layer.codim);
        if (layer.codim < 1 || layer.codim > spec.lattice_dim) {
            fail("codim_out_of_range", what + " outside 1.." + std::to_string(spec.lattice_dim));
            continue;
        }
        if (++seen[layer.codim] == 2) {
            fail("duplicate_codim", "duplicate codim " + std::to_string(layer.codim));
        }
        check_symbol(layer.symbol, what);
        for (const auto& [p, t] : layer.symbol.terms()) {
            for (const auto& [n, a] : t.coefficients()) {
                const bool depends = std::any_of(n.begin(), n.begin() + std::min<std::size_t>(layer.codim, n.size()),
                                                 [](int v) { return v != 0; });
                if (depends && !a.isZero(0.0)) {
                    fail("defect_depends_on_averaged_direction",
                         what + ": defect depends on averaged direction (offset " + to_string(n) + ")");
                }
            }
        }
        d.defect_hermitian[layer.codim] = layer.symbol.is_hermitian_family();
    }
    for (std::size_t i = 1; i < spec.defects.size(); ++i) {
        if (spec.defects[i].codim < spec.defects[i - 1].codim) {
            fail("defects_unsorted", "defects must be ordered by codim");
            break;
        }
    }

    const auto& t = spec.tolerances;
    if (!(t.det_zero_tol > 0) || !(t.quad_rel_tol > 0) || !(t.band_guard > 0) || !(t.root_tol_omega > 0) ||
        t.k_grid_base <= 0) {
        fail("tolerance_nonpositive", "all tolerances must be strictly positive");
    } else if (!(t.det_zero_tol < t.band_guard)) {
        fail("tolerance_order", "det_zero_tol must be smaller than band_guard");
    }
    if (t.k_grid_base > 0 && (t.k_grid_base < 4 || (t.k_grid_base & (t.k_grid_base - 1)) != 0)) {
        fail("k_grid_base", "k_grid_base must be a power of two >= 4");
    }
    if (!(spec.omega_window.lo < spec.omega_window.hi) || !std::isfinite(spec.omega_window.lo) ||
        !std::isfinite(spec.omega_window.hi)) {
        fail("omega_window", "omega window must be a finite interval with min < max");
    }
    return d;
}

}  // namespace defect_bands
