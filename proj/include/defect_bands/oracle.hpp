#pragma once

#include "defect_bands/bands.hpp"
#include "defect_bands/branches.hpp"
#include "defect_bands/linalg.hpp"
#include "defect_bands/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace defect_bands {

enum class Boundary { Periodic, Open };

inline constexpr long kOracleMaxDimension = 20000;

/// Real-space truncation of C = A + A_1 + ... + A_N. Per axis, an open box
/// holds cells -L..L (L >= 0) and a periodic box holds cells 0..L-1; the defect
/// sublattices pass through coordinate 0 in both cases.
struct TruncatedOperator {
    std::vector<long> half_width;
    std::vector<Boundary> bc;
    std::vector<long> extent;   ///< cells per axis
    Eigen::Index cell_size = 1;
    ComplexMatrix matrix;

    long cells() const {
        long c = 1;
        for (long e : extent) c *= e;
        return c;
    }

    /// Lattice coordinates of a cell (open axes centred on 0).
    std::vector<long> coords(long cell) const {
        std::vector<long> c(extent.size());
        for (std::size_t a = extent.size(); a-- > 0;) {
            const long l = cell % extent[a];
            cell /= extent[a];
            c[a] = bc[a] == Boundary::Open ? l - half_width[a] : l;
        }
        return c;
    }
};

namespace detail {

/// Cell index of lattice coordinates, wrapping periodic axes; -1 if the
/// target falls outside an open axis.
inline long cell_index(const TruncatedOperator& t, const std::vector<long>& c) {
    long idx = 0;
    for (std::size_t a = 0; a < c.size(); ++a) {
        long l;
        if (t.bc[a] == Boundary::Open) {
            l = c[a] + t.half_width[a];
            if (l < 0 || l >= t.extent[a]) return -1;
        } else {
            l = ((c[a] % t.extent[a]) + t.extent[a]) % t.extent[a];
        }
        idx = idx * t.extent[a] + l;
    }
    return idx;
}

}  // namespace detail

inline TruncatedOperator assemble_truncated(const ProblemSpec& spec, const std::vector<long>& half_width,
                                            const std::vector<Boundary>& bc) {
    const auto n_dim = static_cast<std::size_t>(spec.lattice_dim);
    if (half_width.size() != n_dim || bc.size() != n_dim) {
        throw InputError("assemble_truncated: need one box size and one boundary condition per axis");
    }
    if (spec.bulk.max_power() > 1) {
        throw InputError("assemble_truncated: quadratic-in-omega problems must first be linearized to companion form");
    }
    if (!spec.bulk.is_standard_shift()) {
        throw InputError("assemble_truncated: bulk must have the eigenvalue form A(k) - omega I");
    }
    TruncatedOperator t;
    t.half_width = half_width;
    t.bc = bc;
    t.cell_size = spec.cell_size;
    for (std::size_t a = 0; a < n_dim; ++a) {
        if (half_width[a] < (bc[a] == Boundary::Open ? 0 : 1)) {
            throw InputError("assemble_truncated: box size must be >= 0 (open) or >= 1 (periodic)");
        }
        t.extent.push_back(bc[a] == Boundary::Open ? 2 * half_width[a] + 1 : half_width[a]);
    }
    const long dim = t.cells() * spec.cell_size;
    if (dim > kOracleMaxDimension) {
        throw InputError("assemble_truncated: truncated dimension " + std::to_string(dim) + " exceeds " +
                         std::to_string(kOracleMaxDimension) + "; use a smaller L");
    }
    const Eigen::Index m = spec.cell_size;
    t.matrix = ComplexMatrix::Zero(dim, dim);

    auto couple = [&](long from, const std::vector<long>& target, const ComplexMatrix& block) {
        const long to = detail::cell_index(t, target);
        if (to < 0) return;
        t.matrix.block(to * m, from * m, m, m) += block;
    };

    const auto& bulk = spec.bulk.has_term(0) ? spec.bulk.term(0) : TrigMatrixPolynomial(spec.lattice_dim, m);
    for (long cell = 0; cell < t.cells(); ++cell) {
        const auto c = t.coords(cell);
        for (const auto& [n, h] : bulk.coefficients()) {
            auto target = c;
            for (std::size_t a = 0; a < n_dim; ++a) target[a] += n[a];
            couple(cell, target, h);
        }
    }
    for (const auto& d : spec.defects) {
        if (d.symbol.max_power() > 0) throw InputError("assemble_truncated: omega-dependent defects are not supported");
        if (d.stencils.empty()) {
            throw InputError("assemble_truncated: defect codim " + std::to_string(d.codim) +
                             " has no real-space stencil");
        }
        const auto it = d.stencils.find(0);
        if (it == d.stencils.end()) continue;
        const auto j = static_cast<std::size_t>(d.codim);
        for (long cell = 0; cell < t.cells(); ++cell) {
            const auto c = t.coords(cell);
            if (std::any_of(c.begin(), c.begin() + static_cast<long>(j), [](long v) { return v != 0; })) continue;
            for (const auto& [off, h] : it->second.hoppings) {
                auto target = c;
                for (std::size_t a = j; a < n_dim; ++a) target[a] += off[a - j];
                couple(cell, target, h);
            }
        }
    }
    bool self_adjoint = spec.bulk.is_hermitian_family();
    for (const auto& d : spec.defects) {
        for (const auto& [p, st] : d.stencils) self_adjoint = self_adjoint && st.is_self_adjoint();
    }
    if (self_adjoint) {
        const double asym = hermitian_deviation(t.matrix);
        if (asym > 1e-14 * std::max(1.0, t.matrix.cwiseAbs().maxCoeff())) {
            throw std::logic_error("assemble_truncated: self-adjoint problem produced a non-Hermitian matrix");
        }
    }
    return t;
}

namespace detail {

inline bool is_real(const ComplexMatrix& a) { return a.imag().isZero(0.0); }

}  // namespace detail

/// All eigenvalues of the (Hermitian) truncated operator, ascending.
inline std::vector<double> oracle_eigenvalues(const TruncatedOperator& t) {
    const auto& a = t.matrix;
    if (a.rows() > kOracleMaxDimension) throw InputError("oracle_eigenvalues: dimension above cap; use a smaller L");
    if (!is_hermitian(a, 1e-12)) throw InputError("oracle_eigenvalues: truncated operator is not Hermitian");
    Eigen::VectorXd ev;
    if (detail::is_real(a)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.real(), Eigen::EigenvaluesOnly);
        ev = es.eigenvalues();
    } else {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a, Eigen::EigenvaluesOnly);
        ev = es.eigenvalues();
    }
    std::vector<double> out(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end());
    return out;
}

/// Fraction of each eigenvector's weight on cells within `edge` cells of an
/// open boundary, paired with ascending eigenvalues.
inline std::pair<std::vector<double>, std::vector<double>> oracle_edge_weights(const TruncatedOperator& t, long edge) {
    const auto& a = t.matrix;
    if (!is_hermitian(a, 1e-12)) throw InputError("oracle: truncated operator is not Hermitian");
    std::vector<bool> near(static_cast<std::size_t>(t.cells()), false);
    for (long cell = 0; cell < t.cells(); ++cell) {
        const auto c = t.coords(cell);
        for (std::size_t ax = 0; ax < c.size(); ++ax) {
            if (t.bc[ax] == Boundary::Open && t.half_width[ax] - std::abs(c[ax]) < edge) near[static_cast<std::size_t>(cell)] = true;
        }
    }
    auto collect = [&](const auto& es) {
        std::vector<double> vals, weights;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            vals.push_back(es.eigenvalues()(i));
            double w = 0.0;
            for (long cell = 0; cell < t.cells(); ++cell) {
                if (near[static_cast<std::size_t>(cell)]) {
                    w += es.eigenvectors().col(i).segment(cell * t.cell_size, t.cell_size).squaredNorm();
                }
            }
            weights.push_back(w);
        }
        return std::pair{vals, weights};
    };
    if (detail::is_real(a)) return collect(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.real()));
    return collect(Eigen::SelfAdjointEigenSolver<ComplexMatrix>(a));
}

/// Exact identity check for a defect-free problem in a periodic box of L
/// cells per axis: oracle eigenvalues versus bands at k = 2 pi m / L.
inline double periodic_box_check(const ProblemSpec& spec, long cells_per_axis) {
    if (!spec.defects.empty()) throw InputError("periodic_box_check: problem must have no defects");
    const auto n_dim = static_cast<std::size_t>(spec.lattice_dim);
    const auto t = assemble_truncated(spec, std::vector<long>(n_dim, cells_per_axis),
                                      std::vector<Boundary>(n_dim, Boundary::Periodic));
    const auto oracle = oracle_eigenvalues(t);
    std::vector<double> predicted;
    std::size_t count = 1;
    for (std::size_t a = 0; a < n_dim; ++a) count *= static_cast<std::size_t>(cells_per_axis);
    for (std::size_t flat = 0; flat < count; ++flat) {
        std::vector<double> k(n_dim);
        std::size_t rem = flat;
        for (std::size_t a = n_dim; a-- > 0;) {
            const long mm = static_cast<long>(rem % static_cast<std::size_t>(cells_per_axis));
            rem /= static_cast<std::size_t>(cells_per_axis);
            k[a] = kTwoPi * static_cast<double>(mm) / static_cast<double>(cells_per_axis);
        }
        for (double w : bands(spec, k)) predicted.push_back(w);
    }
    std::sort(predicted.begin(), predicted.end());
    if (predicted.size() != oracle.size()) {
        throw std::logic_error("periodic_box_check: eigenvalue count mismatch");
    }
    double dev = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) dev = std::max(dev, std::abs(oracle[i] - predicted[i]));
    return dev;
}

struct PointMatch {
    double predicted = 0.0;
    double nearest = 0.0;
    double gap = 0.0;
};

struct OracleComparison {
    std::size_t checked = 0;
    std::size_t flagged_edge = 0;
    double max_distance = 0.0;          ///< largest distance of an unflagged eigenvalue to the spectrum
    std::vector<double> unexplained;    ///< unflagged eigenvalues farther than tol from the spectrum
    std::vector<PointMatch> points;     ///< isolated spectral points and their nearest oracle eigenvalue
    bool ok = true;
};

inline double nearest_to(const std::vector<double>& sorted, double x) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
    double best = INFINITY, val = x;
    if (it != sorted.end() && std::abs(*it - x) < best) {
        best = std::abs(*it - x);
        val = *it;
    }
    if (it != sorted.begin() && std::abs(*(it - 1) - x) < best) val = *(it - 1);
    return val;
}

/// Checks open-box oracle eigenvalues against an assembled spectrum.
/// Eigenvalues whose eigenvectors carry more than half their weight within
/// two cells of an open boundary are flagged as edge artifacts.
inline OracleComparison compare_spectra(const SpectralResult& result, const TruncatedOperator& t, double tol) {
    OracleComparison rep;
    const auto [vals, weights] = oracle_edge_weights(t, 2);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        ++rep.checked;
        if (weights[i] > 0.5) {
            ++rep.flagged_edge;
            continue;
        }
        double d = distance_to(result.omega_set, vals[i]);
        if (!result.omega_window.contains(vals[i])) d = 0.0;
        rep.max_distance = std::max(rep.max_distance, d);
        if (d > tol) rep.unexplained.push_back(vals[i]);
    }
    for (const auto& p : result.pieces) {
        if (p.kind != PieceKind::IsolatedPoint) continue;
        const double near = nearest_to(vals, p.range.lo);
        rep.points.push_back({p.range.lo, near, std::abs(near - p.range.lo)});
        if (std::abs(near - p.range.lo) > tol) rep.ok = false;
    }
    if (!rep.unexplained.empty()) rep.ok = false;
    return rep;
}

}  // namespace defect_bands
