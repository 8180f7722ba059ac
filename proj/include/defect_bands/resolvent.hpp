#pragma once

#include "defect_bands/linalg.hpp"
#include "defect_bands/model.hpp"
#include "defect_bands/quadrature.hpp"
#include "defect_bands/symbol.hpp"

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace defect_bands {

/// Vector-valued finite Fourier series k -> sum_n e^{i n.k} v^(n).
struct TrigVectorPolynomial {
    int torus_dim = 0;
    Eigen::Index dim = 1;
    std::map<Offset, ComplexVector> coeffs;

    ComplexVector eval(std::span<const double> k) const {
        if (k.size() != static_cast<std::size_t>(torus_dim)) throw InputError("TrigVectorPolynomial: bad k length");
        ComplexVector out = ComplexVector::Zero(dim);
        for (const auto& [n, v] : coeffs) {
            double phase = 0.0;
            for (std::size_t i = 0; i < n.size(); ++i) phase += n[i] * k[i];
            out += std::polar(1.0, phase) * v;
        }
        return out;
    }
};

/// Full periodic grid with n nodes per axis over all N axes; flat index is
/// lexicographic with axis 0 slowest, so the suffix over axes i..N-1 of a
/// flat index f is f mod n^{N-i}.
class FullGrid {
public:
    FullGrid(int lattice_dim, long n) : dim_(lattice_dim), n_(n) {
        if (n < 4 || !is_power_of_two(n)) throw InputError("FullGrid: points per axis must be a power of two >= 4");
    }

    int lattice_dim() const noexcept { return dim_; }
    long points_per_axis() const noexcept { return n_; }

    /// Number of nodes over axes level..N-1.
    std::size_t suffix_size(int level) const noexcept {
        std::size_t s = 1;
        for (int a = level; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }
    std::size_t size() const noexcept { return suffix_size(0); }

    /// Wavevector of suffix index r at `level`; components below level are zero.
    std::vector<double> point(int level, std::size_t r) const {
        std::vector<double> k(static_cast<std::size_t>(dim_), 0.0);
        for (int a = dim_; a-- > level;) {
            k[static_cast<std::size_t>(a)] = periodic_node(static_cast<long>(r % static_cast<std::size_t>(n_)), n_);
            r /= static_cast<std::size_t>(n_);
        }
        return k;
    }

    /// Single-axis bracket weight (2 pi)^{-1/2} (2 pi / n).
    double axis_weight() const noexcept { return std::pow(kTwoPi, -0.5) * kTwoPi / static_cast<double>(n_); }

private:
    int dim_;
    long n_;
};

/// Forward action (C - omega) f = B_0 f + sum_j A_j <f>_{1..j} on the grid,
/// with discrete trapezoid brackets.
inline std::vector<ComplexVector> apply_operator(const ProblemSpec& spec, double omega, const FullGrid& grid,
                                                 const std::vector<ComplexVector>& f) {
    const int n_dim = spec.lattice_dim;
    if (f.size() != grid.size()) throw InputError("apply_operator: sample count does not match grid");
    std::vector<ComplexVector> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = spec.bulk.eval(omega, grid.point(0, i)) * f[i];
    for (const auto& d : spec.defects) {
        const int j = d.codim;
        const std::size_t s = grid.suffix_size(j);
        const double w = std::pow(grid.axis_weight(), j);
        std::vector<ComplexVector> avg(s, ComplexVector::Zero(spec.cell_size));
        for (std::size_t i = 0; i < f.size(); ++i) avg[i % s] += f[i];
        for (auto& v : avg) v *= w;
        for (std::size_t i = 0; i < f.size(); ++i) {
            out[i] += d.symbol.eval(omega, grid.point(0, i)) * avg[i % s];
        }
    }
    (void)n_dim;
    return out;
}

struct ResolventResult {
    long points_per_axis = 0;
    std::vector<ComplexVector> f;
    double residual = 0.0;
    std::vector<double> min_sigma_per_level;
};

inline double grid_norm(const std::vector<ComplexVector>& v) {
    double s = 0.0;
    for (const auto& x : v) s += x.squaredNorm();
    return std::sqrt(s);
}

/// Solves (C - omega) f = g on the grid by reducing through the cascade:
/// g_i = <B_{i-1}^-1 g_{i-1}>_i, then u_N = B_N^-1 g_N and back-substitution
/// u_i = B_i^-1 (g_i - G_i sum_{j>i} A_j u_j), f = u_0.
inline ResolventResult resolvent_apply(const ProblemSpec& spec, double omega, const std::vector<ComplexVector>& g,
                                       long n) {
    const int n_dim = spec.lattice_dim;
    const Eigen::Index m = spec.cell_size;
    const FullGrid grid(n_dim, n);
    if (g.size() != grid.size()) throw InputError("resolvent_apply: right-hand side has wrong sample count");
    const double w = grid.axis_weight();
    const double zero_tol = spec.tolerances.det_zero_tol;

    ResolventResult res;
    res.points_per_axis = n;
    std::vector<std::vector<ComplexMatrix>> binv(static_cast<std::size_t>(n_dim) + 1);
    std::vector<std::vector<ComplexMatrix>> gmat(static_cast<std::size_t>(n_dim) + 1);
    std::vector<std::vector<ComplexVector>> rhs(static_cast<std::size_t>(n_dim) + 1);

    auto invert_level = [&](int level, const ComplexMatrix& b) {
        const double sigma = smallest_singular_value(b);
        auto& slot = res.min_sigma_per_level[static_cast<std::size_t>(level)];
        slot = std::min(slot, sigma);
        if (sigma <= zero_tol) {
            throw SingularMatrix("resolvent_apply: level " + std::to_string(level) +
                                     " is not certified invertible at omega = " + std::to_string(omega),
                                 sigma);
        }
        return inverse(b);
    };
    res.min_sigma_per_level.assign(static_cast<std::size_t>(n_dim) + 1, INFINITY);

    binv[0].resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) binv[0][i] = invert_level(0, spec.bulk.eval(omega, grid.point(0, i)));
    rhs[0] = g;

    for (int i = 1; i <= n_dim; ++i) {
        const std::size_t s = grid.suffix_size(i);
        const std::size_t below = grid.suffix_size(i - 1);
        auto& gi = gmat[static_cast<std::size_t>(i)];
        auto& ri = rhs[static_cast<std::size_t>(i)];
        gi.assign(s, ComplexMatrix::Zero(m, m));
        ri.assign(s, ComplexVector::Zero(m));
        for (std::size_t f = 0; f < below; ++f) {
            const auto& bi = binv[static_cast<std::size_t>(i) - 1][f];
            if (i == 1) {
                gi[f % s] += bi;
            } else {
                gi[f % s] += bi * gmat[static_cast<std::size_t>(i) - 1][f];
            }
            ri[f % s] += bi * rhs[static_cast<std::size_t>(i) - 1][f];
        }
        for (auto& x : gi) x *= w;
        for (auto& x : ri) x *= w;
        auto& bi = binv[static_cast<std::size_t>(i)];
        bi.resize(s);
        const DefectLayer* d = spec.defect(i);
        for (std::size_t r = 0; r < s; ++r) {
            if (!d) {
                bi[r] = identity(m);
                res.min_sigma_per_level[static_cast<std::size_t>(i)] = 1.0;
                continue;
            }
            bi[r] = invert_level(i, identity(m) + gi[r] * d->symbol.eval(omega, grid.point(i, r)));
        }
    }

    std::vector<std::vector<ComplexVector>> u(static_cast<std::size_t>(n_dim) + 1);
    u[static_cast<std::size_t>(n_dim)] = {binv[static_cast<std::size_t>(n_dim)][0] * rhs[static_cast<std::size_t>(n_dim)][0]};
    for (int i = n_dim - 1; i >= 0; --i) {
        const std::size_t s = grid.suffix_size(i);
        auto& ui = u[static_cast<std::size_t>(i)];
        ui.resize(s);
        for (std::size_t r = 0; r < s; ++r) {
            const auto k = grid.point(i, r);
            ComplexVector coupling = ComplexVector::Zero(m);
            for (int j = i + 1; j <= n_dim; ++j) {
                const DefectLayer* d = spec.defect(j);
                if (!d) continue;
                coupling += d->symbol.eval(omega, k) * u[static_cast<std::size_t>(j)][r % grid.suffix_size(j)];
            }
            const ComplexVector lhs =
                i == 0 ? ComplexVector(rhs[0][r] - coupling)
                       : ComplexVector(rhs[static_cast<std::size_t>(i)][r] - gmat[static_cast<std::size_t>(i)][r] * coupling);
            ui[r] = binv[static_cast<std::size_t>(i)][r] * lhs;
        }
    }
    res.f = std::move(u[0]);

    const auto applied = apply_operator(spec, omega, grid, res.f);
    std::vector<ComplexVector> diff(applied.size());
    for (std::size_t i = 0; i < applied.size(); ++i) diff[i] = applied[i] - g[i];
    const double gn = grid_norm(g);
    res.residual = gn > 0 ? grid_norm(diff) / gn : grid_norm(diff);
    return res;
}

inline ResolventResult resolvent_apply(const ProblemSpec& spec, double omega, const TrigVectorPolynomial& g, long n) {
    const FullGrid grid(spec.lattice_dim, n);
    std::vector<ComplexVector> samples(grid.size());
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = g.eval(grid.point(0, i));
    return resolvent_apply(spec, omega, samples, n);
}

}  // namespace defect_bands
