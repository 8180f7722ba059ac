#pragma once

#include "defect_bands/linalg.hpp"
#include "defect_bands/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace defect_bands {

namespace detail {

/// Finite eigenvalues of the pencil P0 + w P1 via a shifted inversion:
/// with K = P0 + s P1, (K + (w - s) P1) x = 0 gives mu = -1/(w - s) as an
/// eigenvalue of K^-1 P1. Infinite eigenvalues map to mu = 0.
inline std::vector<Complex> pencil_eigenvalues(const ComplexMatrix& p0, const ComplexMatrix& p1) {
    static constexpr double kShifts[] = {0.6180339887498949, -1.3247179572447460, 2.2360679774997896,
                                         -0.41421356237309503};
    for (double s : kShifts) {
        const ComplexMatrix k = p0 + s * p1;
        Eigen::PartialPivLU<ComplexMatrix> lu(k);
        if (!(lu.rcond() > 1e-10)) continue;
        const ComplexMatrix t = lu.solve(p1);
        Eigen::ComplexEigenSolver<ComplexMatrix> es(t, false);
        const double scale = std::max(1.0, t.norm());
        std::vector<Complex> out;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            const Complex mu = es.eigenvalues()(i);
            if (std::abs(mu) > 1e-12 * scale) out.push_back(s - 1.0 / mu);
        }
        return out;
    }
    throw SingularMatrix("bands: omega pencil singular for every trial shift", 0.0);
}

}  // namespace detail

/// Real roots omega of det(sum_p omega^p term_p(k)) = 0, ascending.
/// Standard shift (term_1 = -I, no quadratic term): eigenvalues of term_0(k).
/// Otherwise: companion linearization of size pM and a generalized
/// eigenvalue solve, keeping roots with negligible imaginary part.
inline std::vector<double> bands(const ProblemSpec& spec, std::span<const double> k) {
    const OmegaSymbol& s = spec.bulk;
    if (!s.is_hermitian_family()) throw InputError("bands: only Hermitian symbol families are supported");
    if (s.max_power() < 1) throw InputError("bands: bulk symbol does not depend on omega");
    if (s.max_power() > OmegaSymbol::kMaxNativePower) throw InputError("bands: omega power above 2");
    const Eigen::Index m = s.dim();
    auto term = [&](int p) { return s.has_term(p) ? s.term(p).eval(k) : ComplexMatrix(ComplexMatrix::Zero(m, m)); };
    if (s.is_standard_shift()) return hermitian_eigenvalues(term(0), 1e-10);

    std::vector<Complex> roots;
    if (s.max_power() == 1) {
        roots = detail::pencil_eigenvalues(term(0), term(1));
    } else {
        // x2 = w x1;  T0 x1 + T1 x2 + w T2 x2 = 0
        ComplexMatrix p0 = ComplexMatrix::Zero(2 * m, 2 * m);
        ComplexMatrix p1 = ComplexMatrix::Zero(2 * m, 2 * m);
        p0.block(0, m, m, m) = identity(m);
        p0.block(m, 0, m, m) = term(0);
        p0.block(m, m, m, m) = term(1);
        p1.block(0, 0, m, m) = -identity(m);
        p1.block(m, m, m, m) = term(2);
        roots = detail::pencil_eigenvalues(p0, p1);
    }
    std::vector<double> out;
    for (const Complex& w : roots) {
        if (std::abs(w.imag()) <= 1e-8 * std::max(1.0, std::abs(w))) out.push_back(w.real());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace defect_bands
