#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace defect_bands {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Raised for malformed inputs: dimension mismatches, non-square or
/// non-Hermitian matrices where Hermitian input is required.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a matrix cannot be inverted to working precision.
class SingularMatrix : public std::runtime_error {
public:
    SingularMatrix(const std::string& what, double min_sigma)
        : std::runtime_error(what), min_sigma_(min_sigma) {}

    double min_sigma() const noexcept { return min_sigma_; }

private:
    double min_sigma_;
};

inline void require_square(const ComplexMatrix& a, const char* who) {
    if (a.rows() != a.cols() || a.rows() < 1) {
        throw InputError(std::string(who) + ": matrix must be square with dim >= 1, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

inline ComplexMatrix identity(Eigen::Index m) { return ComplexMatrix::Identity(m, m); }

inline double hermitian_deviation(const ComplexMatrix& a) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// max |a(i,j) - conj(a(j,i))| <= rel_tol * max(||a||_F, scale_floor).
inline bool is_hermitian(const ComplexMatrix& a, double rel_tol = 1e-12,
                         double scale_floor = std::numeric_limits<double>::min()) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(a.norm(), scale_floor);
    return hermitian_deviation(a) <= rel_tol * scale;
}

/// Determinant by partially pivoted LU; the entry itself for M = 1.
inline Complex det(const ComplexMatrix& a) {
    require_square(a, "det");
    if (a.rows() == 1) return a(0, 0);
    return a.partialPivLu().determinant();
}

inline double smallest_singular_value(const ComplexMatrix& a) {
    require_square(a, "smallest_singular_value");
    if (a.rows() == 1) return std::abs(a(0, 0));
    Eigen::JacobiSVD<ComplexMatrix> svd(a);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Inverse of a square matrix. Throws SingularMatrix (carrying sigma_min)
/// when the reciprocal condition estimate falls below rcond_floor.
inline ComplexMatrix inverse(const ComplexMatrix& a, double rcond_floor = 1e3 * std::numeric_limits<double>::epsilon()) {
    require_square(a, "inverse");
    if (a.rows() == 1) {
        const Complex v = a(0, 0);
        if (!(std::abs(v) > 0.0) || !std::isfinite(std::abs(v))) {
            throw SingularMatrix("inverse: singular 1x1 matrix", std::abs(v));
        }
        ComplexMatrix r(1, 1);
        r(0, 0) = 1.0 / v;
        return r;
    }
    Eigen::PartialPivLU<ComplexMatrix> lu(a);
    const double rc = lu.rcond();
    if (!(rc > rcond_floor)) {
        throw SingularMatrix("inverse: matrix singular to working precision (rcond " + std::to_string(rc) + ")",
                             smallest_singular_value(a));
    }
    return lu.inverse();
}

/// Ascending eigenvalues of a Hermitian matrix.
inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& a, double rel_tol = 1e-10) {
    require_square(a, "hermitian_eigenvalues");
    // Unit floor: near-singular shifted symbols carry rounding-level
    // anti-Hermitian parts that are large relative to their own norm.
    if (!is_hermitian(a, rel_tol, 1.0)) {
        throw InputError("hermitian_eigenvalues: input is not Hermitian (deviation " +
                         std::to_string(hermitian_deviation(a)) + ")");
    }
    if (a.rows() == 1) return {a(0, 0).real()};
    const ComplexMatrix sym = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(sym, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    std::vector<double> out(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace defect_bands
