#pragma once

#include "defect_bands/linalg.hpp"

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace defect_bands {

/// Integer lattice offset n in Z^d. std::vector ordering is lexicographic,
/// which fixes the summation order of every Fourier series below.
using Offset = std::vector<int>;

inline std::string to_string(const Offset& n) {
    std::string s = "(";
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(n[i]);
    }
    return s + ")";
}

inline Offset negate(Offset n) {
    for (auto& v : n) v = -v;
    return n;
}

/// Finite Fourier series k -> sum_n e^{i n.k} A^(n) of M x M matrices on the
/// d-torus.
class TrigMatrixPolynomial {
public:
    TrigMatrixPolynomial() = default;
    TrigMatrixPolynomial(int torus_dim, Eigen::Index dim) : torus_dim_(torus_dim), dim_(dim) {
        if (torus_dim < 0) throw InputError("TrigMatrixPolynomial: negative torus dimension");
        if (dim < 1) throw InputError("TrigMatrixPolynomial: matrix dimension must be >= 1");
    }

    static TrigMatrixPolynomial constant(int torus_dim, const ComplexMatrix& c) {
        TrigMatrixPolynomial p(torus_dim, c.rows());
        p.set(Offset(static_cast<std::size_t>(torus_dim), 0), c);
        return p;
    }

    int torus_dim() const noexcept { return torus_dim_; }
    Eigen::Index dim() const noexcept { return dim_; }
    const std::map<Offset, ComplexMatrix>& coefficients() const noexcept { return coeffs_; }
    bool empty() const noexcept { return coeffs_.empty(); }

    /// Replaces the coefficient at n.
    void set(const Offset& n, const ComplexMatrix& a) {
        check_offset(n);
        require_square(a, "TrigMatrixPolynomial::set");
        if (a.rows() != dim_) {
            throw InputError("TrigMatrixPolynomial: coefficient at " + to_string(n) + " has dim " +
                             std::to_string(a.rows()) + ", expected " + std::to_string(dim_));
        }
        coeffs_[n] = a;
    }

    /// Accumulates into the coefficient at n.
    void add(const Offset& n, const ComplexMatrix& a) {
        auto it = coeffs_.find(n);
        if (it == coeffs_.end()) {
            set(n, a);
        } else {
            require_square(a, "TrigMatrixPolynomial::add");
            if (a.rows() != dim_) throw InputError("TrigMatrixPolynomial::add: dim mismatch");
            it->second += a;
        }
    }

    ComplexMatrix coefficient(const Offset& n) const {
        auto it = coeffs_.find(n);
        return it == coeffs_.end() ? ComplexMatrix::Zero(dim_, dim_) : it->second;
    }

    /// Drops exactly-zero coefficients; evaluation is unchanged.
    TrigMatrixPolynomial pruned() const {
        TrigMatrixPolynomial out(torus_dim_, dim_);
        for (const auto& [n, a] : coeffs_) {
            if (!a.isZero(0.0)) out.coeffs_.emplace(n, a);
        }
        return out;
    }

    ComplexMatrix eval(std::span<const double> k) const {
        if (k.size() != static_cast<std::size_t>(torus_dim_)) {
            throw InputError("eval_k: wavevector has " + std::to_string(k.size()) + " components, symbol expects " +
                             std::to_string(torus_dim_));
        }
        ComplexMatrix out = ComplexMatrix::Zero(dim_, dim_);
        for (const auto& [n, a] : coeffs_) {
            double phase = 0.0;
            for (std::size_t i = 0; i < n.size(); ++i) phase += n[i] * k[i];
            out.noalias() += std::polar(1.0, phase) * a;
        }
        return out;
    }

    /// Coefficient at -n equals the conjugate transpose of the one at n.
    bool is_hermitian_symmetric(double rel_tol = 1e-12) const {
        double scale = 0.0;
        for (const auto& [n, a] : coeffs_) scale = std::max(scale, a.norm());
        scale = std::max(scale, std::numeric_limits<double>::min());
        for (const auto& [n, a] : coeffs_) {
            const ComplexMatrix mirror = coefficient(negate(n));
            if ((mirror - a.adjoint()).cwiseAbs().maxCoeff() > rel_tol * scale) return false;
        }
        return true;
    }

    TrigMatrixPolynomial& operator+=(const TrigMatrixPolynomial& other) {
        if (other.torus_dim_ != torus_dim_ || other.dim_ != dim_) {
            throw InputError("TrigMatrixPolynomial: cannot add polynomials of different shape");
        }
        for (const auto& [n, a] : other.coeffs_) add(n, a);
        return *this;
    }

    friend TrigMatrixPolynomial operator+(TrigMatrixPolynomial a, const TrigMatrixPolynomial& b) {
        a += b;
        return a;
    }

    TrigMatrixPolynomial scaled(Complex s) const {
        TrigMatrixPolynomial out(torus_dim_, dim_);
        for (const auto& [n, a] : coeffs_) out.coeffs_.emplace(n, s * a);
        return out;
    }

private:
    void check_offset(const Offset& n) const {
        if (n.size() != static_cast<std::size_t>(torus_dim_)) {
            throw InputError("TrigMatrixPolynomial: offset " + to_string(n) + " has wrong length, expected " +
                             std::to_string(torus_dim_));
        }
    }

    int torus_dim_ = 0;
    Eigen::Index dim_ = 1;
    std::map<Offset, ComplexMatrix> coeffs_;
};

inline ComplexMatrix eval_k(const TrigMatrixPolynomial& p, std::span<const double> k) { return p.eval(k); }

/// Polynomial in omega whose coefficients are trigonometric matrix
/// polynomials: S(omega, k) = sum_p omega^p term_p(k).
class OmegaSymbol {
public:
    static constexpr int kMaxNativePower = 2;

    OmegaSymbol() = default;
    OmegaSymbol(int torus_dim, Eigen::Index dim) : torus_dim_(torus_dim), dim_(dim) {}

    int torus_dim() const noexcept { return torus_dim_; }
    Eigen::Index dim() const noexcept { return dim_; }
    const std::map<int, TrigMatrixPolynomial>& terms() const noexcept { return terms_; }

    /// Highest stored power, or -1 for the empty symbol.
    int max_power() const noexcept { return terms_.empty() ? -1 : terms_.rbegin()->first; }

    /// Adds a term. Shape is checked here; the power cap is a validation
    /// concern so that oversized inputs can still be reported.
    void set_term(int power, TrigMatrixPolynomial p) {
        if (power < 0) throw InputError("OmegaSymbol: negative omega power");
        if (p.torus_dim() != torus_dim_ || p.dim() != dim_) {
            throw InputError("OmegaSymbol: term for power " + std::to_string(power) + " has torus_dim " +
                             std::to_string(p.torus_dim()) + " / dim " + std::to_string(p.dim()) +
                             ", expected " + std::to_string(torus_dim_) + " / " + std::to_string(dim_));
        }
        terms_.insert_or_assign(power, std::move(p));
    }

    bool has_term(int power) const { return terms_.count(power) != 0; }

    const TrigMatrixPolynomial& term(int power) const {
        auto it = terms_.find(power);
        if (it == terms_.end()) throw InputError("OmegaSymbol: no term for power " + std::to_string(power));
        return it->second;
    }

    ComplexMatrix eval(Complex omega, std::span<const double> k) const {
        if (k.size() != static_cast<std::size_t>(torus_dim_)) {
            throw InputError("eval_omega_k: wavevector has " + std::to_string(k.size()) +
                             " components, symbol expects " + std::to_string(torus_dim_));
        }
        ComplexMatrix out = ComplexMatrix::Zero(dim_, dim_);
        for (const auto& [p, t] : terms_) {
            Complex w = 1.0;
            for (int i = 0; i < p; ++i) w *= omega;
            out.noalias() += w * t.eval(k);
        }
        return out;
    }

    bool is_hermitian_family(double rel_tol = 1e-12) const {
        for (const auto& [p, t] : terms_) {
            if (!t.is_hermitian_symmetric(rel_tol)) return false;
        }
        return true;
    }

    /// True when every coefficient is independent of omega (max power <= 0).
    bool omega_independent() const noexcept { return max_power() <= 0; }

    /// The term at power 1 is the constant -I (the eigenvalue shift A - omega I).
    bool is_standard_shift() const {
        if (max_power() != 1 || !has_term(1)) return false;
        const auto pruned = term(1).pruned();
        if (pruned.coefficients().size() != 1) return false;
        const auto& [n, a] = *pruned.coefficients().begin();
        for (int v : n) {
            if (v != 0) return false;
        }
        return (a + identity(dim_)).isZero(0.0);
    }

private:
    int torus_dim_ = 0;
    Eigen::Index dim_ = 1;
    std::map<int, TrigMatrixPolynomial> terms_;
};

inline ComplexMatrix eval_omega_k(const OmegaSymbol& s, Complex omega, std::span<const double> k) {
    return s.eval(omega, k);
}

}  // namespace defect_bands
