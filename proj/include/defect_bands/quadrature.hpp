#pragma once

#include "defect_bands/linalg.hpp"
#include "defect_bands/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace defect_bands {

/// Matrix-valued function of the full wavevector k in [-pi, pi]^N.
using MatrixFunction = std::function<ComplexMatrix(std::span<const double>)>;
/// Nonnegative scalar monitor (typically sigma_min of a denominator).
using ScalarFunction = std::function<double(std::span<const double>)>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Uniform periodic node k_l = -pi + 2 pi l / n, l = 0..n-1.
inline double periodic_node(long l, long n) { return -kPi + kTwoPi * static_cast<double>(l) / static_cast<double>(n); }

inline bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

/// Thrown when grid doubling hits n_max before the bracket settles, which
/// signals an integrand pole on or near the real torus.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double min_sigma, long points, double last_change)
        : std::runtime_error(what), min_sigma_(min_sigma), points_(points), last_change_(last_change) {}

    double min_sigma() const noexcept { return min_sigma_; }
    long points_per_axis() const noexcept { return points_; }
    double last_change() const noexcept { return last_change_; }

private:
    double min_sigma_;
    long points_;
    double last_change_;
};

/// Tensor grid of periodic nodes over a subset of torus axes (0-based axis
/// indices). Flat node index is lexicographic with the first listed axis
/// varying slowest.
class KGrid {
public:
    KGrid(std::vector<int> axes, long points_per_axis) : axes_(std::move(axes)), n_(points_per_axis) {
        if (axes_.empty()) throw InputError("KGrid: at least one axis required");
        if (n_ < 4 || !is_power_of_two(n_)) {
            throw InputError("KGrid: points per axis must be a power of two >= 4, got " + std::to_string(n_));
        }
        for (std::size_t i = 0; i < axes_.size(); ++i) {
            if (axes_[i] < 0) throw InputError("KGrid: negative axis index");
            for (std::size_t j = 0; j < i; ++j) {
                if (axes_[i] == axes_[j]) throw InputError("KGrid: repeated axis");
            }
        }
    }

    const std::vector<int>& axes() const noexcept { return axes_; }
    long points_per_axis() const noexcept { return n_; }
    std::size_t size() const noexcept {
        std::size_t s = 1;
        for (std::size_t i = 0; i < axes_.size(); ++i) s *= static_cast<std::size_t>(n_);
        return s;
    }

    /// (2 pi)^{-j/2} (2 pi / n)^j.
    double weight() const noexcept {
        const double j = static_cast<double>(axes_.size());
        return std::pow(kTwoPi, -0.5 * j) * std::pow(kTwoPi / static_cast<double>(n_), j);
    }

    /// Writes the integrated components of node `flat` into k.
    void place(std::size_t flat, std::span<double> k) const {
        for (std::size_t a = axes_.size(); a-- > 0;) {
            const long l = static_cast<long>(flat % static_cast<std::size_t>(n_));
            flat /= static_cast<std::size_t>(n_);
            k[static_cast<std::size_t>(axes_[a])] = periodic_node(l, n_);
        }
    }

private:
    std::vector<int> axes_;
    long n_;
};

namespace detail {

inline void check_axes_fit(const std::vector<int>& axes, std::size_t torus_dim) {
    for (int a : axes) {
        if (a < 0 || static_cast<std::size_t>(a) >= torus_dim) {
            throw InputError("bracket: axis " + std::to_string(a) + " outside torus of dimension " +
                             std::to_string(torus_dim));
        }
    }
}

inline bool all_finite(const ComplexMatrix& m) { return m.allFinite(); }

/// Running trapezoid sums for one base point, refined by grid doubling with
/// node reuse.
class TrapezoidAccumulator {
public:
    TrapezoidAccumulator(const MatrixFunction& f, std::vector<int> axes, std::vector<double> base_k)
        : f_(f), axes_(std::move(axes)), base_(std::move(base_k)) {
        check_axes_fit(axes_, base_.size());
    }

    long points() const noexcept { return n_; }
    const ComplexMatrix& value() const noexcept { return value_; }
    double scale() const noexcept { return scale_; }

    /// Moves to resolution n (n_start on first call, else 2x current).
    /// Returns false if a non-finite integrand value was hit.
    bool advance(long n) {
        const bool first = (n_ == 0);
        const std::size_t j = axes_.size();
        std::size_t count = 1;
        for (std::size_t a = 0; a < j; ++a) count *= static_cast<std::size_t>(n);
        std::vector<double> k = base_;
        std::vector<ComplexMatrix> fresh;
        double abs_fresh = 0.0;
        std::vector<long> idx(j);
        for (std::size_t flat = 0; flat < count; ++flat) {
            std::size_t rem = flat;
            bool any_odd = false;
            for (std::size_t a = j; a-- > 0;) {
                idx[a] = static_cast<long>(rem % static_cast<std::size_t>(n));
                rem /= static_cast<std::size_t>(n);
                any_odd = any_odd || (idx[a] % 2 != 0);
            }
            if (!first && !any_odd) continue;
            for (std::size_t a = 0; a < j; ++a) k[static_cast<std::size_t>(axes_[a])] = periodic_node(idx[a], n);
            ComplexMatrix v = f_(k);
            if (!all_finite(v)) return false;
            abs_fresh += v.norm();
            fresh.push_back(std::move(v));
        }
        if (fresh.empty()) return true;
        ComplexMatrix s = pairwise_sum<ComplexMatrix>(fresh, ComplexMatrix::Zero(fresh[0].rows(), fresh[0].cols()));
        if (first) {
            raw_ = std::move(s);
            abs_raw_ = abs_fresh;
        } else {
            raw_ += s;
            abs_raw_ += abs_fresh;
        }
        n_ = n;
        const double j_d = static_cast<double>(j);
        const double w = std::pow(kTwoPi, -0.5 * j_d) * std::pow(kTwoPi / static_cast<double>(n), j_d);
        value_ = w * raw_;
        scale_ = w * abs_raw_;
        return true;
    }

private:
    const MatrixFunction& f_;
    std::vector<int> axes_;
    std::vector<double> base_;
    long n_ = 0;
    ComplexMatrix raw_;
    double abs_raw_ = 0.0;
    ComplexMatrix value_;
    double scale_ = 0.0;
};

inline double min_monitor(const ScalarFunction& monitor, const std::vector<int>& axes, std::span<const double> base_k,
                          long n) {
    if (!monitor) return std::numeric_limits<double>::quiet_NaN();
    KGrid g(axes, n);
    std::vector<double> k(base_k.begin(), base_k.end());
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.place(i, k);
        m = std::min(m, monitor(k));
    }
    return m;
}

}  // namespace detail

/// (2 pi)^{-j/2} times the periodic trapezoid approximation of the integral
/// of F over the grid axes, other components taken from base_k.
inline ComplexMatrix bracket(const MatrixFunction& f, const KGrid& grid, std::span<const double> base_k,
                             int threads = 1) {
    detail::check_axes_fit(grid.axes(), base_k.size());
    const std::vector<double> base(base_k.begin(), base_k.end());
    auto values = parallel_map<ComplexMatrix>(grid.size(), threads, [&](std::size_t i) {
        std::vector<double> k = base;
        grid.place(i, k);
        return f(k);
    });
    const ComplexMatrix zero = ComplexMatrix::Zero(values[0].rows(), values[0].cols());
    return grid.weight() * pairwise_sum<ComplexMatrix>(values, zero);
}

struct AdaptiveOptions {
    double tol_rel = 1e-12;
    long n_start = 16;
    long n_max = 1L << 16;
    /// Optional singularity monitor reported on NonConvergence.
    ScalarFunction monitor;
};

struct AdaptiveValue {
    ComplexMatrix value;
    double error = 0.0;
    long points_per_axis = 0;
};

/// Doubles the grid from n_start until the Frobenius change between two
/// successive refinements is below tol_rel relative to the bracket of |F|.
inline AdaptiveValue adaptive_bracket_at(const MatrixFunction& f, const std::vector<int>& axes,
                                         std::span<const double> base_k, const AdaptiveOptions& opt) {
    if (opt.n_start < 4 || !is_power_of_two(opt.n_start)) {
        throw InputError("adaptive_bracket: n_start must be a power of two >= 4");
    }
    detail::TrapezoidAccumulator acc(f, axes, std::vector<double>(base_k.begin(), base_k.end()));
    auto fail = [&](long n, double change) -> NonConvergence {
        return NonConvergence("adaptive_bracket: no convergence up to " + std::to_string(n) + " points per axis",
                              detail::min_monitor(opt.monitor, axes, base_k, std::max(acc.points(), opt.n_start)), n,
                              change);
    };
    if (!acc.advance(opt.n_start)) throw fail(opt.n_start, INFINITY);
    double change = INFINITY;
    for (long n = 2 * opt.n_start; n <= opt.n_max; n *= 2) {
        ComplexMatrix prev = acc.value();
        if (!acc.advance(n)) throw fail(n, INFINITY);
        change = (acc.value() - prev).norm();
        if (change <= opt.tol_rel * acc.scale()) {
            return {acc.value(), change, n};
        }
    }
    throw fail(acc.points(), change);
}

/// Result of a bracket: a function of the remaining torus axes.
class AveragedFunction {
public:
    AveragedFunction() = default;
    AveragedFunction(std::shared_ptr<const MatrixFunction> f, KGrid grid, int torus_dim, std::string provenance)
        : f_(std::move(f)), grid_(std::move(grid)), torus_dim_(torus_dim), provenance_(std::move(provenance)) {}

    /// Evaluates at k (length torus_dim); integrated components of k are ignored.
    ComplexMatrix operator()(std::span<const double> k) const {
        if (k.size() != static_cast<std::size_t>(torus_dim_)) {
            throw InputError("AveragedFunction: wavevector has wrong length");
        }
        return bracket(*f_, *grid_, k);
    }

    std::vector<int> remaining_axes() const {
        std::vector<int> out;
        for (int a = 0; a < torus_dim_; ++a) {
            bool integrated = false;
            for (int b : grid_->axes()) integrated = integrated || (a == b);
            if (!integrated) out.push_back(a);
        }
        return out;
    }

    const KGrid& grid() const { return *grid_; }
    const std::string& provenance() const noexcept { return provenance_; }

private:
    std::shared_ptr<const MatrixFunction> f_;
    std::optional<KGrid> grid_;
    int torus_dim_ = 0;
    std::string provenance_;
};

inline AveragedFunction bracket(MatrixFunction f, const KGrid& grid, int torus_dim, std::string provenance = "") {
    detail::check_axes_fit(grid.axes(), static_cast<std::size_t>(torus_dim));
    return AveragedFunction(std::make_shared<const MatrixFunction>(std::move(f)), grid, torus_dim,
                            std::move(provenance));
}

struct AdaptiveAveraged {
    AveragedFunction function;
    double error = 0.0;
};

/// Adaptive bracket over `axes` whose resolution is chosen once for the
/// whole remaining torus: convergence is required at every probe point
/// (remaining-axes grid of n_start nodes plus midpoints).
inline AdaptiveAveraged adaptive_bracket(MatrixFunction f, const std::vector<int>& axes, int torus_dim,
                                         const AdaptiveOptions& opt, std::string provenance = "") {
    detail::check_axes_fit(axes, static_cast<std::size_t>(torus_dim));
    std::vector<int> rest;
    for (int a = 0; a < torus_dim; ++a) {
        if (std::find(axes.begin(), axes.end(), a) == axes.end()) rest.push_back(a);
    }
    std::vector<std::vector<double>> probes;
    {
        const long per_axis = 2 * opt.n_start;
        std::size_t count = 1;
        for (std::size_t i = 0; i < rest.size(); ++i) count *= static_cast<std::size_t>(per_axis);
        for (std::size_t flat = 0; flat < count; ++flat) {
            std::vector<double> k(static_cast<std::size_t>(torus_dim), 0.0);
            std::size_t rem = flat;
            for (std::size_t a = rest.size(); a-- > 0;) {
                k[static_cast<std::size_t>(rest[a])] =
                    periodic_node(static_cast<long>(rem % static_cast<std::size_t>(per_axis)), per_axis);
                rem /= static_cast<std::size_t>(per_axis);
            }
            probes.push_back(std::move(k));
        }
    }
    std::vector<detail::TrapezoidAccumulator> accs;
    accs.reserve(probes.size());
    for (const auto& p : probes) accs.emplace_back(f, axes, p);
    auto fail = [&](long n, double change) -> NonConvergence {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : probes) m = std::min(m, detail::min_monitor(opt.monitor, axes, p, n));
        return NonConvergence("adaptive_bracket: no convergence up to " + std::to_string(n) + " points per axis", m, n,
                              change);
    };
    for (auto& a : accs) {
        if (!a.advance(opt.n_start)) throw fail(opt.n_start, INFINITY);
    }
    double worst = INFINITY;
    for (long n = 2 * opt.n_start; n <= opt.n_max; n *= 2) {
        bool converged = true;
        worst = 0.0;
        for (auto& a : accs) {
            ComplexMatrix prev = a.value();
            if (!a.advance(n)) throw fail(n, INFINITY);
            const double change = (a.value() - prev).norm();
            worst = std::max(worst, change);
            converged = converged && change <= opt.tol_rel * a.scale();
        }
        if (converged) {
            return {bracket(std::move(f), KGrid(axes, n), torus_dim, std::move(provenance)), worst};
        }
    }
    throw fail(opt.n_max, worst);
}

}  // namespace defect_bands
