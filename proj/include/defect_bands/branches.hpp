#pragma once

#include "defect_bands/bands.hpp"
#include "defect_bands/chain.hpp"
#include "defect_bands/interval.hpp"
#include "defect_bands/model.hpp"
#include "defect_bands/parallel.hpp"
#include "defect_bands/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace defect_bands {

/// Periodic grid over the axes a codim-j object still depends on
/// (codim..N-1, 0-based). A single node when codim == N.
class RemainingGrid {
public:
    RemainingGrid(int lattice_dim, int codim, long n) : lattice_dim_(lattice_dim), codim_(codim), n_(n) {
        if (codim < 0 || codim > lattice_dim) throw InputError("RemainingGrid: codim out of range");
        if (n < 1) throw InputError("RemainingGrid: need at least one node per axis");
    }

    int dims() const noexcept { return lattice_dim_ - codim_; }
    long points_per_axis() const noexcept { return n_; }
    int codim() const noexcept { return codim_; }

    std::size_t size() const noexcept {
        std::size_t s = 1;
        for (int a = 0; a < dims(); ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }

    std::vector<long> index(std::size_t flat) const {
        std::vector<long> idx(static_cast<std::size_t>(dims()));
        for (std::size_t a = idx.size(); a-- > 0;) {
            idx[a] = static_cast<long>(flat % static_cast<std::size_t>(n_));
            flat /= static_cast<std::size_t>(n_);
        }
        return idx;
    }

    std::size_t flat(const std::vector<long>& idx) const {
        std::size_t f = 0;
        for (long v : idx) f = f * static_cast<std::size_t>(n_) + static_cast<std::size_t>(((v % n_) + n_) % n_);
        return f;
    }

    /// Full-length wavevector; integrated components are zero.
    std::vector<double> point(std::size_t flat) const {
        std::vector<double> k(static_cast<std::size_t>(lattice_dim_), 0.0);
        const auto idx = index(flat);
        for (std::size_t a = 0; a < idx.size(); ++a) k[static_cast<std::size_t>(codim_) + a] = periodic_node(idx[a], n_);
        return k;
    }

    /// Neighbour one step forward along remaining axis `axis` (periodic).
    std::size_t neighbor(std::size_t flat_index, int axis) const {
        auto idx = index(flat_index);
        idx[static_cast<std::size_t>(axis)] = (idx[static_cast<std::size_t>(axis)] + 1) % n_;
        return this->flat(idx);
    }

private:
    int lattice_dim_;
    int codim_;
    long n_;
};

namespace detail {

/// Local zoom search for the extremum of fn over `axes` around `center`.
inline double zoom_extremum(const std::function<std::optional<double>(std::span<const double>)>& fn,
                            const std::vector<int>& axes, std::vector<double> center, double h, bool maximize,
                            double start) {
    constexpr int kLocal = 7;
    constexpr int kRounds = 20;
    double best = start;
    for (int round = 0; round < kRounds; ++round) {
        std::vector<std::vector<double>> coords(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const double c = center[static_cast<std::size_t>(axes[a])];
            for (int t = 0; t < kLocal; ++t) coords[a].push_back(c - h + 2.0 * h * t / (kLocal - 1));
        }
        const auto pts = tensor_points(axes, center, coords);
        for (const auto& p : pts) {
            const auto v = fn(p);
            if (!v) continue;
            if (maximize ? *v > best : *v < best) {
                best = *v;
                center = p;
            }
        }
        h /= 3.0;
    }
    return best;
}

}  // namespace detail

/// Image of each sorted band over the integrated axes 0..codim-1, other
/// components taken from base. Index i of the result is band i.
inline std::vector<Interval> band_ranges(const ProblemSpec& spec, int codim, std::span<const double> base, long n,
                                         int threads = 1) {
    const std::vector<double> base_k(base.begin(), base.end());
    if (codim == 0) {
        std::vector<Interval> out;
        for (double w : bands(spec, base_k)) out.push_back({w, w});
        return out;
    }
    std::vector<int> axes(static_cast<std::size_t>(codim));
    std::iota(axes.begin(), axes.end(), 0);
    std::vector<double> nodes(static_cast<std::size_t>(n));
    for (long l = 0; l < n; ++l) nodes[static_cast<std::size_t>(l)] = periodic_node(l, n);
    const auto pts = detail::tensor_points(axes, base_k, std::vector<std::vector<double>>(axes.size(), nodes));
    const auto vals = parallel_map<std::vector<double>>(pts.size(), threads, [&](std::size_t i) { return bands(spec, pts[i]); });

    std::size_t count = 0;
    for (const auto& v : vals) count = std::max(count, v.size());
    std::vector<Interval> out;
    for (std::size_t b = 0; b < count; ++b) {
        std::optional<std::size_t> lo_at, hi_at;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (vals[i].size() <= b) continue;
            if (!lo_at || vals[i][b] < vals[*lo_at][b]) lo_at = i;
            if (!hi_at || vals[i][b] > vals[*hi_at][b]) hi_at = i;
        }
        if (!lo_at) continue;
        auto band_b = [&](std::span<const double> k) -> std::optional<double> {
            const auto w = bands(spec, k);
            if (w.size() <= b) return std::nullopt;
            return w[b];
        };
        const double h = kTwoPi / static_cast<double>(n);
        const double lo = detail::zoom_extremum(band_b, axes, pts[*lo_at], h, false, vals[*lo_at][b]);
        const double hi = detail::zoom_extremum(band_b, axes, pts[*hi_at], h, true, vals[*hi_at][b]);
        out.push_back({lo, hi});
    }
    return out;
}

struct BranchSample {
    std::size_t node = 0;       ///< flat index in the branch's RemainingGrid
    std::vector<double> k;      ///< full-length wavevector (integrated components zero)
    double omega = 0.0;
    bool near_band = false;     ///< bracket touched the band_guard boundary
};

/// Roots of det B_codim(omega, k) = 0 over the remaining-axes grid.
struct Branch {
    int codim = 0;
    RemainingGrid grid{1, 1, 1};
    std::vector<BranchSample> samples;
    std::vector<Interval> inconclusive;
};

/// Projection of all higher-dimensional spectrum onto each (omega, k_j)
/// slice: one merged interval list per remaining-grid node.
struct ExclusionSet {
    int codim = 0;
    RemainingGrid grid{1, 1, 1};
    std::vector<std::vector<Interval>> intervals;
};

namespace detail {

struct Union {
    std::vector<std::size_t> parent;
    explicit Union(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void join(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

/// Groups branch samples into connected pieces. Each node's window minus
/// its own (dilated) exclusion set splits into ordered gaps; when two grid
/// neighbours (along `axes`, given as remaining-axis positions) have the same
/// number of gaps, the r-th gaps correspond, and roots in corresponding gaps
/// with equal counts are joined by rank. `keep` filters participating samples.
inline std::vector<std::vector<std::size_t>> components(const Branch& br, const ExclusionSet& ex, const Interval& window,
                                                        double guard, const std::vector<int>& axes,
                                                        const std::function<bool(const BranchSample&)>& keep) {
    std::vector<std::vector<std::size_t>> by_node(br.grid.size());
    for (std::size_t i = 0; i < br.samples.size(); ++i) {
        if (keep(br.samples[i])) by_node[br.samples[i].node].push_back(i);
    }
    auto by_omega = [&](std::size_t a, std::size_t b) { return br.samples[a].omega < br.samples[b].omega; };
    // Per node: roots grouped by the gap they fall in, ascending.
    std::vector<std::vector<std::vector<std::size_t>>> gaps(by_node.size());
    for (std::size_t node = 0; node < by_node.size(); ++node) {
        if (by_node[node].empty()) continue;
        std::vector<Interval> blocked;
        for (const auto& iv : ex.intervals[node]) blocked.push_back(iv.dilated(guard));
        const auto free = complement_within(window, blocked);
        auto& g = gaps[node];
        g.resize(free.size());
        for (auto i : by_node[node]) {
            for (std::size_t r = 0; r < free.size(); ++r) {
                if (free[r].contains(br.samples[i].omega)) {
                    g[r].push_back(i);
                    break;
                }
            }
        }
        for (auto& v : g) std::sort(v.begin(), v.end(), by_omega);
    }
    Union u(br.samples.size());
    for (std::size_t node = 0; node < by_node.size(); ++node) {
        if (by_node[node].empty()) continue;
        for (int axis : axes) {
            const std::size_t nb = br.grid.neighbor(node, axis);
            if (nb == node || by_node[nb].empty()) continue;
            if (gaps[node].size() != gaps[nb].size()) continue;
            for (std::size_t r = 0; r < gaps[node].size(); ++r) {
                const auto& here = gaps[node][r];
                const auto& there = gaps[nb][r];
                if (here.size() != there.size()) continue;
                for (std::size_t q = 0; q < here.size(); ++q) u.join(here[q], there[q]);
            }
        }
    }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<long> slot(br.samples.size(), -1);
    for (std::size_t i = 0; i < br.samples.size(); ++i) {
        if (!keep(br.samples[i])) continue;
        const std::size_t r = u.find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[r])].push_back(i);
    }
    return groups;
}

inline bool real_valued(const Complex& f) { return std::abs(f.imag()) <= 1e-6 * std::abs(f) + 1e-14; }

}  // namespace detail

/// det B_codim(omega, k), or nothing when the cascade cannot be evaluated
/// (lower level singular or quadrature not converging).
inline std::optional<Complex> level_det(const ProblemSpec& spec, int codim, double omega, std::span<const double> k) {
    try {
        ChainEvaluator ev(spec, omega);
        return det(ev.b(codim, k));
    } catch (const NonConvergence&) {
        return std::nullopt;
    } catch (const SingularMatrix&) {
        return std::nullopt;
    }
}

struct RootScan {
    std::vector<double> roots;
    std::vector<bool> near_band;
    std::vector<Interval> inconclusive;
};

/// Scans omega over window minus (excluded dilated by band_guard) and
/// refines every root of det B_codim(., k) to root_tol_omega.
inline RootScan scan_roots(const ProblemSpec& spec, int codim, std::span<const double> k,
                           const std::vector<Interval>& excluded, const Interval& window, long omega_points) {
    const auto& tol = spec.tolerances;
    std::vector<Interval> blocked;
    for (const auto& iv : excluded) blocked.push_back(iv.dilated(tol.band_guard));
    const auto segments = complement_within(window, blocked);
    const std::vector<double> kk(k.begin(), k.end());
    auto f = [&](double w) { return level_det(spec, codim, w, kk); };

    RootScan out;
    auto add_root = [&](double w, bool near) {
        for (std::size_t i = 0; i < out.roots.size(); ++i) {
            if (std::abs(out.roots[i] - w) <= 10.0 * tol.root_tol_omega) {
                out.near_band[i] = out.near_band[i] || near;
                return;
            }
        }
        out.roots.push_back(w);
        out.near_band.push_back(near);
    };
    const double step = window.length() / static_cast<double>(std::max<long>(omega_points - 1, 1));

    for (const auto& seg : segments) {
        std::vector<double> ws{seg.lo};
        for (long i = 0; i < omega_points; ++i) {
            const double w = window.lo + step * static_cast<double>(i);
            if (w > seg.lo && w < seg.hi) ws.push_back(w);
        }
        if (seg.hi > seg.lo) ws.push_back(seg.hi);
        const bool lo_guarded = seg.lo > window.lo;
        const bool hi_guarded = seg.hi < window.hi;

        std::vector<std::optional<Complex>> fs;
        fs.reserve(ws.size());
        for (double w : ws) fs.push_back(f(w));
        for (std::size_t i = 0; i < ws.size(); ++i) {
            if (!fs[i]) {
                out.inconclusive.push_back({ws[i > 0 ? i - 1 : i], ws[i + 1 < ws.size() ? i + 1 : i]});
            }
        }
        for (std::size_t i = 0; i + 1 < ws.size(); ++i) {
            if (!fs[i] || !fs[i + 1]) continue;
            const Complex a = *fs[i];
            const Complex b = *fs[i + 1];
            if (!detail::real_valued(a) || !detail::real_valued(b)) continue;
            if (a.real() * b.real() > 0.0) continue;
            double lo = ws[i], hi = ws[i + 1];
            double flo = a.real();
            while (hi - lo > tol.root_tol_omega) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const auto fm = f(mid);
                if (!fm) break;
                if ((fm->real() <= 0.0) == (flo <= 0.0)) {
                    lo = mid;
                    flo = fm->real();
                } else {
                    hi = mid;
                }
            }
            const bool near = (i == 0 && lo_guarded) || (i + 2 == ws.size() && hi_guarded);
            add_root(0.5 * (lo + hi), near);
        }
        // Tangential zeros: local minima of |det| without a sign change.
        for (std::size_t i = 1; i + 1 < ws.size(); ++i) {
            if (!fs[i - 1] || !fs[i] || !fs[i + 1]) continue;
            const double m = std::abs(*fs[i]);
            if (!(m < std::abs(*fs[i - 1]) && m < std::abs(*fs[i + 1]))) continue;
            double lo = ws[i - 1], hi = ws[i + 1];
            const double g = 0.5 * (std::sqrt(5.0) - 1.0);
            double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
            auto absf = [&](double w) {
                const auto v = f(w);
                return v ? std::abs(*v) : INFINITY;
            };
            double f1 = absf(x1), f2 = absf(x2);
            while (hi - lo > tol.root_tol_omega) {
                if (f1 < f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - g * (hi - lo);
                    f1 = absf(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (hi - lo);
                    f2 = absf(x2);
                }
            }
            const double wmin = 0.5 * (lo + hi);
            if (absf(wmin) <= tol.det_zero_tol) add_root(wmin, false);
        }
    }
    std::vector<std::size_t> order(out.roots.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.roots[a] < out.roots[b]; });
    RootScan sorted;
    for (auto i : order) {
        sorted.roots.push_back(out.roots[i]);
        sorted.near_band.push_back(out.near_band[i]);
    }
    sorted.inconclusive = merge_intervals(out.inconclusive);
    return sorted;
}

/// I_j on the remaining grid: band images over axes 0..j-1 united with the
/// images of all lower-codim branches over the axes between their codim and j.
inline ExclusionSet exclusion_set(const ProblemSpec& spec, int codim, const std::vector<Branch>& lower_branches,
                                  const SweepGrids& grids) {
    ExclusionSet ex;
    ex.codim = codim;
    ex.grid = RemainingGrid(spec.lattice_dim, codim, grids.k_points);
    ex.intervals = parallel_map<std::vector<Interval>>(ex.grid.size(), grids.threads, [&](std::size_t node) {
        return band_ranges(spec, codim, ex.grid.point(node), grids.k_points);
    });
    const auto idx_cache = [&] {
        std::vector<std::vector<long>> v;
        for (std::size_t node = 0; node < ex.grid.size(); ++node) v.push_back(ex.grid.index(node));
        return v;
    }();
    for (const auto& br : lower_branches) {
        if (br.codim >= codim) continue;
        // The lower branch varies over axes br.codim..N-1; the slice through
        // a node of this set fixes axes codim..N-1.
        const int shift = codim - br.codim;
        std::vector<int> slice_axes(static_cast<std::size_t>(shift));
        std::iota(slice_axes.begin(), slice_axes.end(), 0);
        ExclusionSet lower_ex;  // connectivity of lower branches is judged without exclusion gaps
        lower_ex.grid = br.grid;
        lower_ex.intervals.assign(br.grid.size(), {});
        for (std::size_t node = 0; node < ex.grid.size(); ++node) {
            const auto& fixed = idx_cache[node];
            auto keep = [&](const BranchSample& s) {
                const auto idx = br.grid.index(s.node);
                for (std::size_t a = 0; a < fixed.size(); ++a) {
                    if (idx[static_cast<std::size_t>(shift) + a] != fixed[a]) return false;
                }
                return true;
            };
            for (const auto& comp : detail::components(br, lower_ex, spec.omega_window, 0.0, slice_axes, keep)) {
                double lo = INFINITY, hi = -INFINITY;
                for (auto i : comp) {
                    lo = std::min(lo, br.samples[i].omega);
                    hi = std::max(hi, br.samples[i].omega);
                }
                ex.intervals[node].push_back({lo, hi});
            }
        }
    }
    for (auto& v : ex.intervals) v = merge_intervals(std::move(v));
    return ex;
}

/// Samples the codim-j dispersion relation det B_j(omega, k_j) = 0 on the
/// remaining grid, outside the band_guard dilation of I_j.
inline Branch dispersion_branch(const ProblemSpec& spec, int codim, const ExclusionSet& ex, const SweepGrids& grids) {
    Branch br;
    br.codim = codim;
    br.grid = ex.grid;
    const auto scans = parallel_map<RootScan>(ex.grid.size(), grids.threads, [&](std::size_t node) {
        return scan_roots(spec, codim, ex.grid.point(node), ex.intervals[node], spec.omega_window, grids.omega_points);
    });
    for (std::size_t node = 0; node < scans.size(); ++node) {
        for (std::size_t r = 0; r < scans[node].roots.size(); ++r) {
            const double w = scans[node].roots[r];
            if (distance_to(ex.intervals[node], w) < spec.tolerances.band_guard * (1.0 - 1e-12)) {
                throw std::logic_error("dispersion_branch: root inside the guarded exclusion set");
            }
            br.samples.push_back({node, ex.grid.point(node), w, scans[node].near_band[r]});
        }
        br.inconclusive.insert(br.inconclusive.end(), scans[node].inconclusive.begin(), scans[node].inconclusive.end());
    }
    br.inconclusive = merge_intervals(std::move(br.inconclusive));
    return br;
}

enum class PieceKind { BandInterval, BranchInterval, IsolatedPoint };

inline const char* to_string(PieceKind k) {
    switch (k) {
        case PieceKind::BandInterval: return "band_interval";
        case PieceKind::BranchInterval: return "branch_interval";
        case PieceKind::IsolatedPoint: return "isolated_point";
    }
    return "?";
}

struct SpectrumPiece {
    PieceKind kind = PieceKind::BandInterval;
    int codim = 0;
    Interval range;
};

struct SpectralResult {
    Interval omega_window;
    std::vector<Interval> band_images;
    std::vector<ExclusionSet> exclusions;
    std::vector<Branch> branches;
    std::vector<SpectrumPiece> pieces;
    /// Union of all pieces clipped to the window; points are degenerate intervals.
    std::vector<Interval> omega_set;
    std::vector<Interval> inconclusive;

    bool contains(double w, double pad = 0.0) const { return contains_any(omega_set, w, pad); }
    bool in_inconclusive(double w, double pad = 0.0) const { return contains_any(inconclusive, w, pad); }

    const Branch* branch(int codim) const {
        for (const auto& b : branches) {
            if (b.codim == codim) return &b;
        }
        return nullptr;
    }
};

namespace detail {

/// Root of det B_codim(., k) inside `gap`, searched outward from `guess`.
inline std::optional<double> root_near(const ProblemSpec& spec, int codim, std::span<const double> k, double guess,
                                       const Interval& gap) {
    auto f = [&](double w) -> std::optional<double> {
        const auto v = level_det(spec, codim, w, k);
        if (!v || !real_valued(*v)) return std::nullopt;
        return v->real();
    };
    guess = std::clamp(guess, gap.lo, gap.hi);
    const auto f0 = f(guess);
    if (!f0) return std::nullopt;
    if (*f0 == 0.0) return guess;
    for (double d = 1e-9 * std::max(1.0, std::abs(guess)); d < gap.length(); d *= 2.0) {
        for (double sgn : {-1.0, 1.0}) {
            const double w = std::clamp(guess + sgn * d, gap.lo, gap.hi);
            const auto fw = f(w);
            if (!fw || (*fw > 0.0) == (*f0 > 0.0)) continue;
            double lo = std::min(w, guess), hi = std::max(w, guess);
            double flo = lo == guess ? *f0 : *fw;
            while (hi - lo > spec.tolerances.root_tol_omega) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const auto fm = f(mid);
                if (!fm) return std::nullopt;
                if ((*fm > 0.0) == (flo > 0.0)) {
                    lo = mid;
                    flo = *fm;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
    }
    return std::nullopt;
}

/// Extends an extremal sample of a connected branch piece by one parabolic
/// step per remaining axis when the extremum lies between grid nodes.
inline double refine_branch_extremum(const ProblemSpec& spec, const Branch& br, const ExclusionSet& ex,
                                     const std::vector<std::size_t>& comp, std::size_t at, bool maximize) {
    const auto& s = br.samples[at];
    double best = s.omega;
    const double h = kTwoPi / static_cast<double>(br.grid.points_per_axis());
    for (int axis = 0; axis < br.grid.dims(); ++axis) {
        auto idx = br.grid.index(s.node);
        std::optional<double> wm, wp;
        for (long step : {-1L, 1L}) {
            auto nidx = idx;
            nidx[static_cast<std::size_t>(axis)] += step;
            const std::size_t nb = br.grid.flat(nidx);
            for (auto i : comp) {
                if (br.samples[i].node == nb) (step < 0 ? wm : wp) = br.samples[i].omega;
            }
        }
        if (!wm || !wp) continue;
        const double curv = *wm - 2.0 * s.omega + *wp;
        if (maximize ? curv >= 0.0 : curv <= 0.0) continue;
        const double t = 0.5 * h * (*wm - *wp) / curv;
        if (std::abs(t) >= h || std::abs(t) < 1e-12) continue;
        std::vector<double> k = s.k;
        k[static_cast<std::size_t>(br.codim + axis)] += t;
        const double predicted = s.omega - (*wp - *wm) * (*wp - *wm) / (8.0 * curv);
        std::vector<Interval> blocked;
        for (const auto& iv : ex.intervals[s.node]) blocked.push_back(iv.dilated(spec.tolerances.band_guard));
        for (const auto& gap : complement_within(spec.omega_window, blocked)) {
            if (!gap.contains(s.omega)) continue;
            if (auto r = root_near(spec, br.codim, k, predicted, gap)) {
                best = maximize ? std::max(best, *r) : std::min(best, *r);
            }
        }
    }
    return best;
}

}  // namespace detail

/// Connected images of a branch over its remaining torus, as intervals.
inline std::vector<Interval> branch_images(const ProblemSpec& spec, const Branch& br, const ExclusionSet& ex) {
    std::vector<int> axes(static_cast<std::size_t>(br.grid.dims()));
    std::iota(axes.begin(), axes.end(), 0);
    std::vector<Interval> out;
    for (const auto& comp : detail::components(br, ex, spec.omega_window, spec.tolerances.band_guard, axes,
                                               [](const BranchSample&) { return true; })) {
        std::size_t lo_at = comp[0], hi_at = comp[0];
        for (auto i : comp) {
            if (br.samples[i].omega < br.samples[lo_at].omega) lo_at = i;
            if (br.samples[i].omega > br.samples[hi_at].omega) hi_at = i;
        }
        double lo = br.samples[lo_at].omega, hi = br.samples[hi_at].omega;
        if (comp.size() > 2) {
            lo = detail::refine_branch_extremum(spec, br, ex, comp, lo_at, false);
            hi = detail::refine_branch_extremum(spec, br, ex, comp, hi_at, true);
        }
        out.push_back({lo, hi});
    }
    return out;
}

/// Bands, every defect branch in codim order, and the assembled union.
inline SpectralResult full_spectrum(const ProblemSpec& spec, const SweepGrids& grids) {
    const auto diag = validate(spec);
    if (!diag.ok()) throw InputError("full_spectrum: invalid problem: " + diag.violations.front().message);
    SpectralResult res;
    res.omega_window = spec.omega_window;
    const int n_dim = spec.lattice_dim;
    // Pieces closer than the root tolerance cannot be told apart.
    const double join = spec.tolerances.root_tol_omega;

    res.band_images = band_ranges(spec, n_dim, std::vector<double>(static_cast<std::size_t>(n_dim), 0.0),
                                  grids.k_points, grids.threads);
    for (const auto& iv : merge_intervals(res.band_images, join)) {
        res.pieces.push_back({PieceKind::BandInterval, 0, iv});
    }
    for (int j = 1; j <= n_dim; ++j) {
        if (!spec.defect(j)) continue;
        ExclusionSet ex = exclusion_set(spec, j, res.branches, grids);
        Branch br = dispersion_branch(spec, j, ex, grids);
        res.inconclusive.insert(res.inconclusive.end(), br.inconclusive.begin(), br.inconclusive.end());
        if (j < n_dim) {
            for (const auto& iv : merge_intervals(branch_images(spec, br, ex), join)) {
                res.pieces.push_back({PieceKind::BranchInterval, j, iv});
            }
        } else {
            for (const auto& s : br.samples) res.pieces.push_back({PieceKind::IsolatedPoint, j, {s.omega, s.omega}});
        }
        res.exclusions.push_back(std::move(ex));
        res.branches.push_back(std::move(br));
    }
    std::vector<Interval> all;
    for (const auto& p : res.pieces) {
        const Interval clipped{std::max(p.range.lo, spec.omega_window.lo), std::min(p.range.hi, spec.omega_window.hi)};
        if (clipped.lo <= clipped.hi) all.push_back(clipped);
    }
    res.omega_set = merge_intervals(std::move(all), join);
    res.inconclusive = merge_intervals(std::move(res.inconclusive));
    return res;
}

}  // namespace defect_bands
