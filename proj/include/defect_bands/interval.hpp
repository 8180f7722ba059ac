#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace defect_bands {

/// Closed real interval [lo, hi]; a point when lo == hi.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x, double pad = 0.0) const noexcept { return x >= lo - pad && x <= hi + pad; }
    double length() const noexcept { return hi - lo; }
    double distance(double x) const noexcept {
        if (x < lo) return lo - x;
        if (x > hi) return x - hi;
        return 0.0;
    }
    Interval dilated(double pad) const noexcept { return {lo - pad, hi + pad}; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorts and merges overlapping (or touching within `join`) intervals.
inline std::vector<Interval> merge_intervals(std::vector<Interval> v, double join = 0.0) {
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) {
        return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });
    std::vector<Interval> out;
    for (const auto& iv : v) {
        if (!out.empty() && iv.lo <= out.back().hi + join) {
            out.back().hi = std::max(out.back().hi, iv.hi);
        } else {
            out.push_back(iv);
        }
    }
    return out;
}

inline double distance_to(const std::vector<Interval>& set, double x) {
    double d = INFINITY;
    for (const auto& iv : set) d = std::min(d, iv.distance(x));
    return d;
}

inline bool contains_any(const std::vector<Interval>& set, double x, double pad = 0.0) {
    return std::any_of(set.begin(), set.end(), [&](const Interval& iv) { return iv.contains(x, pad); });
}

/// Complement of `removed` inside `window`, as sorted disjoint intervals.
inline std::vector<Interval> complement_within(const Interval& window, std::vector<Interval> removed) {
    removed = merge_intervals(std::move(removed));
    std::vector<Interval> out;
    double cursor = window.lo;
    for (const auto& r : removed) {
        if (r.hi < window.lo || r.lo > window.hi) continue;
        if (r.lo > cursor) out.push_back({cursor, std::min(r.lo, window.hi)});
        cursor = std::max(cursor, r.hi);
        if (cursor >= window.hi) break;
    }
    if (cursor < window.hi) out.push_back({cursor, window.hi});
    return out;
}

}  // namespace defect_bands
