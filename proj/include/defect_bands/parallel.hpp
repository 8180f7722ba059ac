#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace defect_bands {

/// Evaluates fn(i) for i in [0, count) on up to `threads` workers and
/// returns the results in index order. Work assignment never affects the
/// values, so downstream reductions over the result are thread-count
/// independent. The exception of the lowest failing index is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, int threads, Fn&& fn) {
    std::vector<std::optional<T>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
                                                        std::max<std::size_t>(count, 1));
    auto run = [&](std::size_t w) {
        for (std::size_t i = w; i < count; i += workers) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    for (std::size_t i = 0; i < count; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
    }
    std::vector<T> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Sum over a fixed binary tree in index order.
template <class T>
T pairwise_sum(std::span<const T> v, const T& zero) {
    if (v.empty()) return zero;
    if (v.size() == 1) return v[0];
    if (v.size() <= 4) {
        T acc = v[0];
        for (std::size_t i = 1; i < v.size(); ++i) acc += v[i];
        return acc;
    }
    const std::size_t half = v.size() / 2;
    T left = pairwise_sum(v.subspan(0, half), zero);
    left += pairwise_sum(v.subspan(half), zero);
    return left;
}

}  // namespace defect_bands
