#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace subrosa::par {

/// Number of worker threads used by parallel_for (default: hardware cores).
unsigned thread_count();

/// Set the worker count; 0 restores the hardware default, 1 disables threading.
void set_thread_count(unsigned n);

namespace detail {
// Work is partitioned into fixed-size chunks independent of the thread count,
// so any schedule touches the same index ranges.
inline constexpr std::size_t kChunk = 8192;
void run_chunked(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);
}  // namespace detail

/// Apply body(begin, end) over disjoint chunks covering [0, n).
/// Chunk boundaries are fixed, so per-element results never depend on the
/// thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    if (n == 0) return;
    if (thread_count() <= 1 || n < 2 * detail::kChunk) {
        body(std::size_t{0}, n);
        return;
    }
    detail::run_chunked(n, std::function<void(std::size_t, std::size_t)>(body));
}

/// Fixed-tree summation: sequential partial sums over fixed chunks, combined
/// pairwise in index order. Bit-identical for every thread count.
double tree_combine(std::vector<double> partials);

template <class Term>
double indexed_sum(std::size_t n, Term&& term) {
    if (n == 0) return 0.0;
    const std::size_t nblocks = (n + detail::kChunk - 1) / detail::kChunk;
    std::vector<double> partials(nblocks, 0.0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        while (begin < end) {
            const std::size_t block = begin / detail::kChunk;
            const std::size_t stop = std::min(end, (block + 1) * detail::kChunk);
            double s = 0.0;
            for (std::size_t i = begin; i < stop; ++i) s += term(i);
            partials[block] = s;
            begin = stop;
        }
    });
    return tree_combine(std::move(partials));
}

/// Fixed-tree sum of a contiguous array.
double sum(std::span<const double> values);

}  // namespace subrosa::par
