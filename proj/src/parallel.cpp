#include "subrosa/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace subrosa::par {

namespace {
unsigned g_threads = 0;  // 0 = hardware default

unsigned hardware_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}
}  // namespace

unsigned thread_count() { return g_threads == 0 ? hardware_threads() : g_threads; }

void set_thread_count(unsigned n) { g_threads = n; }

namespace detail {

void run_chunked(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    const unsigned nthreads = std::min<std::size_t>(thread_count(), nchunks);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= nchunks || failed.load(std::memory_order_relaxed)) break;
            const std::size_t begin = c * kChunk;
            try {
                body(begin, std::min(n, begin + kChunk));
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads - 1);
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

double tree_combine(std::vector<double> partials) {
    if (partials.empty()) return 0.0;
    std::size_t m = partials.size();
    while (m > 1) {
        const std::size_t half = (m + 1) / 2;
        for (std::size_t i = 0; i + half < m; ++i) partials[i] += partials[i + half];
        m = half;
    }
    return partials[0];
}

double sum(std::span<const double> values) {
    return indexed_sum(values.size(), [&](std::size_t i) { return values[i]; });
}

}  // namespace subrosa::par
