#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tailq/errors.hpp"

// Deterministic blocked parallelism: work items 0..n-1 are split into
// fixed-size blocks, workers claim blocks through a shared counter, and the
// per-block results are combined in block-index order afterwards.  Output is
// therefore byte-identical for any worker count, provided each item derives
// its randomness from its own index.

namespace tailq {

constexpr std::uint64_t kDefaultBlockSize = 65536;

inline int resolve_workers(int requested) {
    if (const char* env = std::getenv("TAILQ_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1 || v > 4096)
            throw DomainError("TAILQ_THREADS must be an integer between 1 and 4096");
        return static_cast<int>(v);
    }
    if (requested < 0) throw DomainError("worker count must be nonnegative");
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// block_fn(block_index, first_item, last_item_exclusive) -> R
// combine(block_index, R&&) is called on the calling thread, in block order.
template <class R, class BlockFn, class Combine>
void run_blocked(std::uint64_t n_items, int workers, BlockFn&& block_fn, Combine&& combine,
                 std::uint64_t block_size = kDefaultBlockSize) {
    if (n_items == 0) return;
    const std::uint64_t n_blocks = (n_items + block_size - 1) / block_size;
    const int n_workers =
        static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(workers), n_blocks));

    std::vector<R> results(n_blocks);
    std::vector<std::exception_ptr> errors(n_blocks);
    std::atomic<std::uint64_t> next{0};

    auto work = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            const std::uint64_t lo = b * block_size;
            const std::uint64_t hi = std::min(n_items, lo + block_size);
            try {
                results[b] = block_fn(b, lo, hi);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };

    if (n_workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    // Report the error of the lowest block so failures are deterministic too.
    for (std::uint64_t b = 0; b < n_blocks; ++b)
        if (errors[b]) std::rethrow_exception(errors[b]);
    for (std::uint64_t b = 0; b < n_blocks; ++b) combine(b, std::move(results[b]));
}

}  // namespace tailq
