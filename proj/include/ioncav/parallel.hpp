#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace ioncav {

/// Runs fn(lo, hi) over contiguous chunks of [0, n) on `threads` workers and
/// rethrows the exception of the lowest failing chunk.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
    const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    if (nt <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    for (unsigned w = 0; w < nt; ++w) {
        const std::size_t lo = n * w / nt;
        const std::size_t hi = n * (w + 1) / nt;
        pool.emplace_back([&fn, &errors, lo, hi, w] {
            try {
                fn(lo, hi);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace ioncav
