#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lsr {

namespace detail {
inline std::atomic<int>& thread_setting()
{
    static std::atomic<int> n{0};
    return n;
}
} // namespace detail

/// Caps the worker count of every parallel map. Zero restores the default
/// (LSR_THREADS, else one).
inline void set_thread_count(int n) { detail::thread_setting() = std::max(0, n); }

inline int thread_count()
{
    const int n = detail::thread_setting();
    if (n > 0) {
        return n;
    }
    if (const char* env = std::getenv("LSR_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) {
                return v;
            }
        } catch (const std::exception&) {
        }
    }
    return 1;
}

/// Calls fn(i) for i in [0, n). Each index must only write its own outputs;
/// results are then identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(work);
    }
    work();
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace lsr
