#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace descent {

// Worker count: DESCENT_THREADS if set, else hardware concurrency.
inline int thread_count() {
    if (const char* env = std::getenv("DESCENT_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (...) {
        }
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
// so results written per index are independent of the thread count.
template <class F>
void parallel_for(std::size_t n, F&& body, int threads = 0) {
    if (threads <= 0) threads = thread_count();
    threads = int(std::min<std::size_t>(std::size_t(threads), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += std::size_t(threads)) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace descent
