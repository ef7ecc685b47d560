#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace oocrel {

inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(index, worker) for every index in [0, count); indices are claimed
// atomically by up to n_threads workers. Outputs must be combined by the
// caller in index order for schedule-independent results.
inline void parallel_for(int count, int n_threads, const std::function<void(int, int)>& body) {
    const int workers = std::min(resolve_threads(n_threads), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) {
            body(i, 0);
        }
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&](int worker) {
        for (;;) {
            const int index = next.fetch_add(1);
            if (index >= count || failed.load()) {
                return;
            }
            try {
                body(index, worker);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back(work, w);
    }
    for (auto& thread : threads) {
        thread.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace oocrel
