#include "concept_monitor/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace concept_monitor {
namespace {

std::size_t default_threads() {
    if (const char* env = std::getenv("CONCEPT_MONITOR_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& configured() {
    static std::atomic<std::size_t> n{default_threads()};
    return n;
}

}  // namespace

std::size_t thread_count() noexcept { return configured().load(std::memory_order_relaxed); }

void set_thread_count(std::size_t n) noexcept {
    configured().store(std::max<std::size_t>(1, n), std::memory_order_relaxed);
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    grain = std::max<std::size_t>(1, grain);
    const std::size_t units = (n + grain - 1) / grain;
    const std::size_t workers = std::min(thread_count(), units);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    const std::size_t per = (units + workers - 1) / workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * per * grain);
        const std::size_t end = std::min(n, (w + 1) * per * grain);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace concept_monitor
