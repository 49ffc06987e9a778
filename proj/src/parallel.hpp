#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "lure/errors.hpp"

namespace lure::detail {

/// Runs jobs 0..count-1 on up to `workers` threads; each job owns its output
/// directory so no state is shared. The first thrown error wins.
inline void run_parallel(std::size_t count, std::size_t workers,
                         const std::function<void(std::size_t)>& job) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (!failed) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed) first_error = e.what();
                failed = true;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed) throw InputError(first_error);
}

} // namespace lure::detail
