// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "unncsi/kernels.hpp"

namespace unncsi::detail {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each worker gets an
// equal share of the OpenMP threads. The first exception is rethrown after
// all workers stop.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    const int omp_share = std::max(1, kernels::openmp::max_threads() / static_cast<int>(workers));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            kernels::openmp::set_threads(omp_share);
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto &t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace unncsi::detail
