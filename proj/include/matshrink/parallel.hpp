#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace matshrink {

inline int default_workers()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, n_tasks) on up to `workers` threads. Tasks must
// write only to their own slot; callers reduce afterwards in index order, so
// results never depend on the worker count. The first exception is rethrown.
template <class Body>
void parallel_for(std::size_t n_tasks, int workers, Body&& body)
{
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n_tasks);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) {
            body(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_tasks) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    pool.clear();  // joins
    if (error) {
        std::rethrow_exception(error);
    }
}

// Fixed-shape pairwise reduction: the association order depends only on
// items.size().
template <class T, class Add>
T pairwise_reduce(std::vector<T> items, Add add)
{
    if (items.empty()) {
        return T{};
    }
    while (items.size() > 1) {
        std::vector<T> next;
        next.reserve((items.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < items.size(); i += 2) {
            next.push_back(add(std::move(items[i]), std::move(items[i + 1])));
        }
        if (items.size() % 2 == 1) {
            next.push_back(std::move(items.back()));
        }
        items = std::move(next);
    }
    return std::move(items.front());
}

}  // namespace matshrink
