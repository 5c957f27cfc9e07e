#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace matchlab {

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are identical for any worker count.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> threads;
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        threads.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += count) fn(i);
        });
    }
    for (auto& th : threads) th.join();
}

}  // namespace matchlab
