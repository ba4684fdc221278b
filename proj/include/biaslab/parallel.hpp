#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace biaslab {

/// Splits [0, n) into at most `workers` contiguous chunks and runs
/// `body(begin, end, worker_index)` for each on its own thread. The first
/// exception thrown by any chunk is rethrown after all threads join.
template <class Body>
void parallel_chunks(std::size_t n, unsigned workers, Body&& body)
{
    workers = std::max(1u, workers);
    const std::size_t chunks = std::min<std::size_t>(workers, std::max<std::size_t>(n, 1));
    if (chunks == 1) {
        body(std::size_t{0}, n, 0u);
        return;
    }
    std::vector<std::exception_ptr> errors(chunks);
    std::vector<std::thread> threads;
    threads.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        threads.emplace_back([&, c, begin, end] {
            try {
                body(begin, end, static_cast<unsigned>(c));
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Number of chunks parallel_chunks will use for (n, workers).
inline std::size_t chunk_count(std::size_t n, unsigned workers)
{
    return std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(n, 1));
}

} // namespace biaslab
