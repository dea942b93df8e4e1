#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace paultrap {

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0)
    return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, n) into `threads` contiguous chunks and runs
/// body(begin, end, chunk_index) on each. The partition depends only on
/// (n, threads). The first exception thrown by a chunk is rethrown.
template <class Body> void parallel_chunks(std::size_t n, unsigned threads, Body &&body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    body(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    pool.emplace_back([&, begin, end, t] {
      try {
        body(begin, end, t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

/// Runs body(i) for every i in [0, n); items are independent.
template <class Body> void parallel_for(std::size_t n, unsigned threads, Body &&body) {
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i)
      body(i);
  });
}

} // namespace paultrap
