#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace depthproj {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs body(i) for i in [begin, end) on `threads` workers. Work items are
/// handed out in fixed-size blocks; callers write results by index so the
/// output never depends on scheduling.
template <typename Body>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, int threads, Body&& body,
                  std::ptrdiff_t grain = 1) {
  const std::ptrdiff_t n = end - begin;
  if (n <= 0) return;
  threads = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>((n + grain - 1) / grain)));
  if (threads == 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) body(i);
    return;
  }
  std::mutex lock;
  std::ptrdiff_t next = begin;
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      std::ptrdiff_t lo;
      {
        std::lock_guard<std::mutex> guard(lock);
        if (next >= end || failure) return;
        lo = next;
        next = std::min(end, next + grain);
      }
      const std::ptrdiff_t hi = std::min(end, lo + grain);
      try {
        for (std::ptrdiff_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> guard(lock);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace depthproj
