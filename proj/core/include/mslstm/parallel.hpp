#ifndef MSLSTM_PARALLEL_HPP
#define MSLSTM_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

namespace mslstm {

/// Runs fn(worker, i) for i in [0, n), assigning items round-robin to up to
/// `threads` workers: worker w handles i = w, w + workers, ... The static
/// assignment lets callers keep per-worker scratch state (indexed by the
/// worker argument) alive across items. With threads <= 1 everything runs
/// on worker 0 in order. The first exception thrown by a worker is
/// rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(
      threads <= 1 ? 1 : static_cast<std::size_t>(threads), 1,
      std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(0, i);
    }
    return;
  }

  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) {
          fn(w, i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) {
    t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

/// Number of workers parallel_for will actually use for n items.
inline std::size_t worker_count(std::size_t n, int threads) {
  return std::clamp<std::size_t>(
      threads <= 1 ? 1 : static_cast<std::size_t>(threads), 1,
      std::max<std::size_t>(n, 1));
}

}  // namespace mslstm

#endif
