#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace incentive_mpc {

// Static index partitioning; callers write into per-index slots and reduce in
// index order afterwards, so results do not depend on the worker count.
class Executor {
 public:
  explicit Executor(std::size_t threads = 1) : threads_(std::max<std::size_t>(1, threads)) {}

  std::size_t threads() const { return threads_; }

  template <class F>
  void for_each(std::size_t n, F&& f) const {
    const std::size_t workers = std::min(threads_, n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) f(i);
      return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) f(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

 private:
  std::size_t threads_;
};

inline std::size_t default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// INCENTIVE_MPC_THREADS wins over the requested count when set to a positive integer.
inline std::size_t resolve_thread_count(std::size_t requested) {
  if (const char* env = std::getenv("INCENTIVE_MPC_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return requested == 0 ? default_thread_count() : requested;
}

}  // namespace incentive_mpc
