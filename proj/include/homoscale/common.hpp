#ifndef HOMOSCALE_COMMON_HPP
#define HOMOSCALE_COMMON_HPP

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace homoscale {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent input data (bad grids, violated solvability, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

/// Input cannot be represented at the requested discretization.
class ResolutionError : public Error {
 public:
  explicit ResolutionError(const std::string& what) : Error(what) {}
};

/// An iterative solve failed to converge within its iteration cap.
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

/// Thread cap taken from HOMOSCALE_THREADS (0 or unset means hardware default).
inline unsigned thread_cap() {
  if (const char* env = std::getenv("HOMOSCALE_THREADS")) {
    long v = std::atol(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Parallel loop over [0, count). Work items must be independent; results
/// written per index stay deterministic regardless of the thread count.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  unsigned nt = std::min<std::size_t>(thread_cap(), count);
  if (nt <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (unsigned t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::size_t i = t; i < count; i += nt) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace homoscale

#endif  // HOMOSCALE_COMMON_HPP
