#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "ojasde/errors.hpp"
#include "ojasde/rng.hpp"

namespace ojasde {

struct McResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n_mc = 0;
  bool stderr_defined = true;  // false when n_mc == 1
};

/// Fixed-order pairwise summation; independent of any threading above it.
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo,
                           std::size_t hi) {
  const std::size_t n = hi - lo;
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  const std::size_t mid = lo + n / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v, 0, v.size());
}

inline unsigned default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 2u : hc;
}

/// Evaluate task(i, stream_i) for i = 0..n_mc-1 and reduce to mean/stderr.
///
/// Path i always uses the stream derived from (seed, i), and the reduction is
/// fixed-order pairwise summation over the per-path values, so the result is
/// bit-identical for any worker count. A StabilityViolation from a path is
/// rethrown as-is; any other path error is wrapped with its path index.
inline McResult mc_ensemble(
    const std::function<double(std::uint64_t, RngStream&)>& task,
    std::uint64_t n_mc, std::uint64_t seed, unsigned n_workers = 0) {
  if (n_mc == 0) throw ValidationError("mc_ensemble: n_mc must be positive");
  if (n_workers == 0) n_workers = default_workers();

  std::vector<double> values(n_mc);
  struct Failure {
    std::uint64_t path = 0;
    std::exception_ptr eptr;
  };
  std::vector<Failure> failures(n_workers);

  auto run_range = [&](unsigned worker, std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      try {
        RngStream stream(seed, i);
        values[i] = task(i, stream);
      } catch (...) {
        failures[worker] = {i, std::current_exception()};
        return;
      }
    }
  };

  if (n_workers <= 1 || n_mc < 2 * n_workers) {
    run_range(0, 0, n_mc);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (n_mc + n_workers - 1) / n_workers;
    for (unsigned wk = 0; wk < n_workers; ++wk) {
      const std::uint64_t lo = wk * chunk;
      const std::uint64_t hi = std::min<std::uint64_t>(n_mc, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, wk, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  const Failure* first = nullptr;
  for (const auto& f : failures)
    if (f.eptr && (first == nullptr || f.path < first->path)) first = &f;
  if (first != nullptr) {
    try {
      std::rethrow_exception(first->eptr);
    } catch (const StabilityViolation&) {
      throw;
    } catch (const std::exception& e) {
      throw Error("mc_ensemble: path " + std::to_string(first->path) + ": " +
                  e.what());
    }
  }

  McResult r;
  r.n_mc = n_mc;
  r.mean = pairwise_sum(values) / static_cast<double>(n_mc);
  if (n_mc == 1) {
    r.stderr_ = 0.0;
    r.stderr_defined = false;
    return r;
  }
  std::vector<double> dev2(n_mc);
  for (std::uint64_t i = 0; i < n_mc; ++i) {
    const double d = values[i] - r.mean;
    dev2[i] = d * d;
  }
  const double var = pairwise_sum(dev2) / static_cast<double>(n_mc - 1);
  r.stderr_ = std::sqrt(var / static_cast<double>(n_mc));
  return r;
}

}  // namespace ojasde
