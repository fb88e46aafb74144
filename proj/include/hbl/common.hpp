#pragma once

// Shared scalar types, error hierarchy, deterministic reductions and the
// thread-count knob used by every pointwise kernel.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hbl {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr Complex I{0.0, 1.0};

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape/rank/degree mismatch or an invalid parameter.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A metric left the positive-definite Hermitian cone.
class DegenerateMetricError : public Error {
public:
  using Error::Error;
};

/// An internal cross-check (Hermitian assembly, etc.) failed.
class ConsistencyError : public Error {
public:
  using Error::Error;
};

/// Unreadable, corrupt or unwritable file.
class IoError : public Error {
public:
  using Error::Error;
};

/// Gradient flow step size underflowed.
class StallError : public Error {
public:
  using Error::Error;
};

/// Thread cap from HBL_THREADS (unset or invalid: let the runtime decide).
inline int thread_count() {
  static const int count = [] {
    if (const char* env = std::getenv("HBL_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
  }();
  return count;
}

/// Runs fn(i) for i in [0, count). Iterations must be independent; results
/// are identical for every thread count since no reduction happens here.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
#ifdef _OPENMP
  const auto n = static_cast<std::ptrdiff_t>(count);
  if (thread_count() > 1 && count >= 4096) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < count; ++i) fn(i);
}

/// Pairwise (cascade) summation with a fixed split order.
template <class T>
T pairwise_sum(std::span<const T> values) {
  constexpr std::size_t block = 8;
  if (values.size() <= block) {
    T acc{};
    for (const auto& v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <class T>
T pairwise_mean(std::span<const T> values) {
  return pairwise_sum(values) / static_cast<double>(values.size());
}

/// Round-trip decimal form, %.17g.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace hbl
