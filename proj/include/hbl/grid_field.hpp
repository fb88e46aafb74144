#pragma once

// Complex r x r matrix-valued function sampled on the periodic grid.
//
// Storage is entry-major ("planar"): entry (i, j) of every grid point is a
// contiguous run of grid.points() values. Pointwise matrix kernels then become
// r^3 vectorisable sweeps and batched FFTs run on contiguous planes.

#include "hbl/background.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <new>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hbl {

namespace detail {

/// Recycles large field buffers. Fresh multi-megabyte allocations are served
/// by mmap and pay a page fault per 4 KiB on first touch, which otherwise
/// dominates short pointwise kernels.
class BlockPool {
public:
  static constexpr std::align_val_t alignment{64};
  static constexpr std::size_t min_bytes = std::size_t{1} << 16;
  static constexpr std::size_t max_cached = std::size_t{1} << 30;

  static BlockPool& instance() {
    static BlockPool pool;
    return pool;
  }

  void* take(std::size_t bytes) {
    if (bytes >= min_bytes) {
      std::lock_guard lock(mutex_);
      auto it = free_.find(bytes);
      if (it != free_.end() && !it->second.empty()) {
        void* p = it->second.back();
        it->second.pop_back();
        cached_ -= bytes;
        return p;
      }
    }
    return ::operator new(bytes, alignment);
  }

  void give(void* p, std::size_t bytes) noexcept {
    if (bytes >= min_bytes) {
      std::lock_guard lock(mutex_);
      if (cached_ + bytes <= max_cached) {
        try {
          free_[bytes].push_back(p);
          cached_ += bytes;
          return;
        } catch (...) {
        }
      }
    }
    ::operator delete(p, alignment);
  }

  BlockPool(const BlockPool&) = delete;
  BlockPool& operator=(const BlockPool&) = delete;
  ~BlockPool() {
    for (auto& [bytes, blocks] : free_)
      for (void* p : blocks) ::operator delete(p, alignment);
  }

private:
  BlockPool() = default;
  std::mutex mutex_;
  std::unordered_map<std::size_t, std::vector<void*>> free_;
  std::size_t cached_ = 0;
};

}  // namespace detail

/// 64-byte aligned storage so batched FFT plans can use SIMD codelets.
template <class T>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(detail::BlockPool::instance().take(n * sizeof(T))); }
  void deallocate(T* p, std::size_t n) noexcept { detail::BlockPool::instance().give(p, n * sizeof(T)); }

  // Value-less construction leaves storage unset; GridField only uses it for
  // buffers that are overwritten in full.
  template <class U>
  void construct(U*) noexcept {}
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

class GridField {
public:
  GridField() = default;

  GridField(const Grid& grid, int rank)
      : grid_(grid), rank_(rank), points_(grid.points()),
        data_(points_ * static_cast<std::size_t>(rank) * rank, Complex{}) {
    if (rank < 1) throw ConfigError("GridField rank must be >= 1");
  }

  static GridField zeros(const Grid& grid, int rank) { return GridField(grid, rank); }

  /// Storage with unspecified contents; the caller must write every entry.
  static GridField uninitialized(const Grid& grid, int rank) {
    if (rank < 1) throw ConfigError("GridField rank must be >= 1");
    GridField f;
    f.grid_ = grid;
    f.rank_ = rank;
    f.points_ = grid.points();
    f.data_.resize(f.points_ * static_cast<std::size_t>(rank) * rank);
    return f;
  }

  static GridField constant(const Grid& grid, const Mat& value) {
    if (value.rows() != value.cols()) throw ConfigError("GridField constant must be square");
    GridField f(grid, static_cast<int>(value.rows()));
    for (int i = 0; i < f.rank_; ++i)
      for (int j = 0; j < f.rank_; ++j) std::fill_n(f.entry(i, j), f.points_, value(i, j));
    return f;
  }

  static GridField identity(const Grid& grid, int rank) {
    return constant(grid, Mat::Identity(rank, rank));
  }

  static GridField scalar(const Grid& grid, int rank, Complex c) {
    return constant(grid, c * Mat::Identity(rank, rank));
  }

  /// Samples fn(point coordinates) -> r x r matrix.
  static GridField sample(const Grid& grid, int rank,
                          const std::function<Mat(std::span<const double>)>& fn) {
    GridField f(grid, rank);
    std::vector<double> x(grid.real_dims());
    for (std::size_t p = 0; p < f.points_; ++p) {
      for (int d = 0; d < grid.real_dims(); ++d) x[d] = grid.coordinate(p, d);
      f.set_matrix(p, fn(x));
    }
    return f;
  }

  const Grid& grid() const { return grid_; }
  int rank() const { return rank_; }
  std::size_t points() const { return points_; }
  std::size_t size() const { return data_.size(); }

  Complex* data() { return data_.data(); }
  const Complex* data() const { return data_.data(); }

  Complex* entry(int i, int j) { return data_.data() + offset(i, j); }
  const Complex* entry(int i, int j) const { return data_.data() + offset(i, j); }

  Complex& operator()(std::size_t p, int i, int j) { return data_[offset(i, j) + p]; }
  Complex operator()(std::size_t p, int i, int j) const { return data_[offset(i, j) + p]; }

  Mat matrix(std::size_t p) const {
    Mat m(rank_, rank_);
    for (int i = 0; i < rank_; ++i)
      for (int j = 0; j < rank_; ++j) m(i, j) = (*this)(p, i, j);
    return m;
  }

  void set_matrix(std::size_t p, const Mat& m) {
    for (int i = 0; i < rank_; ++i)
      for (int j = 0; j < rank_; ++j) (*this)(p, i, j) = m(i, j);
  }

  bool compatible(const GridField& o) const { return grid_ == o.grid_ && rank_ == o.rank_; }

  void require_compatible(const GridField& o, const char* what) const {
    if (!compatible(o)) throw ConfigError(std::string("grid/rank mismatch in ") + what);
  }

  GridField& operator+=(const GridField& o) {
    require_compatible(o, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  GridField& operator-=(const GridField& o) {
    require_compatible(o, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  GridField& operator*=(Complex c) {
    for (auto& v : data_) v *= c;
    return *this;
  }

  /// this += c * o
  void add_scaled(const GridField& o, Complex c) {
    require_compatible(o, "add_scaled");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += c * o.data_[k];
  }

  friend GridField operator+(GridField a, const GridField& b) { return a += b; }
  friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
  friend GridField operator*(Complex c, GridField a) { return a *= c; }
  friend GridField operator*(double c, GridField a) { return a *= Complex(c); }

  /// Pointwise conjugate transpose.
  GridField adjoint() const {
    GridField out(grid_, rank_);
    for (int i = 0; i < rank_; ++i)
      for (int j = 0; j < rank_; ++j) {
        const Complex* src = entry(j, i);
        Complex* dst = out.entry(i, j);
        for (std::size_t p = 0; p < points_; ++p) dst[p] = std::conj(src[p]);
      }
    return out;
  }

  /// Pointwise trace as a rank-1 field.
  GridField trace() const {
    GridField out(grid_, 1);
    Complex* dst = out.data();
    for (int i = 0; i < rank_; ++i) {
      const Complex* src = entry(i, i);
      for (std::size_t p = 0; p < points_; ++p) dst[p] += src[p];
    }
    return out;
  }

  /// Rank-1 field times the identity of the given rank.
  GridField times_identity(int rank) const {
    if (rank_ != 1) throw ConfigError("times_identity needs a scalar field");
    GridField out(grid_, rank);
    for (int i = 0; i < rank; ++i) std::copy_n(data(), points_, out.entry(i, i));
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::norm(v));
    return std::sqrt(m);
  }

  /// Largest pointwise Frobenius norm.
  double sup_frobenius() const {
    double m = 0.0;
    for (std::size_t p = 0; p < points_; ++p) {
      double s = 0.0;
      for (int e = 0; e < rank_ * rank_; ++e) s += std::norm(data_[e * points_ + p]);
      m = std::max(m, s);
    }
    return std::sqrt(m);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const Complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
  }

private:
  std::size_t offset(int i, int j) const {
    return (static_cast<std::size_t>(i) * rank_ + static_cast<std::size_t>(j)) * points_;
  }

  Grid grid_{};
  int rank_ = 0;
  std::size_t points_ = 0;
  std::vector<Complex, AlignedAllocator<Complex>> data_;
};

/// out += c * a * b, pointwise matrix product.
inline void add_product(GridField& out, const GridField& a, const GridField& b, Complex c) {
  a.require_compatible(b, "add_product");
  out.require_compatible(a, "add_product");
  const int r = a.rank();
  const std::size_t P = a.points();
  if (r == 2) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Complex* o = out.entry(i, j);
        const Complex *x0 = a.entry(i, 0), *x1 = a.entry(i, 1), *y0 = b.entry(0, j), *y1 = b.entry(1, j);
        for (std::size_t p = 0; p < P; ++p) o[p] += c * (x0[p] * y0[p] + x1[p] * y1[p]);
      }
    return;
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      Complex* o = out.entry(i, j);
      for (int l = 0; l < r; ++l) {
        const Complex* x = a.entry(i, l);
        const Complex* y = b.entry(l, j);
        for (std::size_t p = 0; p < P; ++p) o[p] += c * (x[p] * y[p]);
      }
    }
}

/// Pointwise matrix product a * b.
inline GridField multiply(const GridField& a, const GridField& b) {
  a.require_compatible(b, "multiply");
  const int r = a.rank();
  const std::size_t P = a.points();
  GridField out = GridField::uninitialized(a.grid(), r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      Complex* o = out.entry(i, j);
      if (r == 2) {
        const Complex *x0 = a.entry(i, 0), *x1 = a.entry(i, 1), *y0 = b.entry(0, j), *y1 = b.entry(1, j);
        for (std::size_t p = 0; p < P; ++p) o[p] = x0[p] * y0[p] + x1[p] * y1[p];
        continue;
      }
      std::fill_n(o, P, Complex{});
      for (int l = 0; l < r; ++l) {
        const Complex* x = a.entry(i, l);
        const Complex* y = b.entry(l, j);
        for (std::size_t p = 0; p < P; ++p) o[p] += x[p] * y[p];
      }
    }
  return out;
}

/// Pointwise product of a rank-1 field with a matrix field.
inline GridField scale_pointwise(const GridField& scalar, const GridField& a) {
  if (scalar.rank() != 1 || scalar.grid() != a.grid())
    throw ConfigError("scale_pointwise needs a scalar field on the same grid");
  GridField out = a;
  const Complex* s = scalar.data();
  for (int i = 0; i < a.rank(); ++i)
    for (int j = 0; j < a.rank(); ++j) {
      Complex* o = out.entry(i, j);
      for (std::size_t p = 0; p < a.points(); ++p) o[p] *= s[p];
    }
  return out;
}

/// Grid mean of a scalar field, pairwise summed.
inline Complex grid_mean(const GridField& scalar) {
  if (scalar.rank() != 1) throw ConfigError("grid_mean needs a scalar field");
  return pairwise_mean(std::span<const Complex>(scalar.data(), scalar.points()));
}

/// Grid mean of every entry of a matrix field.
inline Mat grid_mean_matrix(const GridField& f) {
  Mat m(f.rank(), f.rank());
  for (int i = 0; i < f.rank(); ++i)
    for (int j = 0; j < f.rank(); ++j)
      m(i, j) = pairwise_mean(std::span<const Complex>(f.entry(i, j), f.points()));
  return m;
}

// Coefficient operations shared by the form algebra (see forms.hpp).
inline GridField zero_like(const GridField& f) { return GridField(f.grid(), f.rank()); }
inline void add_scaled(GridField& out, const GridField& a, Complex c) { out.add_scaled(a, c); }

}  // namespace hbl
