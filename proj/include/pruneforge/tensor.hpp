// Dense row-major tensors and the handful of kernels everything else is
// built from. Reductions always run in ascending index order; parallelism is
// only across independent output elements, so results are bitwise
// reproducible for any thread count.
#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pruneforge/common.hpp"
#include "pruneforge/rng.hpp"

namespace pruneforge {

enum class Dtype : uint8_t { F32 = 1, F64 = 2 };

template <typename T>
constexpr Dtype dtype_of() {
  if constexpr (std::same_as<T, float>)
    return Dtype::F32;
  else
    return Dtype::F64;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
  requires std::floating_point<T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int64_t d : shape_) {
      if (d <= 0) throw DimensionError("Tensor: dimension sizes must be positive, got " + shape_str(shape_));
      n *= d;
    }
    data_.assign(size_t(n), T(0));
  }
  Tensor(std::vector<int64_t> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    int64_t n = 1;
    for (int64_t d : shape_) n *= d;
    if (n != int64_t(data_.size()))
      throw DimensionError("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_str(shape_));
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor identity(int64_t n) {
    Tensor t({n, n});
    for (int64_t i = 0; i < n; ++i) t.data_[size_t(i * n + i)] = T(1);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return int64_t(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_[size_t(i)]; }
  int64_t numel() const { return int64_t(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& at(int64_t flat) { return data_[size_t(flat)]; }
  T at(int64_t flat) const { return data_[size_t(flat)]; }
  // 2-D accessors; row-major, so (i, j) -> i * cols + j.
  T& operator()(int64_t i, int64_t j) { return data_[size_t(i * shape_[1] + j)]; }
  T operator()(int64_t i, int64_t j) const { return data_[size_t(i * shape_[1] + j)]; }

  int64_t rows() const { return shape_[0]; }
  int64_t cols() const { return shape_[1]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }
  bool bitwise_equal(const Tensor& o) const {
    return shape_ == o.shape_ && std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(T)) == 0;
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

template <typename T>
void require_2d(const Tensor<T>& t, const char* who) {
  if (t.rank() != 2) throw DimensionError(std::string(who) + ": expected 2-D tensor, got " + shape_str(t.shape()));
}

// c[i][j] = sum_p a[i][p] * b[p][j], p ascending. The j-inner loop form keeps
// the per-element summation order sequential while letting the compiler
// vectorize across output columns.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> c({m, n});
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  parallel_for(m, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      T* crow = C + i * n;
      const T* arow = A + i * k;
      for (int64_t p = 0; p < k; ++p) {
        const T aip = arow[p];
        const T* brow = B + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  });
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_2d(a, "transpose");
  const int64_t m = a.rows(), n = a.cols();
  Tensor<T> t({n, m});
  const T* A = a.data();
  T* Tp = t.data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) Tp[j * m + i] = A[i * n + j];
  return t;
}

namespace detail {
template <typename T, typename Fn>
Tensor<T> binary_map(const Tensor<T>& a, const Tensor<T>& b, const char* who, Fn&& fn) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fn(pa[i], pb[i]);
  return out;
}
template <typename T, typename Fn>
Tensor<T> unary_map(const Tensor<T>& a, Fn&& fn) {
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  T* po = out.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fn(pa[i]);
  return out;
}
}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_map(a, b, "add", [](T x, T y) { return x + y; });
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_map(a, b, "sub", [](T x, T y) { return x - y; });
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_map(a, b, "mul", [](T x, T y) { return x * y; });
}
template <typename T>
Tensor<T> tanh_map(const Tensor<T>& a) {
  return detail::unary_map(a, [](T x) { return std::tanh(x); });
}
template <typename T>
Tensor<T> sigmoid_map(const Tensor<T>& a) {
  return detail::unary_map(a, [](T x) { return T(1) / (T(1) + std::exp(-x)); });
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw DimensionError("add_inplace: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  T* pa = a.data();
  const T* pb = b.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) pa[i] += pb[i];
}

// m[i][j] += v[j] for every row i.
template <typename T>
void add_row_vector_inplace(Tensor<T>& m, const Tensor<T>& v) {
  require_2d(m, "add_row_vector");
  if (v.numel() != m.cols())
    throw DimensionError("add_row_vector: vector length " + std::to_string(v.numel()) + " vs cols " +
                         std::to_string(m.cols()));
  T* pm = m.data();
  const T* pv = v.data();
  for (int64_t i = 0; i < m.rows(); ++i)
    for (int64_t j = 0; j < m.cols(); ++j) pm[i * m.cols() + j] += pv[j];
}

// out[j] = sum_i m[i][j], i ascending.
template <typename T>
Tensor<T> colsum(const Tensor<T>& m) {
  require_2d(m, "colsum");
  Tensor<T> out({m.cols()});
  const T* pm = m.data();
  T* po = out.data();
  for (int64_t i = 0; i < m.rows(); ++i)
    for (int64_t j = 0; j < m.cols(); ++j) po[j] += pm[i * m.cols() + j];
  return out;
}

// [m x a] ++ [m x b] -> [m x (a+b)] along columns.
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& x, const Tensor<T>& y) {
  require_2d(x, "concat_cols");
  require_2d(y, "concat_cols");
  if (x.rows() != y.rows())
    throw DimensionError("concat_cols: row counts disagree, " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  Tensor<T> out({x.rows(), x.cols() + y.cols()});
  for (int64_t i = 0; i < x.rows(); ++i) {
    T* o = out.data() + i * out.cols();
    std::memcpy(o, x.data() + i * x.cols(), size_t(x.cols()) * sizeof(T));
    std::memcpy(o + x.cols(), y.data() + i * y.cols(), size_t(y.cols()) * sizeof(T));
  }
  return out;
}

// Columns [c0, c1) of m as a new tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& m, int64_t c0, int64_t c1) {
  require_2d(m, "slice_cols");
  if (c0 < 0 || c1 > m.cols() || c0 >= c1) throw DimensionError("slice_cols: bad column range");
  Tensor<T> out({m.rows(), c1 - c0});
  for (int64_t i = 0; i < m.rows(); ++i)
    std::memcpy(out.data() + i * out.cols(), m.data() + i * m.cols() + c0, size_t(c1 - c0) * sizeof(T));
  return out;
}

// Every element i.i.d. uniform on [-r, r], drawn in flat index order.
template <typename T>
Tensor<T> uniform_init(std::vector<int64_t> shape, double r, SeededRng& rng) {
  if (!(r > 0)) throw ParamError("uniform_init: scale must be positive, got " + std::to_string(r));
  Tensor<T> t(std::move(shape));
  T* p = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) p[i] = T(rng.next_uniform(-r, r));
  return t;
}

}  // namespace pruneforge
