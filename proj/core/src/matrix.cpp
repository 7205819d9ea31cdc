// SPDX-License-Identifier: Apache-2.0

#include "cdc/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cdc {

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, std::vector<T>(rows * cols, T{})) {}

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw DimensionMismatch("matrix must have at least one row and one column");
  }
  if (data_.size() != rows * cols) {
    throw DimensionMismatch("matrix data length " + std::to_string(data_.size()) + " != " +
                            std::to_string(rows) + "x" + std::to_string(cols));
  }
}

template <typename T>
Matrix<T> Matrix<T>::from_rows(std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<T> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionMismatch("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

template <typename T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
  return m;
}

template <typename T>
Matrix<T> Matrix<T>::column(std::span<const T> values) {
  return Matrix(values.size(), 1, std::vector<T>(values.begin(), values.end()));
}

template <typename T>
Tensor3<T>::Tensor3(std::size_t height, std::size_t width, std::size_t channels)
    : Tensor3(height, width, channels, std::vector<T>(height * width * channels, T{})) {}

template <typename T>
Tensor3<T>::Tensor3(std::size_t height, std::size_t width, std::size_t channels, std::vector<T> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
  if (h_ == 0 || w_ == 0 || c_ == 0) throw DimensionMismatch("tensor dimensions must be >= 1");
  if (data_.size() != h_ * w_ * c_) throw DimensionMismatch("tensor data length mismatch");
}

template <typename T>
Tensor4<T>::Tensor4(std::size_t filter, std::size_t channels, std::size_t filters)
    : Tensor4(filter, channels, filters, std::vector<T>(filter * filter * channels * filters, T{})) {}

template <typename T>
Tensor4<T>::Tensor4(std::size_t filter, std::size_t channels, std::size_t filters, std::vector<T> data)
    : f_(filter), c_(channels), k_(filters), data_(std::move(data)) {
  if (f_ == 0 || c_ == 0 || k_ == 0) throw DimensionMismatch("filter bank dimensions must be >= 1");
  if (data_.size() != k_ * f_ * f_ * c_) throw DimensionMismatch("filter bank data length mismatch");
}

std::size_t conv_output_dim(std::size_t i, std::size_t f, std::size_t p, std::size_t s) {
  if (s == 0) throw InvalidGeometry("stride must be >= 1");
  if (f == 0) throw InvalidGeometry("filter size must be >= 1");
  if (i + 2 * p < f) {
    throw InvalidGeometry("filter " + std::to_string(f) + " larger than padded input " +
                          std::to_string(i + 2 * p));
  }
  return (i + 2 * p - f) / s + 1;
}

void ConvGeometry::validate() const {
  if (in_h == 0 || in_w == 0 || in_c == 0) throw InvalidGeometry("input dimensions must be >= 1");
  if (filters == 0) throw InvalidGeometry("filter count must be >= 1");
  (void)out_h();
  (void)out_w();
}

std::size_t ConvGeometry::out_h() const { return conv_output_dim(in_h, filter, padding, stride); }
std::size_t ConvGeometry::out_w() const { return conv_output_dim(in_w, filter, padding, stride); }

template <typename T>
Matrix<T> gemm(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("gemm: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  Matrix<T> c(m, n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = c.data().data();
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* ar = pa + i * k;
      T acc{};
      for (std::size_t kk = 0; kk < k; ++kk) acc += ar[kk] * pb[kk];
      pc[i] = acc;
    }
    return c;
  }
  // i-k-j keeps the inner loop contiguous in both b and c; fixed order, so
  // repeated calls are bit-identical.
  for (std::size_t i = 0; i < m; ++i) {
    T* cr = pc + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = pa[i * k + kk];
      const T* br = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
  return c;
}

template <typename T>
Matrix<T> im2col(const Tensor3<T>& input, const ConvGeometry& geom) {
  geom.validate();
  if (input.height() != geom.in_h || input.width() != geom.in_w || input.channels() != geom.in_c) {
    throw InvalidGeometry("im2col: input tensor does not match geometry");
  }
  const std::size_t ho = geom.out_h();
  const std::size_t wo = geom.out_w();
  const std::size_t f = geom.filter;
  const std::size_t ch = geom.in_c;
  Matrix<T> cols(geom.patch_size(), ho * wo);
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto h = static_cast<std::ptrdiff_t>(geom.in_h);
  const auto w = static_cast<std::ptrdiff_t>(geom.in_w);
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const std::size_t j = oy * wo + ox;
      for (std::size_t dy = 0; dy < f; ++dy) {
        const auto y = static_cast<std::ptrdiff_t>(oy * geom.stride + dy) - pad;
        for (std::size_t dx = 0; dx < f; ++dx) {
          const auto x = static_cast<std::ptrdiff_t>(ox * geom.stride + dx) - pad;
          const std::size_t base = (dy * f + dx) * ch;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          for (std::size_t c = 0; c < ch; ++c) {
            cols(base + c, j) = input.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
Matrix<T> unroll_filters(const Tensor4<T>& filters) {
  const std::size_t per = filters.filter() * filters.filter() * filters.channels();
  // Tensor4 layout already stores each filter as a contiguous (dy, dx, c) run.
  return Matrix<T>(filters.filters(), per, filters.values());
}

template <typename T>
Matrix<T> affine_activate(const Matrix<T>& m, std::span<const T> bias, ActivationKind act) {
  if (bias.size() != m.rows()) {
    throw DimensionMismatch("bias length " + std::to_string(bias.size()) + " != rows " +
                            std::to_string(m.rows()));
  }
  Matrix<T> out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (auto& v : out.row(i)) {
      v += bias[i];
      if (act == ActivationKind::ReLU && v < T{0}) v = T{0};
    }
  }
  return out;
}

template <typename T>
Matrix<T> activate(Matrix<T> m, ActivationKind act) {
  if (act == ActivationKind::ReLU) {
    for (auto& v : m.data()) {
      if (v < T{0}) v = T{0};
    }
  }
  return m;
}

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("add: shape mismatch");
  Matrix<T> out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

template <typename T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("subtract: shape mismatch");
  Matrix<T> out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

template <typename T>
Matrix<T> concat_rows(std::span<const Matrix<T>> parts) {
  if (parts.empty()) throw DimensionMismatch("concat_rows: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionMismatch("concat_rows: column count mismatch");
    rows += p.rows();
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  return Matrix<T>(rows, cols, std::move(data));
}

template <typename T>
Matrix<T> concat_cols(std::span<const Matrix<T>> parts) {
  if (parts.empty()) throw DimensionMismatch("concat_cols: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionMismatch("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(p.row(r).begin(), p.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += p.cols();
  }
  return out;
}

template <typename T>
Matrix<T> slice_rows(const Matrix<T>& m, Range rows) {
  if (rows.empty() || rows.end > m.rows()) throw DimensionMismatch("slice_rows: range out of bounds");
  auto first = m.values().begin() + static_cast<std::ptrdiff_t>(rows.begin * m.cols());
  auto last = m.values().begin() + static_cast<std::ptrdiff_t>(rows.end * m.cols());
  return Matrix<T>(rows.size(), m.cols(), std::vector<T>(first, last));
}

template <typename T>
Matrix<T> slice_cols(const Matrix<T>& m, Range cols) {
  if (cols.empty() || cols.end > m.cols()) throw DimensionMismatch("slice_cols: range out of bounds");
  Matrix<T> out(m.rows(), cols.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(cols.begin),
              src.begin() + static_cast<std::ptrdiff_t>(cols.end), out.row(r).begin());
  }
  return out;
}

template <typename T>
Matrix<T> pad_rows(const Matrix<T>& m, std::size_t rows) {
  if (rows < m.rows()) throw DimensionMismatch("pad_rows: target smaller than matrix");
  if (rows == m.rows()) return m;
  std::vector<T> data = m.values();
  data.resize(rows * m.cols(), T{});
  return Matrix<T>(rows, m.cols(), std::move(data));
}

template <typename T>
double max_relative_error(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw DimensionMismatch("max_relative_error: length mismatch");
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  if (diff == 0.0) return 0.0;
  return diff / std::max(scale, std::numeric_limits<double>::min());
}

template <typename T>
Tensor3<T> conv_matrix_to_tensor(const Matrix<T>& m, std::size_t out_h, std::size_t out_w) {
  if (m.cols() != out_h * out_w) throw DimensionMismatch("conv output column count mismatch");
  Tensor3<T> t(out_h, out_w, m.rows());
  for (std::size_t k = 0; k < m.rows(); ++k) {
    for (std::size_t j = 0; j < m.cols(); ++j) t.at(j / out_w, j % out_w, k) = m(k, j);
  }
  return t;
}

template <typename T>
Matrix<T> tensor_to_conv_matrix(const Tensor3<T>& t) {
  Matrix<T> m(t.channels(), t.height() * t.width());
  for (std::size_t y = 0; y < t.height(); ++y) {
    for (std::size_t x = 0; x < t.width(); ++x) {
      for (std::size_t c = 0; c < t.channels(); ++c) m(c, y * t.width() + x) = t.at(y, x, c);
    }
  }
  return m;
}

#define CDC_INSTANTIATE(T)                                                                 \
  template class Matrix<T>;                                                                \
  template class Tensor3<T>;                                                               \
  template class Tensor4<T>;                                                               \
  template Matrix<T> gemm(const Matrix<T>&, const Matrix<T>&);                             \
  template Matrix<T> im2col(const Tensor3<T>&, const ConvGeometry&);                       \
  template Matrix<T> unroll_filters(const Tensor4<T>&);                                    \
  template Matrix<T> affine_activate(const Matrix<T>&, std::span<const T>, ActivationKind); \
  template Matrix<T> activate(Matrix<T>, ActivationKind);                                  \
  template Matrix<T> add(const Matrix<T>&, const Matrix<T>&);                              \
  template Matrix<T> subtract(const Matrix<T>&, const Matrix<T>&);                         \
  template Matrix<T> concat_rows(std::span<const Matrix<T>>);                              \
  template Matrix<T> concat_cols(std::span<const Matrix<T>>);                              \
  template Matrix<T> slice_rows(const Matrix<T>&, Range);                                  \
  template Matrix<T> slice_cols(const Matrix<T>&, Range);                                  \
  template Matrix<T> pad_rows(const Matrix<T>&, std::size_t);                              \
  template double max_relative_error(std::span<const T>, std::span<const T>);              \
  template Tensor3<T> conv_matrix_to_tensor(const Matrix<T>&, std::size_t, std::size_t);   \
  template Matrix<T> tensor_to_conv_matrix(const Tensor3<T>&);

CDC_INSTANTIATE(float)
CDC_INSTANTIATE(double)

#undef CDC_INSTANTIATE

}  // namespace cdc
