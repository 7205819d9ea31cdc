// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices, HWC tensors, and the convolution-to-GEMM
// lowering (im2col) that every split and code in this library is defined on.
//
// Element types: float and double are explicitly instantiated in matrix.cpp.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "cdc/errors.hpp"

namespace cdc {

enum class ActivationKind : std::uint8_t { Identity, ReLU };

// Half-open index interval [begin, end).
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return end <= begin; }
  bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  friend bool operator==(const Range&, const Range&) = default;
};

template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);
  static Matrix from_rows(std::initializer_list<std::initializer_list<T>> rows);
  static Matrix identity(std::size_t n);
  // Column vector (k x 1) over the given values.
  static Matrix column(std::span<const T> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> data_;
};

// Height x width x channels, channel innermost: (y, x, c) at ((y*W)+x)*C + c.
template <typename T>
class Tensor3 {
 public:
  Tensor3(std::size_t height, std::size_t width, std::size_t channels);
  Tensor3(std::size_t height, std::size_t width, std::size_t channels, std::vector<T> data);

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * w_ + x) * c_ + c]; }
  const T& at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * w_ + x) * c_ + c];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t h_;
  std::size_t w_;
  std::size_t c_;
  std::vector<T> data_;
};

// K square filters, each F x F x C stored in Tensor3 layout, back to back.
template <typename T>
class Tensor4 {
 public:
  Tensor4(std::size_t filter, std::size_t channels, std::size_t filters);
  Tensor4(std::size_t filter, std::size_t channels, std::size_t filters, std::vector<T> data);

  std::size_t filter() const noexcept { return f_; }
  std::size_t channels() const noexcept { return c_; }
  std::size_t filters() const noexcept { return k_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(std::size_t k, std::size_t y, std::size_t x, std::size_t c) {
    return data_[((k * f_ + y) * f_ + x) * c_ + c];
  }
  const T& at(std::size_t k, std::size_t y, std::size_t x, std::size_t c) const {
    return data_[((k * f_ + y) * f_ + x) * c_ + c];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t f_;
  std::size_t c_;
  std::size_t k_;
  std::vector<T> data_;
};

struct ConvGeometry {
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t in_c = 1;
  std::size_t filter = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t filters = 1;

  // Throws InvalidGeometry when any output dimension would be < 1.
  void validate() const;
  std::size_t out_h() const;
  std::size_t out_w() const;
  std::size_t patch_size() const noexcept { return filter * filter * in_c; }

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

// floor((i - f + 2p) / s) + 1.
std::size_t conv_output_dim(std::size_t i, std::size_t f, std::size_t p, std::size_t s);

template <typename T>
Matrix<T> gemm(const Matrix<T>& a, const Matrix<T>& b);

// Returns an (F*F*C) x (Ho*Wo) matrix. Column j = oy*Wo + ox holds the patch
// for that output position, ordered (dy, dx, c) with c innermost; reads
// outside the input are zero.
template <typename T>
Matrix<T> im2col(const Tensor3<T>& input, const ConvGeometry& geom);

// K x (F*F*C); row k is filter k in im2col column order.
template <typename T>
Matrix<T> unroll_filters(const Tensor4<T>& filters);

// act(m[i][j] + bias[i]).
template <typename T>
Matrix<T> affine_activate(const Matrix<T>& m, std::span<const T> bias, ActivationKind act);

template <typename T>
Matrix<T> activate(Matrix<T> m, ActivationKind act);

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> concat_rows(std::span<const Matrix<T>> parts);

template <typename T>
Matrix<T> concat_cols(std::span<const Matrix<T>> parts);

template <typename T>
Matrix<T> slice_rows(const Matrix<T>& m, Range rows);

template <typename T>
Matrix<T> slice_cols(const Matrix<T>& m, Range cols);

// Appends zero rows up to `rows`; no-op when already that tall.
template <typename T>
Matrix<T> pad_rows(const Matrix<T>& m, std::size_t rows);

// max |a - b| / max(max |b|, tiny). Shapes must match.
template <typename T>
double max_relative_error(std::span<const T> a, std::span<const T> b);

template <typename T>
double max_relative_error(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("max_relative_error: shape mismatch");
  }
  return max_relative_error<T>(a.data(), b.data());
}

// K x (Ho*Wo) conv output matrix <-> Ho x Wo x K tensor.
template <typename T>
Tensor3<T> conv_matrix_to_tensor(const Matrix<T>& m, std::size_t out_h, std::size_t out_w);

template <typename T>
Matrix<T> tensor_to_conv_matrix(const Tensor3<T>& t);

// Multiply-add count of a GEMM of the given shape, counted as 2*m*k*n.
inline std::uint64_t gemm_flops(std::size_t m, std::size_t k, std::size_t n) {
  return 2ull * m * k * n;
}

}  // namespace cdc
