// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "cdc/matrix.hpp"
#include "oracles.hpp"

namespace cdc {
namespace {

using testing::naive_matmul;
using testing::pick;
using testing::random_matrix;
using testing::random_tensor;
using testing::Rng;

TEST(Matrix, FromRowsAndIndexing) {
  const auto m = Matrix<double>::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_THROW(Matrix<double>(2, 2, {1, 2, 3}), DimensionMismatch);
}

TEST(Matrix, GemmSmallExample) {
  const auto a = Matrix<double>::from_rows({{1, 2}, {3, 4}});
  const auto b = Matrix<double>::from_rows({{5, 6}, {7, 8}});
  EXPECT_EQ(gemm(a, b), Matrix<double>::from_rows({{19, 22}, {43, 50}}));
  EXPECT_EQ(gemm(a, Matrix<double>::identity(2)), a);
}

TEST(Matrix, GemmMatchesTripleLoop) {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto m = pick(rng, 1, 70), k = pick(rng, 1, 70), n = pick(rng, 1, 70);
    const auto a = random_matrix<double>(rng, m, k);
    const auto b = random_matrix<double>(rng, k, n);
    EXPECT_LT(max_relative_error(gemm(a, b), naive_matmul(a, b)), 1e-12) << m << "x" << k << "x" << n;
  }
}

TEST(Matrix, GemmRejectsInnerMismatch) {
  EXPECT_THROW(gemm(Matrix<float>(2, 3), Matrix<float>(2, 3)), DimensionMismatch);
}

TEST(Matrix, GemmFloatTolerance) {
  Rng rng(3);
  const auto a = random_matrix<float>(rng, 64, 256);
  const auto b = random_matrix<float>(rng, 256, 33);
  EXPECT_LT(max_relative_error(gemm(a, b), naive_matmul(a, b)), 1e-5);
}

TEST(Matrix, ConvOutputDim) {
  EXPECT_EQ(conv_output_dim(224, 11, 2, 4), 55u);
  EXPECT_EQ(conv_output_dim(5, 3, 1, 1), 5u);
  EXPECT_EQ(conv_output_dim(5, 3, 0, 2), 2u);
  EXPECT_THROW(conv_output_dim(2, 5, 0, 1), InvalidGeometry);
  EXPECT_THROW(conv_output_dim(5, 3, 0, 0), InvalidGeometry);
}

TEST(Matrix, Im2colLayout) {
  // 2x2x1 input, 2x2 filter, no padding: one column with the whole input.
  Tensor3<double> x(2, 2, 1, {1, 2, 3, 4});
  ConvGeometry g{2, 2, 1, 2, 1, 0, 1};
  const auto cols = im2col(x, g);
  ASSERT_EQ(cols.rows(), 4u);
  ASSERT_EQ(cols.cols(), 1u);
  EXPECT_EQ(cols.values(), (std::vector<double>{1, 2, 3, 4}));

  // Padding reads zero.
  ConvGeometry gp{2, 2, 1, 3, 1, 1, 1};
  const auto padded = im2col(x, gp);
  EXPECT_EQ(padded.rows(), 9u);
  EXPECT_EQ(padded.cols(), 4u);
  EXPECT_EQ(padded(0, 0), 0.0);
  EXPECT_EQ(padded(4, 0), 1.0);  // centre of the first patch
}

TEST(Matrix, Im2colGemmEqualsDirectConvolution) {
  Rng rng(5);
  for (int trial = 0; trial < 80; ++trial) {
    const auto layer = testing::random_conv(rng);
    auto g = layer.conv().geometry;
    const auto x = random_tensor<double>(rng, g.in_h, g.in_w, g.in_c);
    Tensor4<double> w(g.filter, g.in_c, g.filters, testing::random_values<double>(rng, g.filters * g.patch_size()));
    const auto y = gemm(unroll_filters(w), im2col(x, g));
    const auto got = conv_matrix_to_tensor(y, g.out_h(), g.out_w());
    const auto want = testing::direct_conv(x, w, {}, g.stride, g.padding, ActivationKind::Identity);
    ASSERT_EQ(got.height(), want.height());
    ASSERT_EQ(got.width(), want.width());
    EXPECT_LT(testing::rel_error(got.data(), want.data()), 1e-12);
  }
}

TEST(Matrix, Im2colRejectsMismatchedInput) {
  ConvGeometry g{4, 4, 2, 3, 1, 0, 1};
  EXPECT_THROW(im2col(Tensor3<float>(4, 4, 3), g), InvalidGeometry);
}

TEST(Matrix, ConvMatrixTensorRoundTrip) {
  Rng rng(9);
  const auto t = random_tensor<float>(rng, 3, 5, 4);
  EXPECT_EQ(conv_matrix_to_tensor(tensor_to_conv_matrix(t), 3, 5), t);
}

TEST(Matrix, AffineActivate) {
  const auto m = Matrix<double>::from_rows({{-1, 2}, {3, -4}});
  const std::vector<double> bias{1, -10};
  EXPECT_EQ(affine_activate<double>(m, bias, ActivationKind::ReLU), Matrix<double>::from_rows({{0, 3}, {0, 0}}));
  EXPECT_EQ(affine_activate<double>(m, std::vector<double>{0, 0}, ActivationKind::Identity), m);
  EXPECT_THROW(affine_activate<double>(m, std::vector<double>{1}, ActivationKind::Identity), DimensionMismatch);
}

TEST(Matrix, AddSubtractInverse) {
  Rng rng(1);
  const auto a = random_matrix<double>(rng, 5, 7);
  const auto b = random_matrix<double>(rng, 5, 7);
  EXPECT_LT(max_relative_error(subtract(add(a, b), b), a), 1e-15);
  EXPECT_THROW(add(a, Matrix<double>(7, 5)), DimensionMismatch);
}

TEST(Matrix, ConcatSliceRoundTrip) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rows = pick(rng, 2, 20), cols = pick(rng, 2, 20);
    const auto m = random_matrix<float>(rng, rows, cols);
    const auto cut = pick(rng, 1, rows - 1);
    const std::vector<Matrix<float>> r{slice_rows(m, {0, cut}), slice_rows(m, {cut, rows})};
    EXPECT_EQ(concat_rows<float>(r), m);
    const auto ccut = pick(rng, 1, cols - 1);
    const std::vector<Matrix<float>> c{slice_cols(m, {0, ccut}), slice_cols(m, {ccut, cols})};
    EXPECT_EQ(concat_cols<float>(c), m);
  }
  EXPECT_THROW(slice_rows(Matrix<float>(2, 2), {1, 3}), DimensionMismatch);
}

TEST(Matrix, PadRows) {
  const auto m = Matrix<double>::from_rows({{1, 2}});
  const auto p = pad_rows(m, 3);
  EXPECT_EQ(p.rows(), 3u);
  EXPECT_EQ(p(0, 1), 2.0);
  EXPECT_EQ(p(2, 0), 0.0);
  EXPECT_EQ(pad_rows(m, 1), m);
}

TEST(Matrix, MaxRelativeError) {
  const std::vector<double> a{1, 2, 3}, b{1, 2, 4};
  EXPECT_DOUBLE_EQ(max_relative_error<double>(a, b), 0.25);
  EXPECT_EQ(max_relative_error<double>(a, a), 0.0);
}

}  // namespace
}  // namespace cdc
