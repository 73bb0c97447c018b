// Copyright 2026 The chunkstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chunkstream/tensor.h"

#include <cmath>
#include <limits>
#include <random>

#include "chunkstream/errors.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace chunkstream {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

TEST(MatmulTest, IdentityLeavesMatrixUnchanged) {
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, m), m);
}

TEST(MatmulTest, ZerosAnnihilate) {
  std::mt19937 rng(1);
  const Tensor out = matmul(Tensor({2, 3}), random_tensor({3, 2}, rng));
  EXPECT_EQ(out, Tensor({2, 2}));
}

TEST(MatmulTest, HandComputedProduct) {
  const Tensor out = matmul(Tensor::matrix(2, 2, {1, 2, 3, 4}),
                            Tensor::matrix(2, 1, {5, 6}));
  EXPECT_EQ(out, Tensor::matrix(2, 1, {17, 39}));
}

TEST(MatmulTest, InnerDimMismatchThrows) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(MatmulTest, AssociativeOnRandomChains) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({4, 4}, rng);
    const Tensor b = random_tensor({4, 4}, rng);
    const Tensor c = random_tensor({4, 4}, rng);
    const Tensor left = matmul(matmul(a, b), c);
    const Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max(1.0, std::abs(static_cast<double>(left[i])));
      EXPECT_LE(std::abs(left[i] - right[i]) / scale, 1e-4);
    }
  }
}

TEST(LayerNormTest, ConstantRowMapsToBeta) {
  const Tensor out = layer_norm(Tensor::matrix(1, 3, {5, 5, 5}),
                                Tensor({3}, 1.0f), Tensor({3}, 0.0f));
  EXPECT_EQ(out, Tensor::matrix(1, 3, {0, 0, 0}));
}

TEST(LayerNormTest, UnitVarianceClosedForm) {
  const Tensor out = layer_norm(Tensor::matrix(1, 2, {1, -1}),
                                Tensor({2}, 1.0f), Tensor({2}, 0.0f), 0.0f);
  EXPECT_FLOAT_EQ(out[0], 1.0f);
  EXPECT_FLOAT_EQ(out[1], -1.0f);
}

TEST(LayerNormTest, ZeroGammaGivesBeta) {
  std::mt19937 rng(3);
  const Tensor out = layer_norm(random_tensor({4, 2}, rng), Tensor({2}, 0.0f),
                                Tensor({2}, 2.0f));
  EXPECT_EQ(out, Tensor({4, 2}, 2.0f));
}

TEST(LayerNormTest, ZeroWidthThrows) {
  EXPECT_THROW(layer_norm(Tensor({2, 0}), Tensor({0}), Tensor({0})),
               ShapeError);
}

TEST(LayerNormTest, RowsAreStandardized) {
  std::mt19937 rng(11);
  const std::size_t d = 64;
  const Tensor out = layer_norm(random_tensor({32, d}, rng, 3.0f),
                                Tensor({d}, 1.0f), Tensor({d}, 0.0f));
  for (std::size_t t = 0; t < out.rows(); ++t) {
    double mean = 0.0, var = 0.0;
    for (float v : out.row(t)) mean += v;
    mean /= d;
    for (float v : out.row(t)) var += (v - mean) * (v - mean);
    var /= d;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(SoftmaxTest, SymmetricInputIsUniform) {
  const Tensor out = softmax(Tensor::vector({0, 0}), 0);
  EXPECT_FLOAT_EQ(out[0], 0.5f);
  EXPECT_FLOAT_EQ(out[1], 0.5f);
}

TEST(SoftmaxTest, LargeLogitsDoNotOverflow) {
  const Tensor out = softmax(Tensor::vector({1000, 0}), 0);
  EXPECT_FLOAT_EQ(out[0], 1.0f);
  EXPECT_NEAR(out[1], 0.0f, 1e-30);
  EXPECT_TRUE(out.all_finite());
}

TEST(SoftmaxTest, LogWeightsClosedForm) {
  const Tensor out = softmax(
      Tensor::vector({std::log(1.0f), std::log(2.0f), std::log(3.0f)}), 0);
  EXPECT_NEAR(out[0], 1.0 / 6.0, 1e-7);
  EXPECT_NEAR(out[1], 2.0 / 6.0, 1e-7);
  EXPECT_NEAR(out[2], 3.0 / 6.0, 1e-7);
}

TEST(SoftmaxTest, MaskedEntriesAreExactlyZero) {
  const float ninf = -std::numeric_limits<float>::infinity();
  const Tensor out = softmax(Tensor::matrix(1, 3, {1, ninf, 2}), 1);
  EXPECT_EQ(out[1], 0.0f);
  EXPECT_NEAR(out[0] + out[2], 1.0, 1e-7);
}

TEST(SoftmaxTest, FullyMaskedRowThrows) {
  const float ninf = -std::numeric_limits<float>::infinity();
  EXPECT_THROW(softmax(Tensor::matrix(1, 2, {ninf, ninf}), 1), DomainError);
}

TEST(SoftmaxTest, RowsSumToOneAlongEveryAxis) {
  std::mt19937 rng(5);
  const Tensor x = random_tensor({3, 5, 7}, rng, 10.0f);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Tensor out = softmax(x, axis);
    const auto& d = x.dims();
    // Sum over `axis` for every other index combination.
    for (std::size_t i = 0; i < d[0]; ++i) {
      for (std::size_t j = 0; j < d[1]; ++j) {
        for (std::size_t k = 0; k < d[2]; ++k) {
          const std::size_t idx[] = {i, j, k};
          if (idx[axis] != 0) continue;
          double sum = 0.0;
          for (std::size_t n = 0; n < d[axis]; ++n) {
            std::size_t p[] = {i, j, k};
            p[axis] = n;
            sum += out.at(p[0], p[1], p[2]);
          }
          EXPECT_NEAR(sum, 1.0, 1e-6);
        }
      }
    }
  }
}

TEST(ActivationTest, Definitions) {
  EXPECT_FLOAT_EQ(activation(Tensor::vector({-1}), Activation::kLeakyRelu)[0],
                  -0.1f);
  EXPECT_EQ(activation(Tensor::vector({0}), Activation::kTanh)[0], 0.0f);
  EXPECT_EQ(activation(Tensor::vector({-2, 3}), Activation::kRelu),
            Tensor::vector({0, 3}));
}

TEST(TensorTest, DataLengthMustMatchDims) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({1, 2}).reshaped({3}), ShapeError);
}

TEST(TensorTest, ConcatAndSliceAreInverse) {
  std::mt19937 rng(9);
  const Tensor x = random_tensor({6, 4}, rng);
  const Tensor parts[] = {slice_rows(x, 0, 2), slice_rows(x, 2, 6)};
  EXPECT_EQ(concat_rows(parts), x);
  const Tensor cols[] = {slice_cols(x, 0, 1), slice_cols(x, 1, 4)};
  EXPECT_EQ(concat_cols(cols), x);
  EXPECT_EQ(max_abs_diff(transpose(transpose(x)), x), 0.0);
}

}  // namespace
}  // namespace chunkstream
