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

#ifndef CHUNKSTREAM_TENSOR_H_
#define CHUNKSTREAM_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace chunkstream {

// Dense row-major float array of rank 1..3.
//
// Extents may be zero so that empty chunks can flow through streaming code;
// every other invariant (data length == product of dims) always holds.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);

  // 2-D convenience: Tensor::matrix(2, 2, {1, 2, 3, 4}).
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<float> values);
  static Tensor vector(std::initializer_list<float> values);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors; the tensor is viewed as rows x cols.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  const std::vector<float>& storage() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }
  float& at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  float at(std::size_t i, std::size_t j) const {
    return data_[i * dims_[1] + j];
  }
  float& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  float at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }

  std::span<float> row(std::size_t i);
  std::span<const float> row(std::size_t i) const;

  // Same data, new dims. Throws ShapeError if the element count differs.
  Tensor reshaped(std::vector<std::size_t> dims) const;

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

enum class Activation { kLeakyRelu, kTanh, kRelu };

inline constexpr float kLeakySlope = 0.1f;
inline constexpr float kNormEps = 1e-5f;

Tensor matmul(const Tensor& a, const Tensor& b);

// Per-row normalization of a [T x d] tensor followed by gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = kNormEps);

// Softmax along `axis`. Entries equal to -inf are treated as masked and come
// out as exactly 0. A fully masked slice is a DomainError.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor activation(const Tensor& x, Activation kind);
void activation_inplace(Tensor& x, Activation kind);

// Small helpers shared by the model code.
Tensor transpose(const Tensor& x);                    // rank 2
Tensor add(const Tensor& a, const Tensor& b);         // same shape
void add_inplace(Tensor& a, const Tensor& b);
void add_row_bias(Tensor& x, const Tensor& bias);     // [T x d] += [d]
Tensor concat_rows(std::span<const Tensor> parts);    // rank 2, along axis 0
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);    // rank 2, along axis 1
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor mean_rows(const Tensor& x);                    // [T x d] -> [d]

// Named parameters of a model, keyed by dotted path.
using TensorMap = std::map<std::string, Tensor>;

struct ParamShape {
  std::string name;
  std::vector<std::size_t> dims;
};

// Looks up `name` and checks its shape; throws ConfigError otherwise.
const Tensor& take_param(const TensorMap& params, const std::string& name,
                         const std::vector<std::size_t>& dims);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_TENSOR_H_
