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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + t.shape_string());
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, float fill)
    : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 3) {
    throw ShapeError("tensor rank must be 1..3");
  }
  data_.assign(product(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (dims_.empty() || dims_.size() > 3) {
    throw ShapeError("tensor rank must be 1..3");
  }
  if (data_.size() != product(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + shape_string());
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<float> values) {
  return Tensor({rows, cols}, std::vector<float>(values));
}

Tensor Tensor::vector(std::initializer_list<float> values) {
  return Tensor({values.size()}, std::vector<float>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string());
  }
  return dims_[axis];
}

std::span<float> Tensor::row(std::size_t i) {
  const std::size_t n = size() / dims_[0];
  return std::span<float>(data_).subspan(i * n, n);
}

std::span<const float> Tensor::row(std::size_t i) const {
  const std::size_t n = size() / dims_[0];
  return std::span<const float>(data_).subspan(i * n, n);
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  return Tensor(std::move(dims), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dims disagree, " + a.shape_string() +
                     " x " + b.shape_string());
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    float* o = out.data() + i * n;
    const float* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = ai[p];
      if (av == 0.0f) continue;
      const float* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * bp[j];
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  require_rank(x, 2, "layer_norm");
  const std::size_t d = x.cols();
  if (d == 0) throw ShapeError("layer_norm: feature dim is 0");
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: gamma/beta length must be " +
                     std::to_string(d));
  }
  Tensor out(x.dims());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto in = x.row(t);
    double mean = 0.0;
    for (float v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    auto o = out.row(t);
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = static_cast<float>((in[j] - mean) * inv) * gamma[j] + beta[j];
    }
  }
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& dims = x.dims();
  if (axis >= dims.size()) throw ShapeError("softmax: axis out of range");
  const std::size_t n = dims[axis];
  if (n == 0) throw ShapeError("softmax: empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];

  constexpr float kNegInf = -std::numeric_limits<float>::infinity();
  Tensor out(dims);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      float mx = kNegInf;
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      if (mx == kNegInf) {
        throw DomainError("softmax: every position of a row is masked");
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const float v = x[base + j * inner];
        const float e = v == kNegInf ? 0.0f : std::exp(v - mx);
        out[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < n; ++j) {
        out[base + j * inner] = static_cast<float>(out[base + j * inner] / sum);
      }
    }
  }
  return out;
}

void activation_inplace(Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::kLeakyRelu:
      for (float& v : x.values()) v = v < 0.0f ? v * kLeakySlope : v;
      break;
    case Activation::kTanh:
      for (float& v : x.values()) v = std::tanh(v);
      break;
    case Activation::kRelu:
      for (float& v : x.values()) v = std::max(v, 0.0f);
      break;
  }
}

Tensor activation(const Tensor& x, Activation kind) {
  Tensor out = x;
  activation_inplace(out, kind);
  return out;
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  Tensor out({x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add: " + a.shape_string() + " vs " + b.shape_string());
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void add_row_bias(Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_bias");
  if (bias.size() != x.cols()) throw ShapeError("add_row_bias: bias length");
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto r = x.row(t);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

Tensor concat_rows(std::span<const Tensor> parts) {
  std::size_t cols = 0, rows = 0;
  bool have_cols = false;
  for (const Tensor& p : parts) {
    if (p.empty() && p.rank() == 0) continue;
    require_rank(p, 2, "concat_rows");
    if (have_cols && p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch");
    }
    cols = p.cols();
    have_cols = true;
    rows += p.rows();
  }
  Tensor out({rows, cols});
  float* dst = out.data();
  for (const Tensor& p : parts) {
    dst = std::copy(p.storage().begin(), p.storage().end(), dst);
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_rows");
  if (begin > end || end > x.rows()) throw ShapeError("slice_rows: range");
  Tensor out({end - begin, x.cols()});
  std::copy(x.data() + begin * x.cols(), x.data() + end * x.cols(),
            out.data());
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  std::size_t rows = 0, cols = 0;
  bool have_rows = false;
  for (const Tensor& p : parts) {
    if (p.empty() && p.rank() == 0) continue;
    require_rank(p, 2, "concat_cols");
    if (have_rows && p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch");
    }
    rows = p.rows();
    have_rows = true;
    cols += p.cols();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    if (p.rank() == 0) continue;
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(p.data() + r * p.cols(), p.data() + (r + 1) * p.cols(),
                out.data() + r * cols + offset);
    }
    offset += p.cols();
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  if (begin > end || end > x.cols()) throw ShapeError("slice_cols: range");
  Tensor out({x.rows(), end - begin});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy(x.data() + r * x.cols() + begin, x.data() + r * x.cols() + end,
              out.data() + r * (end - begin));
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  require_rank(x, 2, "mean_rows");
  if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
  Tensor out({x.cols()});
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto r = x.row(t);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  const float inv = 1.0f / static_cast<float>(x.rows());
  for (float& v : out.values()) v *= inv;
  return out;
}

const Tensor& take_param(const TensorMap& params, const std::string& name,
                         const std::vector<std::size_t>& dims) {
  const auto it = params.find(name);
  if (it == params.end()) throw ConfigError("missing tensor " + name);
  if (it->second.dims() != dims) {
    Tensor want(dims);
    throw ConfigError("tensor " + name + " has shape " +
                      it->second.shape_string() + ", expected " +
                      want.shape_string());
  }
  return it->second;
}

}  // namespace chunkstream
