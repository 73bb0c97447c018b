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

#include "chunkstream/chunk_attention.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

void expect_dims(const Tensor& t, std::vector<std::size_t> dims,
                 const char* name) {
  if (t.dims() != dims) {
    throw ShapeError(std::string("attention weight ") + name + " has shape " +
                     t.shape_string());
  }
}

Tensor project(const Tensor& x, const Tensor& w) {
  if (x.rows() == 0) return Tensor({0, w.cols()});
  return matmul(x, w);
}

Tensor last_rows(const Tensor& x, std::size_t n) {
  n = std::min(n, x.rows());
  return slice_rows(x, x.rows() - n, x.rows());
}

Tensor feed_forward(const Tensor& h, const AttentionLayerWeights& w) {
  if (h.rows() == 0) return h;
  Tensor inner = matmul(h, w.ffn_w1);
  add_row_bias(inner, w.ffn_b1);
  activation_inplace(inner, Activation::kRelu);
  Tensor out = matmul(inner, w.ffn_w2);
  add_row_bias(out, w.ffn_b2);
  add_inplace(out, h);
  return layer_norm(out, w.ffn_norm_gamma, w.ffn_norm_beta);
}

Tensor stack_memory(const std::deque<Tensor>& bank, std::size_t d) {
  Tensor m({bank.size(), d});
  for (std::size_t i = 0; i < bank.size(); ++i) {
    std::copy(bank[i].storage().begin(), bank[i].storage().end(),
              m.row(i).begin());
  }
  return m;
}

}  // namespace

void ChunkConfig::validate() const {
  if (chunk_size == 0) throw ConfigError("chunk_size must be >= 1");
  if (num_layers == 0) throw ConfigError("num_layers must be >= 1");
  if (hidden == 0 || ffn_hidden == 0) throw ConfigError("hidden sizes must be positive");
  if (num_heads == 0 || hidden % num_heads != 0) {
    throw ConfigError("hidden " + std::to_string(hidden) +
                      " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (smooth_kernel == 0) throw ConfigError("smooth_kernel must be >= 1");
}

void AttentionLayerWeights::validate(const ChunkConfig& cfg) const {
  const std::size_t d = cfg.hidden, f = cfg.ffn_hidden;
  expect_dims(w_q, {d, d}, "w_q");
  expect_dims(w_k, {d, d}, "w_k");
  expect_dims(w_v, {d, d}, "w_v");
  expect_dims(w_out, {d, d}, "w_out");
  expect_dims(attn_norm_gamma, {d}, "attn_norm_gamma");
  expect_dims(attn_norm_beta, {d}, "attn_norm_beta");
  expect_dims(ffn_w1, {d, f}, "ffn_w1");
  expect_dims(ffn_b1, {f}, "ffn_b1");
  expect_dims(ffn_w2, {f, d}, "ffn_w2");
  expect_dims(ffn_b2, {d}, "ffn_b2");
  expect_dims(ffn_norm_gamma, {d}, "ffn_norm_gamma");
  expect_dims(ffn_norm_beta, {d}, "ffn_norm_beta");
  if (cfg.smooth_layer) {
    for (const ConvLayer* c : {&smooth.conv1, &smooth.conv2}) {
      c->validate();
      if (c->spec.in_channels != d || c->spec.out_channels != d ||
          c->spec.transposed) {
        throw ShapeError("smooth conv must map d -> d");
      }
    }
    expect_dims(smooth.norm1_gamma, {d}, "smooth.norm1_gamma");
    expect_dims(smooth.norm1_beta, {d}, "smooth.norm1_beta");
    expect_dims(smooth.norm2_gamma, {d}, "smooth.norm2_gamma");
    expect_dims(smooth.norm2_beta, {d}, "smooth.norm2_beta");
  }
}

DecoderState init_decoder_state(const ChunkConfig& cfg) {
  cfg.validate();
  DecoderState state;
  state.layers.resize(cfg.num_layers);
  for (LayerCache& layer : state.layers) {
    layer.left_keys = Tensor({0, cfg.hidden});
    layer.left_values = Tensor({0, cfg.hidden});
  }
  return state;
}

Tensor attention_probs(const Tensor& q, const Tensor& k,
                       std::size_t num_heads) {
  const std::size_t d = q.cols(), nq = q.rows(), nk = k.rows();
  if (k.cols() != d || d % num_heads != 0) {
    throw ShapeError("attention: query/key widths disagree");
  }
  const std::size_t dh = d / num_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Tensor scores({num_heads, nq, nk});
  for (std::size_t h = 0; h < num_heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      const float* qi = q.data() + i * d + h * dh;
      for (std::size_t j = 0; j < nk; ++j) {
        const float* kj = k.data() + j * d + h * dh;
        double dot = 0.0;
        for (std::size_t e = 0; e < dh; ++e) dot += double(qi[e]) * kj[e];
        scores.at(h, i, j) = static_cast<float>(dot * scale);
      }
    }
  }
  return softmax(scores, 2);
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v,
              const Tensor& w_out, std::size_t num_heads) {
  const std::size_t d = q.cols(), nq = q.rows(), nk = k.rows();
  if (v.rows() != nk || v.cols() != d) {
    throw ShapeError("attention: value shape " + v.shape_string());
  }
  const Tensor probs = attention_probs(q, k, num_heads);
  const std::size_t dh = d / num_heads;
  Tensor ctx({nq, d});
  for (std::size_t h = 0; h < num_heads; ++h) {
    for (std::size_t i = 0; i < nq; ++i) {
      float* out = ctx.data() + i * d + h * dh;
      for (std::size_t j = 0; j < nk; ++j) {
        const float p = probs.at(h, i, j);
        const float* vj = v.data() + j * d + h * dh;
        for (std::size_t e = 0; e < dh; ++e) out[e] += p * vj[e];
      }
    }
  }
  return matmul(ctx, w_out);
}

Tensor summary_vector(const Tensor& chunk) {
  if (chunk.rank() != 2 || chunk.rows() == 0) {
    throw ShapeError("summary_vector: empty chunk");
  }
  return mean_rows(chunk);
}

ChunkLayerOutput chunk_attention_layer(const Tensor& body, const Tensor& right,
                                       std::size_t chunk_index,
                                       LayerCache& cache,
                                       const AttentionLayerWeights& w,
                                       const ChunkConfig& cfg) {
  if (chunk_index != cache.chunks_done) {
    throw SequenceError("chunk_attention_layer: got chunk " +
                        std::to_string(chunk_index) + ", expected " +
                        std::to_string(cache.chunks_done));
  }
  const std::size_t d = cfg.hidden;
  if (body.rank() != 2 || body.cols() != d || body.rows() == 0) {
    throw ShapeError("chunk_attention_layer: body must be [n x d], n >= 1");
  }
  if (right.rank() != 2 || right.cols() != d) {
    throw ShapeError("chunk_attention_layer: right context must be [r x d]");
  }
  const std::size_t nc = body.rows(), nr = right.rows();

  const Tensor joint_parts[] = {body, right};
  const Tensor normed = layer_norm(concat_rows(joint_parts),
                                   w.attn_norm_gamma, w.attn_norm_beta);

  const Tensor memory = stack_memory(cache.memory, d);
  const Tensor key_body = project(body, w.w_k);
  const Tensor value_body = project(body, w.w_v);
  const Tensor key_parts[] = {project(memory, w.w_k), cache.left_keys,
                              key_body, project(right, w.w_k)};
  const Tensor value_parts[] = {project(memory, w.w_v), cache.left_values,
                                value_body, project(right, w.w_v)};
  const Tensor keys = concat_rows(key_parts);
  const Tensor values = concat_rows(value_parts);

  // Queries: normalized body rows, normalized right rows, then the summary.
  const Tensor summary = summary_vector(body).reshaped({1, d});
  const Tensor query_parts[] = {normed, summary};
  const Tensor queries = matmul(concat_rows(query_parts), w.w_q);
  const Tensor attended = attend(queries, keys, values, w.w_out, cfg.num_heads);

  Tensor h_body = slice_rows(attended, 0, nc);
  add_inplace(h_body, body);
  Tensor h_right = slice_rows(attended, nc, nc + nr);
  add_inplace(h_right, right);

  ChunkLayerOutput out;
  out.memory = Tensor({d});
  std::copy(attended.row(nc + nr).begin(), attended.row(nc + nr).end(),
            out.memory.values().begin());
  out.body = feed_forward(h_body, w);
  out.right = feed_forward(h_right, w);

  const Tensor lk[] = {cache.left_keys, key_body};
  const Tensor lv[] = {cache.left_values, value_body};
  cache.left_keys = last_rows(concat_rows(lk), cfg.left_context);
  cache.left_values = last_rows(concat_rows(lv), cfg.left_context);
  ++cache.chunks_done;
  return out;
}

Tensor causal_smooth_layer(const Tensor& chunk, SmoothState& state,
                           const SmoothLayerWeights& w) {
  if (chunk.rows() == 0) return chunk;
  Tensor h = transpose(causal_conv1d_step(state.conv1, transpose(chunk), w.conv1));
  h = layer_norm(h, w.norm1_gamma, w.norm1_beta);
  h = transpose(causal_conv1d_step(state.conv2, transpose(h), w.conv2));
  return layer_norm(h, w.norm2_gamma, w.norm2_beta);
}

Tensor causal_smooth_offline(const Tensor& frames, const SmoothLayerWeights& w) {
  if (frames.rows() == 0) return frames;
  Tensor h = transpose(causal_conv1d_offline(transpose(frames), w.conv1));
  h = layer_norm(h, w.norm1_gamma, w.norm1_beta);
  h = transpose(causal_conv1d_offline(transpose(h), w.conv2));
  return layer_norm(h, w.norm2_gamma, w.norm2_beta);
}

ChunkStreamDecoder::ChunkStreamDecoder(
    const ChunkConfig& cfg, std::span<const AttentionLayerWeights> weights)
    : cfg_(cfg), weights_(weights), state_(init_decoder_state(cfg)),
      buffer_({0, cfg.hidden}) {
  if (weights.size() != cfg.num_layers) {
    throw ConfigError("decoder: expected " + std::to_string(cfg.num_layers) +
                      " layers of weights, got " +
                      std::to_string(weights.size()));
  }
  for (const auto& w : weights) w.validate(cfg);
}

std::size_t ChunkStreamDecoder::frames_needed() const {
  const std::size_t want = cfg_.chunk_size + cfg_.right_context;
  return want > buffer_.rows() ? want - buffer_.rows() : 0;
}

std::vector<Tensor> ChunkStreamDecoder::push(const Tensor& frames) {
  if (frames.rank() != 2 || frames.cols() != cfg_.hidden) {
    throw ShapeError("decoder: frames must be [T x hidden], got " +
                     frames.shape_string());
  }
  const Tensor parts[] = {buffer_, frames};
  buffer_ = concat_rows(parts);
  std::vector<Tensor> emitted;
  const std::size_t c = cfg_.chunk_size, r = cfg_.right_context;
  while (buffer_.rows() >= c + r) {
    emitted.push_back(process_chunk(slice_rows(buffer_, 0, c),
                                    slice_rows(buffer_, c, c + r)));
    buffer_ = slice_rows(buffer_, c, buffer_.rows());
  }
  return emitted;
}

std::vector<Tensor> ChunkStreamDecoder::finish() {
  std::vector<Tensor> emitted;
  const std::size_t c = cfg_.chunk_size, r = cfg_.right_context;
  while (buffer_.rows() > 0) {
    const std::size_t n = std::min(c, buffer_.rows());
    const std::size_t rn = std::min(r, buffer_.rows() - n);
    emitted.push_back(process_chunk(slice_rows(buffer_, 0, n),
                                    slice_rows(buffer_, n, n + rn)));
    buffer_ = slice_rows(buffer_, n, buffer_.rows());
  }
  return emitted;
}

Tensor ChunkStreamDecoder::process_chunk(const Tensor& body,
                                         const Tensor& right) {
  const std::size_t index = state_.chunk_index;
  Tensor c = body, r = right;
  std::vector<Tensor> produced_memory;
  for (std::size_t n = 0; n < cfg_.num_layers; ++n) {
    LayerCache& cache = state_.layers[n];
    ChunkLayerOutput out =
        chunk_attention_layer(c, r, index, cache, weights_[n], cfg_);
    c = std::move(out.body);
    r = std::move(out.right);
    if (cfg_.smooth_layer) {
      const SmoothLayerWeights& sw = weights_[n].smooth;
      // The right context continues from the committed body state but must
      // not advance it.
      c = causal_smooth_layer(c, cache.smooth, sw);
      SmoothState lookahead = cache.smooth;
      r = causal_smooth_layer(r, lookahead, sw);
    }
    produced_memory.push_back(std::move(out.memory));
  }
  // m produced by layer n feeds layer n+1 of the next chunk.
  if (cfg_.memory_slots > 0) {
    for (std::size_t n = 0; n + 1 < cfg_.num_layers; ++n) {
      auto& bank = state_.layers[n + 1].memory;
      bank.push_back(std::move(produced_memory[n]));
      while (bank.size() > cfg_.memory_slots) bank.pop_front();
    }
  }
  ++state_.chunk_index;
  return c;
}

DecodeResult chunkstream_decode(const Tensor& frames, const ChunkConfig& cfg,
                                std::span<const AttentionLayerWeights> weights) {
  ChunkStreamDecoder decoder(cfg, weights);
  std::vector<Tensor> chunks = decoder.push(frames);
  for (Tensor& t : decoder.finish()) chunks.push_back(std::move(t));
  DecodeResult result;
  result.chunks = chunks.size();
  result.output = chunks.empty() ? Tensor({0, cfg.hidden}) : concat_rows(chunks);
  return result;
}

Tensor full_attention_oracle(const Tensor& frames, const ChunkConfig& cfg,
                             std::span<const AttentionLayerWeights> weights) {
  cfg.validate();
  const std::size_t d = cfg.hidden, heads = cfg.num_heads, dh = d / heads;
  const std::size_t len = frames.rows();
  if (frames.rank() != 2 || frames.cols() != d) {
    throw ShapeError("full_attention_oracle: frames must be [T x hidden]");
  }
  if (len == 0) return frames;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Tensor x = frames;
  for (const AttentionLayerWeights& w : weights) {
    const Tensor q = matmul(layer_norm(x, w.attn_norm_gamma, w.attn_norm_beta),
                            w.w_q);
    const Tensor k = matmul(x, w.w_k);
    const Tensor v = matmul(x, w.w_v);
    Tensor ctx({len, d});
    std::vector<float> row(len);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < len; ++i) {
        float mx = -INFINITY;
        for (std::size_t j = 0; j < len; ++j) {
          double dot = 0.0;
          for (std::size_t e = 0; e < dh; ++e) {
            dot += double(q.at(i, h * dh + e)) * k.at(j, h * dh + e);
          }
          row[j] = static_cast<float>(dot * scale);
          mx = std::max(mx, row[j]);
        }
        double total = 0.0;
        for (float& s : row) {
          s = std::exp(s - mx);
          total += s;
        }
        for (std::size_t j = 0; j < len; ++j) {
          const float p = static_cast<float>(row[j] / total);
          for (std::size_t e = 0; e < dh; ++e) {
            ctx.at(i, h * dh + e) += p * v.at(j, h * dh + e);
          }
        }
      }
    }
    Tensor h = matmul(ctx, w.w_out);
    add_inplace(h, x);
    x = feed_forward(h, w);
    if (cfg.smooth_layer) x = causal_smooth_offline(x, w.smooth);
  }
  return x;
}

}  // namespace chunkstream
