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

#ifndef CHUNKSTREAM_CHUNK_ATTENTION_H_
#define CHUNKSTREAM_CHUNK_ATTENTION_H_

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "chunkstream/causal_conv.h"
#include "chunkstream/tensor.h"

namespace chunkstream {

struct ChunkConfig {
  std::size_t chunk_size = 20;
  std::size_t left_context = 10;
  std::size_t right_context = 4;
  std::size_t num_layers = 4;
  std::size_t hidden = 192;
  std::size_t ffn_hidden = 768;
  std::size_t num_heads = 2;
  std::size_t memory_slots = 4;
  std::size_t smooth_kernel = 3;
  bool smooth_layer = true;

  void validate() const;
};

// Two causal convolutions (stride 1, replicate start padding), each followed
// by a layer norm. Operates on [T x d] frames.
struct SmoothLayerWeights {
  ConvLayer conv1;
  ConvLayer conv2;
  Tensor norm1_gamma, norm1_beta;
  Tensor norm2_gamma, norm2_beta;
};

// Projections multiply row vectors from the right: q = x * w_q.
struct AttentionLayerWeights {
  Tensor w_q, w_k, w_v, w_out;          // [d x d]
  Tensor attn_norm_gamma, attn_norm_beta;  // [d]
  Tensor ffn_w1, ffn_b1;                // [d x f], [f]
  Tensor ffn_w2, ffn_b2;                // [f x d], [d]
  Tensor ffn_norm_gamma, ffn_norm_beta;    // [d]
  SmoothLayerWeights smooth;

  void validate(const ChunkConfig& cfg) const;
};

struct SmoothState {
  ConvState conv1;
  ConvState conv2;
};

// Carried per-layer state between chunks.
struct LayerCache {
  Tensor left_keys;           // [<= left_context x d], W_k C of past chunks
  Tensor left_values;         // [<= left_context x d]
  std::deque<Tensor> memory;  // bank of [d] vectors, oldest first
  SmoothState smooth;
  std::size_t chunks_done = 0;
};

struct DecoderState {
  std::vector<LayerCache> layers;
  std::size_t chunk_index = 0;
};

DecoderState init_decoder_state(const ChunkConfig& cfg);

// Per-head attention probabilities softmax(Q_h K_h^T / sqrt(d/heads)) as a
// [heads x nq x nk] tensor.
Tensor attention_probs(const Tensor& q, const Tensor& k,
                       std::size_t num_heads);

// Multi-head attention followed by the output projection.
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v,
              const Tensor& w_out, std::size_t num_heads);

// Arithmetic mean of a chunk over its frames.
Tensor summary_vector(const Tensor& chunk);

struct ChunkLayerOutput {
  Tensor body;     // C_{i}^{n+1}
  Tensor right;    // R_{i}^{n+1}
  Tensor memory;   // m_{i}^{n+1}, [d]
};

// One streaming attention layer for chunk `chunk_index`:
//   [C^, R^] = LN([C, R])
//   K = [W_k M, K_L, W_k C, W_k R],  V likewise
//   h_C = Attn(W_q C^, K, V) + C,    h_R = Attn(W_q R^, K, V) + R
//   m   = Attn(W_q mean(C), K, V)
//   C' = FFN(h_C), R' = FFN(h_R)
// with FFN(h) = LN(h + W_2 relu(W_1 h + b_1) + b_2). The cache's left K/V are
// replaced by the trailing left_context rows of [K_L, W_k C]. The memory bank
// is read but not written; routing m to the next layer is the caller's job.
ChunkLayerOutput chunk_attention_layer(const Tensor& body, const Tensor& right,
                                       std::size_t chunk_index,
                                       LayerCache& cache,
                                       const AttentionLayerWeights& w,
                                       const ChunkConfig& cfg);

// Streams one chunk through the smooth layer and commits the state.
Tensor causal_smooth_layer(const Tensor& chunk, SmoothState& state,
                           const SmoothLayerWeights& w);
Tensor causal_smooth_offline(const Tensor& frames, const SmoothLayerWeights& w);

// Incremental decoder. Frames are pushed as they become available; a chunk is
// emitted once its body and right context have arrived. finish() flushes the
// tail, where right contexts are truncated at the end of the sequence.
// The weights must outlive the decoder.
class ChunkStreamDecoder {
 public:
  ChunkStreamDecoder(const ChunkConfig& cfg,
                     std::span<const AttentionLayerWeights> weights);

  std::vector<Tensor> push(const Tensor& frames);
  std::vector<Tensor> finish();

  const DecoderState& state() const { return state_; }
  std::size_t chunks_emitted() const { return state_.chunk_index; }

  // Frames needed before the next chunk can be emitted (ignoring finish()).
  std::size_t frames_needed() const;

 private:
  Tensor process_chunk(const Tensor& body, const Tensor& right);

  ChunkConfig cfg_;
  std::span<const AttentionLayerWeights> weights_;
  DecoderState state_;
  Tensor buffer_;
};

struct DecodeResult {
  Tensor output;           // [T x d]
  std::size_t chunks = 0;  // chunks emitted
};

DecodeResult chunkstream_decode(const Tensor& frames, const ChunkConfig& cfg,
                                std::span<const AttentionLayerWeights> weights);

// Parallel decoder over the whole sequence: every layer is full
// self-attention + FFN (plus the offline smooth layer when cfg.smooth_layer).
Tensor full_attention_oracle(const Tensor& frames, const ChunkConfig& cfg,
                             std::span<const AttentionLayerWeights> weights);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_CHUNK_ATTENTION_H_
