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

#ifndef CHUNKSTREAM_VOCODER_H_
#define CHUNKSTREAM_VOCODER_H_

#include <cstddef>
#include <string>
#include <vector>

#include "chunkstream/causal_conv.h"
#include "chunkstream/tensor.h"

namespace chunkstream {

struct GeneratorConfig {
  std::vector<std::size_t> upsample_strides = {8, 8, 4, 2};
  std::vector<std::size_t> upsample_kernels = {16, 16, 8, 4};
  std::vector<std::size_t> resblock_kernels = {3, 7, 11};
  std::vector<std::vector<std::size_t>> resblock_dilations = {
      {1, 3, 5}, {1, 3, 5}, {1, 3, 5}};
  std::size_t base_channels = 64;
  std::size_t latent_dim = 192;
  std::size_t pre_kernel = 7;
  std::size_t post_kernel = 7;
  // Natural padding feeds real (or replicated input) history through unpadded
  // layers; otherwise every layer pads its own left context.
  bool natural_padding = true;
  PadMode fallback_pad = PadMode::kReplicate;

  void validate() const;
  std::size_t hop() const;
  // Channels after upsampling stage i: base / 2^(i+1), at least 1.
  std::size_t stage_channels(std::size_t stage) const;
};

// Strides [8,8,4,2] (hop 512) or [8,8,2,2] (hop 256), kernels 2 x stride.
GeneratorConfig generator_config_for_hop(std::size_t hop);

std::vector<ParamShape> generator_param_shapes(const GeneratorConfig& cfg);

// lrelu -> conv(k, d) -> lrelu -> conv(k, 1), added to its input.
struct ResUnit {
  ConvLayer dilated;
  ConvLayer plain;
};

struct ResBlock {
  std::vector<ResUnit> units;
};

struct UpStage {
  ConvLayer up;
  std::vector<ResBlock> blocks;  // averaged (multi-receptive-field fusion)
};

// pre-conv -> [lrelu -> tconv -> MRF] x stages -> lrelu -> post-conv -> tanh.
struct GeneratorGraph {
  GeneratorConfig cfg;
  ConvLayer pre;
  std::vector<UpStage> stages;
  ConvLayer post;

  // Filled by build_generator. A natural-mode pass over L frames yields
  // L * hop - consumption samples; block_skip[i][b] is how many frames block b
  // of stage i runs ahead of the slowest block of that stage.
  std::size_t consumption = 0;
  std::vector<std::vector<std::size_t>> block_skip;

  // Input frames prepended in natural mode, ceil(consumption / hop).
  std::size_t history_frames() const;
};

GeneratorGraph build_generator(const GeneratorConfig& cfg,
                               const TensorMap& params);

// z is [d_z x T], T >= 1; returns T * hop samples in (-1, 1).
Tensor generator_offline(const Tensor& z, const GeneratorGraph& graph);

struct UnitState {
  ConvState dilated;
  ConvState plain;
  std::size_t skip = 0;  // residual frames still to drop (natural mode)
};

struct BlockState {
  std::vector<UnitState> units;
  std::size_t skip = 0;
};

struct StageState {
  ConvState up;
  std::vector<BlockState> blocks;
};

struct GeneratorState {
  ConvState pre;
  std::vector<StageState> stages;
  ConvState post;
  std::size_t chunks = 0;
  bool started = false;     // history frames have been fed
  std::size_t discard = 0;  // leading samples still owed to the history
};

GeneratorState init_generator_state(const GeneratorGraph& graph);

// Streams a [d_z x n] chunk and returns exactly n * hop samples. Chunks must
// arrive with consecutive indices starting at 0.
Tensor generator_stream(GeneratorState& state, const Tensor& z_chunk,
                        const GeneratorGraph& graph, std::size_t chunk_index);

// Waveform for frames [start, start + len) computed from that slice alone.
// Natural padding gives it the real preceding frames of z as history (or
// replicated z[:, 0] near the start); padded graphs see only the slice and pad
// at its left edge.
Tensor generator_slice(const Tensor& z, std::size_t start, std::size_t len,
                       const GeneratorGraph& graph);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_VOCODER_H_
