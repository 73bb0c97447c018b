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

#ifndef CHUNKSTREAM_CAUSAL_CONV_H_
#define CHUNKSTREAM_CAUSAL_CONV_H_

#include <cstddef>
#include <span>
#include <vector>

#include "chunkstream/tensor.h"

namespace chunkstream {

// How a layer fills the left context it needs at sequence start.
//   kConstant  - pad_value frames
//   kReplicate - copies of the first input frame
//   kNatural   - no padding at all; the caller supplies real history and the
//                layer only emits frames whose window is complete
enum class PadMode { kConstant, kReplicate, kNatural };

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  bool transposed = false;
  PadMode pad_mode = PadMode::kReplicate;
  float pad_value = 0.0f;

  // Throws ConfigError on an unsupported geometry: non-transposed layers must
  // have stride 1, transposed layers need kernel_size >= stride and no
  // dilation.
  void validate() const;

  // Input frames of left context a layer needs to emit its first frame:
  // dilation*(k-1) for convolutions, ceil(k/s)-1 for transposed ones.
  std::size_t history() const;

  // Output frames produced per input frame.
  std::size_t upsampling() const { return transposed ? stride : 1; }
};

// Weights use the usual layouts: [out x in x k] for convolutions and
// [in x out x k] for transposed convolutions. Bias is [out].
struct ConvLayer {
  ConvSpec spec;
  Tensor weight;
  Tensor bias;

  void validate() const;
};

// Carried state of one streaming layer.
//
// For convolutions `history` holds the trailing `spec.history()` input frames
// ([in x n], n growing from 0 in natural mode). For transposed convolutions
// `pending` holds the overlap-add partial sums ([out x (k - s)]) of output
// samples that later input frames still contribute to.
struct ConvState {
  bool primed = false;
  Tensor history;
  Tensor pending;
  std::size_t frames_in = 0;  // padded input frames consumed (transposed)
};

ConvState init_state(const ConvSpec& spec);

// Offline causal convolution over a whole [in x L] sequence. In constant and
// replicate modes the output has L frames and frame t only sees inputs <= t.
// In natural mode the layer is unpadded and returns max(0, L - history())
// frames.
Tensor causal_conv1d_offline(const Tensor& x, const ConvLayer& layer);

// Streams one [in x n] chunk. The concatenation of chunk outputs equals
// causal_conv1d_offline on the concatenated input.
Tensor causal_conv1d_step(ConvState& state, const Tensor& chunk,
                          const ConvLayer& layer);

// Causal transposed convolution: left-pad ceil(k/s)-1 frames, run a standard
// transposed convolution (raw length (L_pad-1)*s + k) and keep the L*s samples
// that start right after the padded frames. With k == 2s this is exactly
// "trim s samples from both ends". Natural mode skips the padding and keeps the
// (L - history())*s complete samples.
Tensor causal_tconv1d_offline(const Tensor& x, const ConvLayer& layer);

Tensor causal_tconv1d_step(ConvState& state, const Tensor& chunk,
                           const ConvLayer& layer);

// Dispatch on spec.transposed.
Tensor conv_layer_offline(const Tensor& x, const ConvLayer& layer);
Tensor conv_layer_step(ConvState& state, const Tensor& chunk,
                       const ConvLayer& layer);

// Non-causal "same" convolution (zero padding split around the window), used
// by the non-causal posterior encoder variant.
Tensor centered_conv1d(const Tensor& x, const ConvLayer& layer);

// Sequential stacks of layers.
Tensor stack_offline(const Tensor& x, std::span<const ConvLayer> net);
std::vector<ConvState> init_stack_state(std::span<const ConvLayer> net);
Tensor stack_step(std::vector<ConvState>& states, const Tensor& chunk,
                  std::span<const ConvLayer> net);

// Product of the strides of the transposed layers.
std::size_t total_upsampling(std::span<const ConvLayer> net);

// Frames of real history that make an unpadded (natural) network emit at
// least slice_len * total_upsampling samples for any slice_len. Each layer
// consumes history() frames at its own input rate; the sum is expressed in
// network-input frames and rounded up.
std::size_t required_history(std::span<const ConvLayer> net);

struct NaturalPadResult {
  Tensor output;               // [out x slice_len * total_upsampling]
  std::size_t history = 0;     // frames prepended in front of the slice
  bool replicated = false;     // true when z[:, 0] was repeated to fill history
};

// Runs `net` (every layer in natural mode) over z[:, start - P, start + len)
// with P = required_history(net), then keeps the last len * upsampling output
// samples. When start < P the missing frames are copies of z[:, 0] and the
// result is flagged.
NaturalPadResult natural_pad_forward(const Tensor& z_full,
                                     std::size_t slice_start,
                                     std::size_t slice_len,
                                     std::span<const ConvLayer> net);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_CAUSAL_CONV_H_
