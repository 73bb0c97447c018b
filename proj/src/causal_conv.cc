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

#include "chunkstream/causal_conv.h"

#include <algorithm>
#include <string>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

// out[o][t] = b[o] + sum_c sum_j w[o][c][j] * x[c][t + j*dilation] over every
// t whose window lies inside x.
Tensor valid_conv(const Tensor& x, const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  const std::size_t span = s.dilation * (s.kernel_size - 1);
  const std::size_t len = x.cols() > span ? x.cols() - span : 0;
  const std::size_t in_len = x.cols();
  Tensor out({s.out_channels, len});
  if (len == 0) return out;
  const float* w = layer.weight.data();
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    float* y = out.data() + o * len;
    std::fill(y, y + len, layer.bias[o]);
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const float* xc = x.data() + c * in_len;
      for (std::size_t j = 0; j < s.kernel_size; ++j) {
        const float wv = w[(o * s.in_channels + c) * s.kernel_size + j];
        const float* xs = xc + j * s.dilation;
        for (std::size_t t = 0; t < len; ++t) y[t] += wv * xs[t];
      }
    }
  }
  return out;
}

// `count` padding frames for a layer whose first real input frame is
// x[:, 0].
Tensor pad_frames(const ConvSpec& spec, const Tensor& x, std::size_t count) {
  Tensor pad({spec.in_channels, count}, spec.pad_value);
  if (spec.pad_mode == PadMode::kReplicate) {
    for (std::size_t c = 0; c < spec.in_channels; ++c) {
      const float v = x.at(c, 0);
      for (std::size_t t = 0; t < count; ++t) pad.at(c, t) = v;
    }
  }
  return pad;
}

void check_input(const Tensor& x, const ConvLayer& layer, const char* op) {
  if (x.rank() != 2 || x.rows() != layer.spec.in_channels) {
    throw ShapeError(std::string(op) + ": expected [" +
                     std::to_string(layer.spec.in_channels) +
                     " x L] input, got " + x.shape_string());
  }
}

Tensor last_cols(const Tensor& x, std::size_t n) {
  n = std::min(n, x.cols());
  return slice_cols(x, x.cols() - n, x.cols());
}

// Adds the contribution of one input frame to the overlap-add accumulator
// acc [out x k], laid out as acc[o][j] for output offset j of this frame.
void accumulate_frame(Tensor& acc, const Tensor& x, std::size_t frame,
                      const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  const std::size_t k = s.kernel_size;
  const float* w = layer.weight.data();
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    const float xv = x.at(c, frame);
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      const float* wk = w + (c * s.out_channels + o) * k;
      float* a = acc.data() + o * k;
      for (std::size_t j = 0; j < k; ++j) a[j] += wk[j] * xv;
    }
  }
}

}  // namespace

void ConvSpec::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_size == 0 ||
      stride == 0 || dilation == 0) {
    throw ConfigError("conv spec: all sizes must be positive");
  }
  if (transposed) {
    if (kernel_size < stride) {
      throw ConfigError("transposed conv: kernel_size " +
                        std::to_string(kernel_size) + " < stride " +
                        std::to_string(stride));
    }
    if (dilation != 1) {
      throw ConfigError("transposed conv: dilation is not supported");
    }
  } else if (stride != 1) {
    throw ConfigError("conv: only stride 1 is supported for convolutions");
  }
}

std::size_t ConvSpec::history() const {
  if (transposed) return (kernel_size + stride - 1) / stride - 1;
  return dilation * (kernel_size - 1);
}

void ConvLayer::validate() const {
  spec.validate();
  const std::vector<std::size_t> want =
      spec.transposed
          ? std::vector<std::size_t>{spec.in_channels, spec.out_channels,
                                     spec.kernel_size}
          : std::vector<std::size_t>{spec.out_channels, spec.in_channels,
                                     spec.kernel_size};
  if (weight.dims() != want) {
    throw ShapeError("conv weight has shape " + weight.shape_string());
  }
  if (bias.rank() != 1 || bias.size() != spec.out_channels) {
    throw ShapeError("conv bias has shape " + bias.shape_string());
  }
}

ConvState init_state(const ConvSpec& spec) {
  spec.validate();
  ConvState state;
  if (spec.transposed) {
    state.pending = Tensor({spec.out_channels, spec.kernel_size});
  } else {
    state.history = Tensor({spec.in_channels, 0});
  }
  return state;
}

Tensor causal_conv1d_offline(const Tensor& x, const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  if (s.transposed) throw ConfigError("causal_conv1d_offline: transposed spec");
  check_input(x, layer, "causal_conv1d_offline");
  if (s.pad_mode == PadMode::kNatural) return valid_conv(x, layer);
  if (x.cols() == 0) return Tensor({s.out_channels, 0});
  const Tensor parts[] = {pad_frames(s, x, s.history()), x};
  return valid_conv(concat_cols(parts), layer);
}

Tensor causal_conv1d_step(ConvState& state, const Tensor& chunk,
                          const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  if (s.transposed) throw ConfigError("causal_conv1d_step: transposed spec");
  check_input(chunk, layer, "causal_conv1d_step");
  if (chunk.cols() == 0) return Tensor({s.out_channels, 0});
  if (!state.primed) {
    state.history = s.pad_mode == PadMode::kNatural
                        ? Tensor({s.in_channels, 0})
                        : pad_frames(s, chunk, s.history());
    state.primed = true;
  }
  const Tensor parts[] = {state.history, chunk};
  const Tensor buffer = concat_cols(parts);
  Tensor out = valid_conv(buffer, layer);
  state.history = last_cols(buffer, s.history());
  return out;
}

Tensor causal_tconv1d_offline(const Tensor& x, const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  if (!s.transposed) throw ConfigError("causal_tconv1d_offline: not transposed");
  check_input(x, layer, "causal_tconv1d_offline");
  const std::size_t hist = s.history();
  const std::size_t stride = s.stride, k = s.kernel_size;
  Tensor padded = x;
  if (s.pad_mode != PadMode::kNatural && x.cols() > 0) {
    const Tensor parts[] = {pad_frames(s, x, hist), x};
    padded = concat_cols(parts);
  }
  const std::size_t frames = padded.cols();
  const std::size_t keep = frames > hist ? (frames - hist) * stride : 0;
  Tensor out({s.out_channels, keep});
  if (keep == 0) return out;

  // Plain transposed convolution, then the causal window.
  const std::size_t raw_len = (frames - 1) * stride + k;
  Tensor raw({s.out_channels, raw_len});
  const float* w = layer.weight.data();
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    const float* xc = padded.data() + c * frames;
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      float* r = raw.data() + o * raw_len;
      const float* wk = w + (c * s.out_channels + o) * k;
      for (std::size_t g = 0; g < frames; ++g) {
        const float xv = xc[g];
        float* dst = r + g * stride;
        for (std::size_t j = 0; j < k; ++j) dst[j] += wk[j] * xv;
      }
    }
  }
  const std::size_t front = hist * stride;
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t t = 0; t < keep; ++t) {
      out.at(o, t) = raw.at(o, front + t) + layer.bias[o];
    }
  }
  return out;
}

Tensor causal_tconv1d_step(ConvState& state, const Tensor& chunk,
                           const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  if (!s.transposed) throw ConfigError("causal_tconv1d_step: not transposed");
  check_input(chunk, layer, "causal_tconv1d_step");
  const std::size_t hist = s.history(), stride = s.stride, k = s.kernel_size;
  if (chunk.cols() == 0) return Tensor({s.out_channels, 0});
  if (state.pending.rank() != 2) state.pending = Tensor({s.out_channels, k});

  std::vector<float> emitted;
  auto push_frame = [&](const Tensor& src, std::size_t frame) {
    accumulate_frame(state.pending, src, frame, layer);
    if (state.frames_in >= hist) {
      // The first `stride` accumulator columns are final.
      emitted.reserve(emitted.size() + s.out_channels * stride);
      for (std::size_t o = 0; o < s.out_channels; ++o) {
        for (std::size_t j = 0; j < stride; ++j) {
          emitted.push_back(state.pending.at(o, j) + layer.bias[o]);
        }
      }
    }
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      float* a = state.pending.data() + o * k;
      std::copy(a + stride, a + k, a);
      std::fill(a + (k - stride), a + k, 0.0f);
    }
    ++state.frames_in;
  };

  if (!state.primed) {
    if (s.pad_mode != PadMode::kNatural) {
      const Tensor pad = pad_frames(s, chunk, hist);
      for (std::size_t g = 0; g < hist; ++g) push_frame(pad, g);
    }
    state.primed = true;
  }
  for (std::size_t g = 0; g < chunk.cols(); ++g) push_frame(chunk, g);

  // `emitted` is frame-major ([frame][o][j]); reorder to [o][time].
  const std::size_t blocks = emitted.size() / (s.out_channels * stride);
  Tensor out({s.out_channels, blocks * stride});
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      for (std::size_t j = 0; j < stride; ++j) {
        out.at(o, b * stride + j) = emitted[(b * s.out_channels + o) * stride + j];
      }
    }
  }
  return out;
}

Tensor conv_layer_offline(const Tensor& x, const ConvLayer& layer) {
  return layer.spec.transposed ? causal_tconv1d_offline(x, layer)
                               : causal_conv1d_offline(x, layer);
}

Tensor conv_layer_step(ConvState& state, const Tensor& chunk,
                       const ConvLayer& layer) {
  return layer.spec.transposed ? causal_tconv1d_step(state, chunk, layer)
                               : causal_conv1d_step(state, chunk, layer);
}

Tensor centered_conv1d(const Tensor& x, const ConvLayer& layer) {
  const ConvSpec& s = layer.spec;
  if (s.transposed) throw ConfigError("centered_conv1d: transposed spec");
  check_input(x, layer, "centered_conv1d");
  const std::size_t span = s.dilation * (s.kernel_size - 1);
  const std::size_t left = span / 2;
  const Tensor parts[] = {Tensor({s.in_channels, left}), x,
                          Tensor({s.in_channels, span - left})};
  return valid_conv(concat_cols(parts), layer);
}

Tensor stack_offline(const Tensor& x, std::span<const ConvLayer> net) {
  Tensor h = x;
  for (const ConvLayer& layer : net) h = conv_layer_offline(h, layer);
  return h;
}

std::vector<ConvState> init_stack_state(std::span<const ConvLayer> net) {
  std::vector<ConvState> states;
  states.reserve(net.size());
  for (const ConvLayer& layer : net) states.push_back(init_state(layer.spec));
  return states;
}

Tensor stack_step(std::vector<ConvState>& states, const Tensor& chunk,
                  std::span<const ConvLayer> net) {
  if (states.size() != net.size()) {
    throw SequenceError("stack_step: state does not match network depth");
  }
  Tensor h = chunk;
  for (std::size_t i = 0; i < net.size(); ++i) {
    h = conv_layer_step(states[i], h, net[i]);
  }
  return h;
}

std::size_t total_upsampling(std::span<const ConvLayer> net) {
  std::size_t up = 1;
  for (const ConvLayer& layer : net) up *= layer.spec.upsampling();
  return up;
}

std::size_t required_history(std::span<const ConvLayer> net) {
  const std::size_t total = total_upsampling(net);
  // Consumption measured in output samples: a layer running at `rate`
  // samples per input frame eats history() of its own frames.
  std::size_t consumed = 0, rate = 1;
  for (const ConvLayer& layer : net) {
    consumed += layer.spec.history() * (total / rate);
    rate *= layer.spec.upsampling();
  }
  return (consumed + total - 1) / total;
}

NaturalPadResult natural_pad_forward(const Tensor& z_full,
                                     std::size_t slice_start,
                                     std::size_t slice_len,
                                     std::span<const ConvLayer> net) {
  if (net.empty()) throw ConfigError("natural_pad_forward: empty network");
  for (const ConvLayer& layer : net) {
    if (layer.spec.pad_mode != PadMode::kNatural) {
      throw ConfigError("natural_pad_forward: every layer must be unpadded");
    }
  }
  if (z_full.rank() != 2 || slice_start + slice_len > z_full.cols()) {
    throw ShapeError("natural_pad_forward: slice exceeds the sequence");
  }
  NaturalPadResult result;
  result.history = required_history(net);
  const std::size_t available = std::min(result.history, slice_start);
  const Tensor window = slice_cols(z_full, slice_start - available,
                                   slice_start + slice_len);
  Tensor input = window;
  if (available < result.history) {
    result.replicated = true;
    Tensor fill({z_full.rows(), result.history - available});
    for (std::size_t c = 0; c < z_full.rows(); ++c) {
      for (std::size_t t = 0; t < fill.cols(); ++t) fill.at(c, t) = z_full.at(c, 0);
    }
    const Tensor parts[] = {fill, window};
    input = concat_cols(parts);
  }
  const Tensor raw = stack_offline(input, net);
  const std::size_t want = slice_len * total_upsampling(net);
  if (raw.cols() < want) {
    throw ShapeError("natural_pad_forward: network produced too few samples");
  }
  result.output = last_cols(raw, want);
  return result;
}

}  // namespace chunkstream
