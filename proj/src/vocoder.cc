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

#include "chunkstream/vocoder.h"

#include <algorithm>
#include <cmath>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

Tensor lrelu(const Tensor& x) { return activation(x, Activation::kLeakyRelu); }

// tanh rounds to exactly +-1 in float for |x| > ~9; keep the open interval.
void bounded_tanh(Tensor& x) {
  const float limit = std::nextafter(1.0f, 0.0f);
  activation_inplace(x, Activation::kTanh);
  for (float& v : x.values()) v = std::clamp(v, -limit, limit);
}

Tensor tail_cols(const Tensor& x, std::size_t n) {
  return slice_cols(x, x.cols() - n, x.cols());
}

// Drops up to `skip` leading frames, counting them off.
Tensor drop_front(const Tensor& x, std::size_t& skip) {
  const std::size_t n = std::min(skip, x.cols());
  skip -= n;
  return n == 0 ? x : slice_cols(x, n, x.cols());
}

ConvLayer make_layer(const TensorMap& params, const std::string& name,
                     ConvSpec spec) {
  ConvLayer layer;
  layer.spec = spec;
  const std::vector<std::size_t> wdims =
      spec.transposed
          ? std::vector<std::size_t>{spec.in_channels, spec.out_channels, spec.kernel_size}
          : std::vector<std::size_t>{spec.out_channels, spec.in_channels, spec.kernel_size};
  layer.weight = take_param(params, name + ".weight", wdims);
  layer.bias = take_param(params, name + ".bias", {spec.out_channels});
  layer.validate();
  return layer;
}

struct LayerPlan {
  std::string name;
  ConvSpec spec;
};

// Every conv of the graph in a fixed order, shared by the shape listing and
// the builder.
std::vector<LayerPlan> plan_layers(const GeneratorConfig& cfg) {
  const PadMode mode = cfg.natural_padding ? PadMode::kNatural : cfg.fallback_pad;
  auto conv = [&](std::size_t in, std::size_t out, std::size_t k, std::size_t dil) {
    return ConvSpec{.in_channels = in, .out_channels = out, .kernel_size = k,
                    .dilation = dil, .pad_mode = mode};
  };
  std::vector<LayerPlan> plan;
  plan.push_back({"gen.pre", conv(cfg.latent_dim, cfg.base_channels, cfg.pre_kernel, 1)});
  std::size_t ch = cfg.base_channels;
  for (std::size_t i = 0; i < cfg.upsample_strides.size(); ++i) {
    const std::size_t out = cfg.stage_channels(i);
    ConvSpec up{.in_channels = ch, .out_channels = out,
                .kernel_size = cfg.upsample_kernels[i],
                .stride = cfg.upsample_strides[i], .transposed = true,
                .pad_mode = mode};
    plan.push_back({"gen.up." + std::to_string(i), up});
    for (std::size_t b = 0; b < cfg.resblock_kernels.size(); ++b) {
      const std::size_t k = cfg.resblock_kernels[b];
      for (std::size_t u = 0; u < cfg.resblock_dilations[b].size(); ++u) {
        const std::string base = "gen.mrf." + std::to_string(i) + "." +
                                 std::to_string(b) + "." + std::to_string(u);
        plan.push_back({base + ".dilated", conv(out, out, k, cfg.resblock_dilations[b][u])});
        plan.push_back({base + ".plain", conv(out, out, k, 1)});
      }
    }
    ch = out;
  }
  plan.push_back({"gen.post", conv(ch, 1, cfg.post_kernel, 1)});
  return plan;
}

Tensor run_offline(const Tensor& x, const GeneratorGraph& g) {
  Tensor h = conv_layer_offline(x, g.pre);
  for (const UpStage& stage : g.stages) {
    h = conv_layer_offline(lrelu(h), stage.up);
    std::vector<Tensor> outs;
    std::size_t shortest = h.cols();
    for (const ResBlock& block : stage.blocks) {
      Tensor y = h;
      for (const ResUnit& unit : block.units) {
        Tensor t = conv_layer_offline(lrelu(y), unit.dilated);
        t = conv_layer_offline(lrelu(t), unit.plain);
        add_inplace(t, tail_cols(y, t.cols()));
        y = std::move(t);
      }
      shortest = std::min(shortest, y.cols());
      outs.push_back(std::move(y));
    }
    Tensor sum({h.rows(), shortest});
    for (const Tensor& y : outs) add_inplace(sum, tail_cols(y, shortest));
    for (float& v : sum.values()) v /= static_cast<float>(outs.size());
    h = std::move(sum);
  }
  h = conv_layer_offline(lrelu(h), g.post);
  bounded_tanh(h);
  return h;
}

// z[:, start - before, start + len) with column 0 standing in for negative
// indices.
Tensor frames_with_history(const Tensor& z, std::size_t start, std::size_t len,
                           std::size_t before) {
  Tensor out({z.rows(), before + len});
  for (std::size_t c = 0; c < z.rows(); ++c) {
    for (std::size_t t = 0; t < before + len; ++t) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(start + t) -
                                 static_cast<std::ptrdiff_t>(before);
      out.at(c, t) = z.at(c, src < 0 ? 0 : static_cast<std::size_t>(src));
    }
  }
  return out;
}

void check_latent(const Tensor& z, const GeneratorGraph& g, const char* what) {
  if (z.rank() != 2 || z.rows() != g.cfg.latent_dim) {
    throw ShapeError(std::string(what) + ": latent must be [" +
                     std::to_string(g.cfg.latent_dim) + " x T], got " +
                     z.shape_string());
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (upsample_strides.empty()) throw ConfigError("generator: no upsampling stages");
  if (upsample_kernels.size() != upsample_strides.size()) {
    throw ConfigError("generator: one upsample kernel per stride required");
  }
  for (std::size_t i = 0; i < upsample_strides.size(); ++i) {
    if (upsample_strides[i] == 0 || upsample_kernels[i] < upsample_strides[i]) {
      throw ConfigError("generator: upsample kernel must be >= stride >= 1");
    }
  }
  if (resblock_kernels.empty() || resblock_dilations.size() != resblock_kernels.size()) {
    throw ConfigError("generator: one dilation list per resblock kernel required");
  }
  for (std::size_t b = 0; b < resblock_kernels.size(); ++b) {
    if (resblock_kernels[b] == 0 || resblock_dilations[b].empty()) {
      throw ConfigError("generator: resblock kernels and dilation lists must be nonempty");
    }
    for (std::size_t d : resblock_dilations[b]) {
      if (d == 0) throw ConfigError("generator: dilation must be >= 1");
    }
  }
  if (base_channels == 0 || latent_dim == 0 || pre_kernel == 0 || post_kernel == 0) {
    throw ConfigError("generator: sizes must be positive");
  }
  if (fallback_pad == PadMode::kNatural) {
    throw ConfigError("generator: fallback padding cannot be natural");
  }
}

std::size_t GeneratorConfig::hop() const {
  std::size_t hop = 1;
  for (std::size_t s : upsample_strides) hop *= s;
  return hop;
}

std::size_t GeneratorConfig::stage_channels(std::size_t stage) const {
  return std::max<std::size_t>(1, base_channels >> (stage + 1));
}

GeneratorConfig generator_config_for_hop(std::size_t hop) {
  GeneratorConfig cfg;
  if (hop == 512) {
    cfg.upsample_strides = {8, 8, 4, 2};
  } else if (hop == 256) {
    cfg.upsample_strides = {8, 8, 2, 2};
  } else {
    throw ConfigError("generator: no preset for hop " + std::to_string(hop));
  }
  cfg.upsample_kernels.clear();
  for (std::size_t s : cfg.upsample_strides) cfg.upsample_kernels.push_back(2 * s);
  return cfg;
}

std::vector<ParamShape> generator_param_shapes(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<ParamShape> shapes;
  for (const LayerPlan& p : plan_layers(cfg)) {
    const ConvSpec& s = p.spec;
    shapes.push_back({p.name + ".weight",
                      s.transposed ? std::vector<std::size_t>{s.in_channels, s.out_channels, s.kernel_size}
                                   : std::vector<std::size_t>{s.out_channels, s.in_channels, s.kernel_size}});
    shapes.push_back({p.name + ".bias", {s.out_channels}});
  }
  return shapes;
}

std::size_t GeneratorGraph::history_frames() const {
  const std::size_t hop = cfg.hop();
  return (consumption + hop - 1) / hop;
}

GeneratorGraph build_generator(const GeneratorConfig& cfg, const TensorMap& params) {
  cfg.validate();
  GeneratorGraph g;
  g.cfg = cfg;
  const std::vector<LayerPlan> plan = plan_layers(cfg);
  std::size_t next = 0;
  auto layer = [&] {
    const LayerPlan& p = plan[next++];
    return make_layer(params, p.name, p.spec);
  };

  g.pre = layer();
  std::size_t used = g.pre.spec.history();  // in samples of the current rate
  for (std::size_t i = 0; i < cfg.upsample_strides.size(); ++i) {
    UpStage stage;
    stage.up = layer();
    used = (used + stage.up.spec.history()) * stage.up.spec.stride;
    std::vector<std::size_t> block_used;
    for (std::size_t b = 0; b < cfg.resblock_kernels.size(); ++b) {
      ResBlock block;
      std::size_t u_used = used;
      for (std::size_t u = 0; u < cfg.resblock_dilations[b].size(); ++u) {
        ResUnit unit;
        unit.dilated = layer();
        unit.plain = layer();
        u_used += unit.dilated.spec.history() + unit.plain.spec.history();
        block.units.push_back(std::move(unit));
      }
      block_used.push_back(u_used);
      stage.blocks.push_back(std::move(block));
    }
    used = *std::max_element(block_used.begin(), block_used.end());
    std::vector<std::size_t> skips;
    for (std::size_t u : block_used) skips.push_back(cfg.natural_padding ? used - u : 0);
    g.block_skip.push_back(std::move(skips));
    g.stages.push_back(std::move(stage));
  }
  g.post = layer();
  used += g.post.spec.history();
  g.consumption = cfg.natural_padding ? used : 0;
  return g;
}

Tensor generator_offline(const Tensor& z, const GeneratorGraph& graph) {
  check_latent(z, graph, "generator_offline");
  if (z.cols() == 0) throw ShapeError("generator_offline: need at least one frame");
  return generator_slice(z, 0, z.cols(), graph);
}

Tensor generator_slice(const Tensor& z, std::size_t start, std::size_t len,
                       const GeneratorGraph& graph) {
  check_latent(z, graph, "generator_slice");
  if (len == 0 || start + len > z.cols()) {
    throw ShapeError("generator_slice: slice outside the latent sequence");
  }
  const std::size_t hop = graph.cfg.hop();
  const std::size_t before = graph.cfg.natural_padding ? graph.history_frames() : 0;
  const Tensor out = run_offline(frames_with_history(z, start, len, before), graph);
  return tail_cols(out, len * hop).reshaped({len * hop});
}

GeneratorState init_generator_state(const GeneratorGraph& graph) {
  GeneratorState s;
  s.pre = init_state(graph.pre.spec);
  for (std::size_t i = 0; i < graph.stages.size(); ++i) {
    const UpStage& stage = graph.stages[i];
    StageState st;
    st.up = init_state(stage.up.spec);
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      BlockState bs;
      bs.skip = graph.block_skip[i][b];
      for (const ResUnit& unit : stage.blocks[b].units) {
        UnitState us;
        us.dilated = init_state(unit.dilated.spec);
        us.plain = init_state(unit.plain.spec);
        if (graph.cfg.natural_padding) {
          us.skip = unit.dilated.spec.history() + unit.plain.spec.history();
        }
        bs.units.push_back(std::move(us));
      }
      st.blocks.push_back(std::move(bs));
    }
    s.stages.push_back(std::move(st));
  }
  s.post = init_state(graph.post.spec);
  return s;
}

Tensor generator_stream(GeneratorState& state, const Tensor& z_chunk,
                        const GeneratorGraph& graph, std::size_t chunk_index) {
  check_latent(z_chunk, graph, "generator_stream");
  if (chunk_index != state.chunks) {
    throw SequenceError("generator_stream: expected chunk " +
                        std::to_string(state.chunks) + ", got " +
                        std::to_string(chunk_index));
  }
  ++state.chunks;
  const std::size_t hop = graph.cfg.hop();
  const std::size_t n = z_chunk.cols();
  if (n == 0) return Tensor({0});

  Tensor x = z_chunk;
  if (!state.started) {
    state.started = true;
    if (graph.cfg.natural_padding) {
      const std::size_t before = graph.history_frames();
      x = frames_with_history(z_chunk, 0, n, before);
      state.discard = before * hop - graph.consumption;
    }
  }

  Tensor h = conv_layer_step(state.pre, x, graph.pre);
  for (std::size_t i = 0; i < graph.stages.size(); ++i) {
    const UpStage& stage = graph.stages[i];
    StageState& st = state.stages[i];
    h = conv_layer_step(st.up, lrelu(h), stage.up);
    std::vector<Tensor> outs;
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      BlockState& bs = st.blocks[b];
      Tensor y = h;
      for (std::size_t u = 0; u < stage.blocks[b].units.size(); ++u) {
        const ResUnit& unit = stage.blocks[b].units[u];
        UnitState& us = bs.units[u];
        Tensor t = conv_layer_step(us.dilated, lrelu(y), unit.dilated);
        t = conv_layer_step(us.plain, lrelu(t), unit.plain);
        add_inplace(t, drop_front(y, us.skip));
        y = std::move(t);
      }
      outs.push_back(drop_front(y, bs.skip));
    }
    Tensor sum(outs[0].dims());
    for (const Tensor& y : outs) add_inplace(sum, y);
    for (float& v : sum.values()) v /= static_cast<float>(outs.size());
    h = std::move(sum);
  }
  h = conv_layer_step(state.post, lrelu(h), graph.post);
  bounded_tanh(h);
  h = drop_front(h, state.discard);
  if (h.cols() != n * hop) {
    throw SequenceError("generator_stream: emitted " + std::to_string(h.cols()) +
                        " samples for " + std::to_string(n) + " frames");
  }
  return h.reshaped({n * hop});
}

}  // namespace chunkstream
