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

#include "chunkstream/model_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "chunkstream/errors.h"
#include "json.hpp"

namespace chunkstream {

using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'C', 'S', 'S', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("weights: truncated while reading ") + what);
    }
    const std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t uint(std::size_t n, const char* what) {
    const std::string_view b = take(n, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path);
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

void check_keys(const json& obj, std::initializer_list<const char*> keys,
                const std::string& section) {
  if (!obj.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const char* k : keys) {
    if (!obj.contains(k)) throw ConfigError("config: missing key " + section + "." + k);
  }
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.contains(k)) throw ConfigError("config: unknown key " + section + "." + k);
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& section) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for " + section + "." + key);
  }
}

const char* pad_name(PadMode m) {
  switch (m) {
    case PadMode::kConstant: return "constant";
    case PadMode::kReplicate: return "replicate";
    case PadMode::kNatural: return "natural";
  }
  return "replicate";
}

PadMode pad_from_name(const std::string& s) {
  if (s == "constant") return PadMode::kConstant;
  if (s == "replicate") return PadMode::kReplicate;
  throw ConfigError("config: generator.fallback_pad must be 'replicate' or 'constant'");
}

std::string dec(std::size_t n, const std::string& leaf) {
  return "dec." + std::to_string(n) + "." + leaf;
}

std::string post(std::size_t i, const std::string& leaf) {
  return "post." + std::to_string(i) + "." + leaf;
}

ConvSpec smooth_spec(const ChunkConfig& c) {
  return {.in_channels = c.hidden, .out_channels = c.hidden,
          .kernel_size = c.smooth_kernel, .pad_mode = PadMode::kReplicate};
}

ConvSpec posterior_spec(const PosteriorConfig& p, std::size_t i, bool causal) {
  return {.in_channels = i == 0 ? p.in_channels : p.hidden, .out_channels = p.hidden,
          .kernel_size = p.kernel_size,
          .pad_mode = causal ? PadMode::kReplicate : PadMode::kConstant};
}

ConvSpec posterior_proj_spec(const PosteriorConfig& p) {
  return {.in_channels = p.hidden, .out_channels = 2 * p.latent_dim, .kernel_size = 1};
}

void add_conv_shapes(std::vector<ParamShape>& out, const std::string& name,
                     const ConvSpec& s) {
  out.push_back({name + ".weight", {s.out_channels, s.in_channels, s.kernel_size}});
  out.push_back({name + ".bias", {s.out_channels}});
}

ConvLayer take_conv(const TensorMap& params, const std::string& name, const ConvSpec& s) {
  ConvLayer c;
  c.spec = s;
  c.weight = take_param(params, name + ".weight", {s.out_channels, s.in_channels, s.kernel_size});
  c.bias = take_param(params, name + ".bias", {s.out_channels});
  return c;
}

}  // namespace

std::string encode_weights(const TensorMap& params) {
  std::string out(kMagic, 4);
  put_u32(out, kWeightFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    if (name.empty() || name.size() > 0xffff) {
      throw FormatError("weights: tensor name length must be 1..65535");
    }
    if (t.rank() < 1 || t.rank() > 3) {
      throw FormatError("weights: tensor " + name + " must have rank 1..3");
    }
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.rank()));
    for (std::size_t d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

TensorMap decode_weights(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("weights: bad magic, not a CSSW file");
  }
  const auto version = r.uint(4, "version");
  if (version != kWeightFormatVersion) {
    throw FormatError("weights: unsupported version " + std::to_string(version));
  }
  const auto count = r.uint(4, "tensor count");
  TensorMap params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.uint(2, "name length");
    if (name_len == 0) throw FormatError("weights: empty tensor name");
    std::string name(r.take(name_len, "name"));
    const auto ndim = r.uint(1, "ndim");
    if (ndim < 1 || ndim > 3) {
      throw FormatError("weights: tensor " + name + " has unsupported rank " +
                        std::to_string(ndim));
    }
    std::vector<std::size_t> dims;
    std::uint64_t numel = 1;
    for (std::uint64_t d = 0; d < ndim; ++d) {
      dims.push_back(r.uint(4, "dims"));
      // Checked before multiplying so a forged header cannot overflow.
      const std::uint64_t limit = r.remaining() / 4;
      if (dims.back() != 0 && numel > limit / dims.back()) {
        throw FormatError("weights: truncated data for " + name);
      }
      numel *= dims.back();
    }
    std::vector<float> data(numel);
    const std::string_view raw = r.take(numel * 4, "tensor data");
    for (std::size_t k = 0; k < numel; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * k + b])) << (8 * b);
      }
      data[k] = std::bit_cast<float>(bits);
    }
    if (!params.emplace(name, Tensor(dims, std::move(data))).second) {
      throw FormatError("weights: duplicate tensor " + name);
    }
  }
  if (r.remaining() != 0) throw FormatError("weights: trailing bytes after last tensor");
  return params;
}

void save_weights(const TensorMap& params, const std::string& path) {
  write_file(path, encode_weights(params));
}

TensorMap load_weights(const std::string& path) { return decode_weights(read_file(path)); }

void ModelConfig::sync() {
  generator.latent_dim = frontend.latent_dim;
  posterior.latent_dim = frontend.latent_dim;
  generator.natural_padding = flags.natural_padding;
  chunk.smooth_layer = flags.smooth_layer;
}

void ModelConfig::validate() const {
  chunk.validate();
  generator.validate();
  mel.validate();
  posterior.validate();
  if (frontend.phones.empty()) throw ConfigError("config: phone list is empty");
  if (std::set<std::string>(frontend.phones.begin(), frontend.phones.end()).size() !=
      frontend.phones.size()) {
    throw ConfigError("config: duplicate phone symbols");
  }
  if (frontend.num_notes == 0 || frontend.latent_dim == 0) {
    throw ConfigError("config: num_notes and latent_dim must be positive");
  }
  if (generator.latent_dim != frontend.latent_dim ||
      posterior.latent_dim != frontend.latent_dim) {
    throw ConfigError("config: latent_dim differs between modules");
  }
  if (generator.natural_padding != flags.natural_padding ||
      chunk.smooth_layer != flags.smooth_layer) {
    throw ConfigError("config: module flags out of sync");
  }
  if (mel.hop != generator.hop()) {
    throw ConfigError("config: mel hop " + std::to_string(mel.hop) +
                      " differs from generator upsampling " +
                      std::to_string(generator.hop()));
  }
}

ModelConfig default_model_config(std::size_t hop) {
  ModelConfig cfg;
  cfg.generator = generator_config_for_hop(hop);
  if (hop == 256) {
    cfg.mel.sample_rate = 16000;
    cfg.mel.n_fft = 1024;
    cfg.mel.win_length = 1024;
    cfg.mel.fmax = 8000.0;
  }
  cfg.mel.hop = hop;
  cfg.sync();
  cfg.validate();
  return cfg;
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["frontend"] = {{"phones", cfg.frontend.phones},
                   {"num_notes", cfg.frontend.num_notes},
                   {"latent_dim", cfg.frontend.latent_dim}};
  const ChunkConfig& c = cfg.chunk;
  j["chunk"] = {{"chunk_size", c.chunk_size}, {"left_context", c.left_context},
                {"right_context", c.right_context}, {"num_layers", c.num_layers},
                {"hidden", c.hidden}, {"ffn_hidden", c.ffn_hidden},
                {"num_heads", c.num_heads}, {"memory_slots", c.memory_slots},
                {"smooth_kernel", c.smooth_kernel}};
  const GeneratorConfig& g = cfg.generator;
  j["generator"] = {{"upsample_strides", g.upsample_strides},
                    {"upsample_kernels", g.upsample_kernels},
                    {"resblock_kernels", g.resblock_kernels},
                    {"resblock_dilations", g.resblock_dilations},
                    {"base_channels", g.base_channels},
                    {"pre_kernel", g.pre_kernel}, {"post_kernel", g.post_kernel},
                    {"fallback_pad", pad_name(g.fallback_pad)}};
  const MelConfig& m = cfg.mel;
  j["mel"] = {{"sample_rate", m.sample_rate}, {"n_fft", m.n_fft}, {"hop", m.hop},
              {"win_length", m.win_length}, {"n_mels", m.n_mels}, {"fmin", m.fmin},
              {"fmax", m.fmax}, {"log_floor", m.log_floor}};
  const PosteriorConfig& p = cfg.posterior;
  j["posterior"] = {{"in_channels", p.in_channels}, {"hidden", p.hidden},
                    {"kernel_size", p.kernel_size}, {"num_layers", p.num_layers}};
  j["flags"] = {{"causal_posterior", cfg.flags.causal_posterior},
                {"natural_padding", cfg.flags.natural_padding},
                {"smooth_layer", cfg.flags.smooth_layer}};
  return j.dump(2) + "\n";
}

ModelConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, {"frontend", "chunk", "generator", "mel", "posterior", "flags"}, "config");
  ModelConfig cfg;

  const json& f = j["frontend"];
  check_keys(f, {"phones", "num_notes", "latent_dim"}, "frontend");
  cfg.frontend.phones = get<std::vector<std::string>>(f, "phones", "frontend");
  cfg.frontend.num_notes = get<std::size_t>(f, "num_notes", "frontend");
  cfg.frontend.latent_dim = get<std::size_t>(f, "latent_dim", "frontend");

  const json& c = j["chunk"];
  check_keys(c, {"chunk_size", "left_context", "right_context", "num_layers", "hidden",
                 "ffn_hidden", "num_heads", "memory_slots", "smooth_kernel"},
             "chunk");
  cfg.chunk.chunk_size = get<std::size_t>(c, "chunk_size", "chunk");
  cfg.chunk.left_context = get<std::size_t>(c, "left_context", "chunk");
  cfg.chunk.right_context = get<std::size_t>(c, "right_context", "chunk");
  cfg.chunk.num_layers = get<std::size_t>(c, "num_layers", "chunk");
  cfg.chunk.hidden = get<std::size_t>(c, "hidden", "chunk");
  cfg.chunk.ffn_hidden = get<std::size_t>(c, "ffn_hidden", "chunk");
  cfg.chunk.num_heads = get<std::size_t>(c, "num_heads", "chunk");
  cfg.chunk.memory_slots = get<std::size_t>(c, "memory_slots", "chunk");
  cfg.chunk.smooth_kernel = get<std::size_t>(c, "smooth_kernel", "chunk");

  const json& g = j["generator"];
  check_keys(g, {"upsample_strides", "upsample_kernels", "resblock_kernels",
                 "resblock_dilations", "base_channels", "pre_kernel", "post_kernel",
                 "fallback_pad"},
             "generator");
  using Sizes = std::vector<std::size_t>;
  cfg.generator.upsample_strides = get<Sizes>(g, "upsample_strides", "generator");
  cfg.generator.upsample_kernels = get<Sizes>(g, "upsample_kernels", "generator");
  cfg.generator.resblock_kernels = get<Sizes>(g, "resblock_kernels", "generator");
  cfg.generator.resblock_dilations =
      get<std::vector<Sizes>>(g, "resblock_dilations", "generator");
  cfg.generator.base_channels = get<std::size_t>(g, "base_channels", "generator");
  cfg.generator.pre_kernel = get<std::size_t>(g, "pre_kernel", "generator");
  cfg.generator.post_kernel = get<std::size_t>(g, "post_kernel", "generator");
  cfg.generator.fallback_pad = pad_from_name(get<std::string>(g, "fallback_pad", "generator"));

  const json& m = j["mel"];
  check_keys(m, {"sample_rate", "n_fft", "hop", "win_length", "n_mels", "fmin", "fmax",
                 "log_floor"},
             "mel");
  cfg.mel.sample_rate = get<int>(m, "sample_rate", "mel");
  cfg.mel.n_fft = get<std::size_t>(m, "n_fft", "mel");
  cfg.mel.hop = get<std::size_t>(m, "hop", "mel");
  cfg.mel.win_length = get<std::size_t>(m, "win_length", "mel");
  cfg.mel.n_mels = get<std::size_t>(m, "n_mels", "mel");
  cfg.mel.fmin = get<double>(m, "fmin", "mel");
  cfg.mel.fmax = get<double>(m, "fmax", "mel");
  cfg.mel.log_floor = get<double>(m, "log_floor", "mel");

  const json& p = j["posterior"];
  check_keys(p, {"in_channels", "hidden", "kernel_size", "num_layers"}, "posterior");
  cfg.posterior.in_channels = get<std::size_t>(p, "in_channels", "posterior");
  cfg.posterior.hidden = get<std::size_t>(p, "hidden", "posterior");
  cfg.posterior.kernel_size = get<std::size_t>(p, "kernel_size", "posterior");
  cfg.posterior.num_layers = get<std::size_t>(p, "num_layers", "posterior");

  const json& fl = j["flags"];
  check_keys(fl, {"causal_posterior", "natural_padding", "smooth_layer"}, "flags");
  cfg.flags.causal_posterior = get<bool>(fl, "causal_posterior", "flags");
  cfg.flags.natural_padding = get<bool>(fl, "natural_padding", "flags");
  cfg.flags.smooth_layer = get<bool>(fl, "smooth_layer", "flags");

  cfg.sync();
  cfg.validate();
  return cfg;
}

ModelConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

void save_config(const ModelConfig& cfg, const std::string& path) {
  write_file(path, config_to_json(cfg));
}

std::vector<ParamShape> model_param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.chunk.hidden, f = cfg.chunk.ffn_hidden;
  const std::size_t dz = cfg.frontend.latent_dim;
  std::vector<ParamShape> s = {
      {"front.phone_embedding", {cfg.frontend.phones.size(), d}},
      {"front.note_embedding", {cfg.frontend.num_notes, d}},
      {"front.input_proj", {d + 1, d}},
      {"front.input_bias", {d}},
      {"front.prior_proj", {d, 2 * dz}},
      {"front.prior_bias", {2 * dz}},
  };
  for (std::size_t n = 0; n < cfg.chunk.num_layers; ++n) {
    for (const char* w : {"w_q", "w_k", "w_v", "w_out"}) s.push_back({dec(n, w), {d, d}});
    s.push_back({dec(n, "attn_norm.gamma"), {d}});
    s.push_back({dec(n, "attn_norm.beta"), {d}});
    s.push_back({dec(n, "ffn.w1"), {d, f}});
    s.push_back({dec(n, "ffn.b1"), {f}});
    s.push_back({dec(n, "ffn.w2"), {f, d}});
    s.push_back({dec(n, "ffn.b2"), {d}});
    s.push_back({dec(n, "ffn_norm.gamma"), {d}});
    s.push_back({dec(n, "ffn_norm.beta"), {d}});
    if (cfg.flags.smooth_layer) {
      add_conv_shapes(s, dec(n, "smooth.conv1"), smooth_spec(cfg.chunk));
      add_conv_shapes(s, dec(n, "smooth.conv2"), smooth_spec(cfg.chunk));
      for (const char* leaf : {"smooth.norm1.gamma", "smooth.norm1.beta",
                               "smooth.norm2.gamma", "smooth.norm2.beta"}) {
        s.push_back({dec(n, leaf), {d}});
      }
    }
  }
  const PosteriorConfig& p = cfg.posterior;
  for (std::size_t i = 0; i < p.num_layers; ++i) {
    add_conv_shapes(s, post(i, "conv"), posterior_spec(p, i, true));
    s.push_back({post(i, "norm.gamma"), {p.hidden}});
    s.push_back({post(i, "norm.beta"), {p.hidden}});
  }
  add_conv_shapes(s, "post.proj", posterior_proj_spec(p));
  for (ParamShape& g : generator_param_shapes(cfg.generator)) s.push_back(std::move(g));
  return s;
}

TensorMap make_random_params(const ModelConfig& cfg, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-scale, scale);
  TensorMap params;
  for (const ParamShape& s : model_param_shapes(cfg)) {
    Tensor t(s.dims);
    const bool gamma = s.name.ends_with(".gamma");
    for (float& v : t.values()) v = (gamma ? 1.0f : 0.0f) + dist(rng);
    params.emplace(s.name, std::move(t));
  }
  return params;
}

ModelBundle build_bundle(const ModelConfig& cfg, const TensorMap& params) {
  cfg.validate();
  std::vector<std::string> problems;
  for (const ParamShape& s : model_param_shapes(cfg)) {
    const auto it = params.find(s.name);
    if (it == params.end()) {
      problems.push_back("missing " + s.name);
    } else if (it->second.dims() != s.dims) {
      problems.push_back(s.name + " is " + it->second.shape_string() + ", expected " +
                         Tensor(s.dims).shape_string());
    }
  }
  if (!problems.empty()) {
    std::string msg = "weights do not match config: ";
    for (std::size_t i = 0; i < problems.size(); ++i) {
      msg += (i ? "; " : "") + problems[i];
    }
    throw ConfigError(msg);
  }

  ModelBundle b;
  b.config = cfg;
  const std::size_t d = cfg.chunk.hidden, f = cfg.chunk.ffn_hidden;
  const std::size_t dz = cfg.frontend.latent_dim;
  b.front.phone_embedding =
      take_param(params, "front.phone_embedding", {cfg.frontend.phones.size(), d});
  b.front.note_embedding = take_param(params, "front.note_embedding", {cfg.frontend.num_notes, d});
  b.front.input_proj = take_param(params, "front.input_proj", {d + 1, d});
  b.front.input_bias = take_param(params, "front.input_bias", {d});
  b.front.prior_proj = take_param(params, "front.prior_proj", {d, 2 * dz});
  b.front.prior_bias = take_param(params, "front.prior_bias", {2 * dz});
  b.front.validate();

  for (std::size_t n = 0; n < cfg.chunk.num_layers; ++n) {
    AttentionLayerWeights w;
    w.w_q = take_param(params, dec(n, "w_q"), {d, d});
    w.w_k = take_param(params, dec(n, "w_k"), {d, d});
    w.w_v = take_param(params, dec(n, "w_v"), {d, d});
    w.w_out = take_param(params, dec(n, "w_out"), {d, d});
    w.attn_norm_gamma = take_param(params, dec(n, "attn_norm.gamma"), {d});
    w.attn_norm_beta = take_param(params, dec(n, "attn_norm.beta"), {d});
    w.ffn_w1 = take_param(params, dec(n, "ffn.w1"), {d, f});
    w.ffn_b1 = take_param(params, dec(n, "ffn.b1"), {f});
    w.ffn_w2 = take_param(params, dec(n, "ffn.w2"), {f, d});
    w.ffn_b2 = take_param(params, dec(n, "ffn.b2"), {d});
    w.ffn_norm_gamma = take_param(params, dec(n, "ffn_norm.gamma"), {d});
    w.ffn_norm_beta = take_param(params, dec(n, "ffn_norm.beta"), {d});
    if (cfg.flags.smooth_layer) {
      w.smooth.conv1 = take_conv(params, dec(n, "smooth.conv1"), smooth_spec(cfg.chunk));
      w.smooth.conv2 = take_conv(params, dec(n, "smooth.conv2"), smooth_spec(cfg.chunk));
      w.smooth.norm1_gamma = take_param(params, dec(n, "smooth.norm1.gamma"), {d});
      w.smooth.norm1_beta = take_param(params, dec(n, "smooth.norm1.beta"), {d});
      w.smooth.norm2_gamma = take_param(params, dec(n, "smooth.norm2.gamma"), {d});
      w.smooth.norm2_beta = take_param(params, dec(n, "smooth.norm2.beta"), {d});
    }
    w.validate(cfg.chunk);
    b.decoder.push_back(std::move(w));
  }

  const PosteriorConfig& p = cfg.posterior;
  for (std::size_t i = 0; i < p.num_layers; ++i) {
    b.posterior.convs.push_back(
        take_conv(params, post(i, "conv"), posterior_spec(p, i, cfg.flags.causal_posterior)));
    b.posterior.norm_gamma.push_back(take_param(params, post(i, "norm.gamma"), {p.hidden}));
    b.posterior.norm_beta.push_back(take_param(params, post(i, "norm.beta"), {p.hidden}));
  }
  b.posterior.proj = take_conv(params, "post.proj", posterior_proj_spec(p));
  b.posterior.validate(p);

  b.generator = build_generator(cfg.generator, params);
  return b;
}

ModelBundle load_model(const std::string& config_path, const std::string& weights_path) {
  return build_bundle(load_config(config_path), load_weights(weights_path));
}

ModelBundle make_random_bundle(const ModelConfig& cfg, std::uint64_t seed) {
  return build_bundle(cfg, make_random_params(cfg, seed));
}

}  // namespace chunkstream
