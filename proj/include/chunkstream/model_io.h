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

#ifndef CHUNKSTREAM_MODEL_IO_H_
#define CHUNKSTREAM_MODEL_IO_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "chunkstream/acoustic_front.h"
#include "chunkstream/chunk_attention.h"
#include "chunkstream/signal_metrics.h"
#include "chunkstream/tensor.h"
#include "chunkstream/vocoder.h"

namespace chunkstream {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

// "CSSW", u32 version, u32 count, then per tensor: u16 name length, name,
// u8 ndim, u32 dims[ndim], f32 data. All little endian.
std::string encode_weights(const TensorMap& params);
TensorMap decode_weights(std::string_view bytes);
void save_weights(const TensorMap& params, const std::string& path);
TensorMap load_weights(const std::string& path);

struct FrontendConfig {
  std::vector<std::string> phones = {"sil", "a", "e", "i", "o", "u",
                                     "b", "d", "g", "l", "m", "n"};
  std::size_t num_notes = 128;
  std::size_t latent_dim = 192;
};

struct ModelFlags {
  bool causal_posterior = true;
  bool natural_padding = true;
  bool smooth_layer = true;
};

// Flags and latent_dim are copied into the sub-configs by sync().
struct ModelConfig {
  FrontendConfig frontend;
  ChunkConfig chunk;
  GeneratorConfig generator;
  MelConfig mel;
  PosteriorConfig posterior;
  ModelFlags flags;

  void sync();
  void validate() const;
};

// Defaults for hop 512 (44.1 kHz) or hop 256 (16 kHz).
ModelConfig default_model_config(std::size_t hop = 512);

std::string config_to_json(const ModelConfig& cfg);
// Every key is required; unknown keys are rejected.
ModelConfig config_from_json(std::string_view text);
ModelConfig load_config(const std::string& path);
void save_config(const ModelConfig& cfg, const std::string& path);

std::vector<ParamShape> model_param_shapes(const ModelConfig& cfg);

// Uniform(-scale, scale) everywhere except LayerNorm gammas, which are
// 1 + Uniform(-scale, scale).
TensorMap make_random_params(const ModelConfig& cfg, std::uint64_t seed,
                             float scale = 0.1f);

struct ModelBundle {
  ModelConfig config;
  PriorFrontWeights front;
  std::vector<AttentionLayerWeights> decoder;
  PosteriorWeights posterior;
  GeneratorGraph generator;
};

// Checks every expected tensor first and reports all missing or misshapen
// ones in a single ConfigError.
ModelBundle build_bundle(const ModelConfig& cfg, const TensorMap& params);
ModelBundle load_model(const std::string& config_path,
                       const std::string& weights_path);
ModelBundle make_random_bundle(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_MODEL_IO_H_
