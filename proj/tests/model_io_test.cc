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
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>

#include <unistd.h>

#include "chunkstream/errors.h"
#include "gtest/gtest.h"
#include "small_model.h"

namespace chunkstream {
namespace {

using testing::small_model_config;

bool bit_equal(const TensorMap& a, const TensorMap& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second.dims() != t.dims()) return false;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(t[i]) != std::bit_cast<std::uint32_t>(it->second[i])) {
        return false;
      }
    }
  }
  return true;
}

std::string temp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() /
          ("chunkstream_" + std::to_string(::getpid()) + "_" + leaf))
      .string();
}

TEST(WeightFormatTest, ByteLayout) {
  TensorMap m;
  m["ab"] = Tensor::vector({1.0f, -2.0f});
  const std::string bytes = encode_weights(m);
  const std::string expected(
      "CSSW"
      "\x01\x00\x00\x00"  // version
      "\x01\x00\x00\x00"  // count
      "\x02\x00"
      "ab"
      "\x01"
      "\x02\x00\x00\x00"
      "\x00\x00\x80\x3f"  // 1.0f
      "\x00\x00\x00\xc0",  // -2.0f
      4 + 4 + 4 + 2 + 2 + 1 + 4 + 8);
  EXPECT_EQ(bytes, expected);
}

TEST(WeightFormatTest, RoundTripIsBitExact) {
  TensorMap m = make_random_params(small_model_config(), 7);
  m["special"] = Tensor::vector({-0.0f, std::numeric_limits<float>::infinity(),
                                 std::numeric_limits<float>::quiet_NaN(),
                                 std::numeric_limits<float>::denorm_min()});
  m["empty"] = Tensor({0, 3});
  EXPECT_TRUE(bit_equal(decode_weights(encode_weights(m)), m));

  const std::string path = temp_path("weights.cssw");
  save_weights(m, path);
  EXPECT_TRUE(bit_equal(load_weights(path), m));
  std::filesystem::remove(path);
  EXPECT_THROW(load_weights(path), IoError);
}

TEST(WeightFormatTest, RejectsTampering) {
  TensorMap m;
  m["w"] = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const std::string good = encode_weights(m);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_weights(bad_magic), FormatError);

  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(decode_weights(bad_version), FormatError);

  for (std::size_t n = 0; n < good.size(); ++n) {
    EXPECT_THROW(decode_weights(std::string_view(good).substr(0, n)), FormatError) << n;
  }
  EXPECT_THROW(decode_weights(good + "x"), FormatError);

  std::string bad_rank = good;
  bad_rank[4 + 4 + 4 + 2 + 1] = 0;
  EXPECT_THROW(decode_weights(bad_rank), FormatError);

  // Forged huge dims must not allocate or overflow.
  std::string huge = good;
  for (int i = 0; i < 8; ++i) huge[4 + 4 + 4 + 2 + 1 + 1 + i] = '\xff';
  EXPECT_THROW(decode_weights(huge), FormatError);

  TensorMap one;
  one["w"] = Tensor::vector({1});
  std::string dup = encode_weights(one);
  const std::string body = dup.substr(12);
  dup[8] = 2;
  dup += body;
  EXPECT_THROW(decode_weights(dup), FormatError);
}

TEST(ConfigTest, JsonRoundTrip) {
  ModelConfig cfg = small_model_config();
  cfg.flags.causal_posterior = false;
  cfg.generator.fallback_pad = PadMode::kConstant;
  const ModelConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_FALSE(back.flags.causal_posterior);
  EXPECT_EQ(back.generator.fallback_pad, PadMode::kConstant);
  EXPECT_EQ(back.generator.latent_dim, 4u);
}

TEST(ConfigTest, DefaultsMatchPaperSetup) {
  const ModelConfig a = default_model_config(512);
  EXPECT_EQ(a.chunk.chunk_size, 20u);
  EXPECT_EQ(a.chunk.left_context, 10u);
  EXPECT_EQ(a.chunk.right_context, 4u);
  EXPECT_EQ(a.chunk.num_layers, 4u);
  EXPECT_EQ(a.chunk.hidden, 192u);
  EXPECT_EQ(a.chunk.ffn_hidden, 768u);
  EXPECT_EQ(a.generator.hop(), 512u);
  EXPECT_EQ(a.mel.n_mels, 80u);
  const ModelConfig b = default_model_config(256);
  EXPECT_EQ(b.generator.hop(), 256u);
  EXPECT_EQ(b.mel.hop, 256u);
}

TEST(ConfigTest, RejectsMissingUnknownAndInconsistentKeys) {
  const std::string text = config_to_json(small_model_config());
  auto expect_error = [](const std::string& t, const std::string& needle) {
    try {
      config_from_json(t);
      ADD_FAILURE() << "accepted: " << needle;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  std::string missing = text;
  missing.replace(missing.find("\"memory_slots\": 2,"), 18, "");
  expect_error(missing, "chunk.memory_slots");
  std::string unknown = text;
  unknown.replace(unknown.find("\"hop\": 4"), 8, "\"hop\": 4, \"hopp\": 4");
  expect_error(unknown, "mel.hopp");
  std::string hop = text;
  hop.replace(hop.find("\"hop\": 4"), 8, "\"hop\": 8");
  expect_error(hop, "hop");
  expect_error("{", "invalid JSON");
  std::string wrong_type = text;
  wrong_type.replace(wrong_type.find("\"smooth_layer\": true"), 20, "\"smooth_layer\": 3");
  expect_error(wrong_type, "flags.smooth_layer");
}

TEST(RandomParamsTest, DistributionAndDeterminism) {
  const ModelConfig cfg = small_model_config();
  const TensorMap a = make_random_params(cfg, 3), b = make_random_params(cfg, 3);
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_FALSE(bit_equal(a, make_random_params(cfg, 4)));
  EXPECT_EQ(a.size(), model_param_shapes(cfg).size());
  for (const auto& [name, t] : a) {
    const float center = name.ends_with(".gamma") ? 1.0f : 0.0f;
    for (float v : t.values()) {
      EXPECT_LE(std::abs(v - center), 0.1f) << name;
    }
  }
}

TEST(BundleTest, ReportsEveryMissingOrMisshapenTensor) {
  const ModelConfig cfg = small_model_config();
  TensorMap params = make_random_params(cfg, 1);
  EXPECT_NO_THROW(build_bundle(cfg, params));
  params.erase("dec.1.w_k");
  params.erase("gen.post.bias");
  params["front.input_bias"] = Tensor({3});
  try {
    build_bundle(cfg, params);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("missing dec.1.w_k"), std::string::npos) << msg;
    EXPECT_NE(msg.find("missing gen.post.bias"), std::string::npos) << msg;
    EXPECT_NE(msg.find("front.input_bias is [3]"), std::string::npos) << msg;
  }
}

TEST(BundleTest, SmoothTensorsOnlyWhenEnabled) {
  ModelConfig cfg = small_model_config();
  cfg.flags.smooth_layer = false;
  cfg.sync();
  for (const ParamShape& s : model_param_shapes(cfg)) {
    EXPECT_EQ(s.name.find("smooth"), std::string::npos) << s.name;
  }
  // A bundle trained with the smooth layer still loads with it switched off.
  EXPECT_NO_THROW(build_bundle(cfg, make_random_params(small_model_config(), 2)));
}

TEST(BundleTest, LoadModelFromFiles) {
  const ModelConfig cfg = small_model_config();
  const std::string cpath = temp_path("config.json"), wpath = temp_path("model.cssw");
  save_config(cfg, cpath);
  save_weights(make_random_params(cfg, 5), wpath);
  const ModelBundle b = load_model(cpath, wpath);
  EXPECT_EQ(b.decoder.size(), 2u);
  EXPECT_EQ(b.generator.cfg.hop(), 4u);
  std::filesystem::remove(cpath);
  std::filesystem::remove(wpath);
}

}  // namespace
}  // namespace chunkstream
