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

#ifndef CHUNKSTREAM_TESTS_SMALL_MODEL_H_
#define CHUNKSTREAM_TESTS_SMALL_MODEL_H_

#include "chunkstream/model_io.h"

namespace chunkstream::testing {

// A model small enough for unit tests: hop 4, hidden 16.
inline ModelConfig small_model_config() {
  ModelConfig cfg;
  cfg.frontend.phones = {"sil", "a", "b", "c"};
  cfg.frontend.num_notes = 128;
  cfg.frontend.latent_dim = 4;
  cfg.chunk.chunk_size = 5;
  cfg.chunk.left_context = 3;
  cfg.chunk.right_context = 2;
  cfg.chunk.num_layers = 2;
  cfg.chunk.hidden = 16;
  cfg.chunk.ffn_hidden = 32;
  cfg.chunk.num_heads = 2;
  cfg.chunk.memory_slots = 2;
  cfg.generator.upsample_strides = {2, 2};
  cfg.generator.upsample_kernels = {4, 4};
  cfg.generator.resblock_kernels = {3, 2};
  cfg.generator.resblock_dilations = {{1, 2}, {1}};
  cfg.generator.base_channels = 8;
  cfg.generator.pre_kernel = 3;
  cfg.generator.post_kernel = 3;
  cfg.mel.sample_rate = 16000;
  cfg.mel.n_fft = 16;
  cfg.mel.win_length = 16;
  cfg.mel.hop = 4;
  cfg.mel.n_mels = 8;
  cfg.mel.fmax = 8000.0;
  cfg.posterior.in_channels = 9;
  cfg.posterior.hidden = 8;
  cfg.posterior.kernel_size = 3;
  cfg.posterior.num_layers = 2;
  cfg.sync();
  cfg.validate();
  return cfg;
}

}  // namespace chunkstream::testing

#endif  // CHUNKSTREAM_TESTS_SMALL_MODEL_H_
