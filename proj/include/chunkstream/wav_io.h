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

#ifndef CHUNKSTREAM_WAV_IO_H_
#define CHUNKSTREAM_WAV_IO_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chunkstream {

struct WavData {
  std::vector<float> samples;
  int sample_rate = 0;
};

// Mono 16-bit PCM. Samples are clipped to [-1, 1], scaled by 32767 and
// rounded half to even.
std::int16_t quantize_sample(float v);
std::string encode_wav(std::span<const float> samples, int sample_rate);
void write_wav(std::span<const float> samples, int sample_rate,
               const std::string& path);

// Accepts only what encode_wav produces (mono PCM16); unknown chunks are
// skipped. Samples come back divided by 32767.
WavData decode_wav(std::string_view bytes);
WavData read_wav(const std::string& path);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_WAV_IO_H_
