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

#include "chunkstream/wav_io.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

constexpr float kScale = 32767.0f;

void put(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get(std::string_view b, std::size_t at, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::int16_t quantize_sample(float v) {
  if (std::isnan(v)) throw DomainError("wav: NaN sample");
  const float clipped = std::clamp(v, -1.0f, 1.0f);
  // nearbyint follows the default round-to-nearest-even mode.
  return static_cast<std::int16_t>(std::nearbyint(clipped * kScale));
}

std::string encode_wav(std::span<const float> samples, int sample_rate) {
  if (sample_rate <= 0) throw DomainError("wav: sample rate must be positive");
  const std::uint64_t data_bytes = 2ull * samples.size();
  if (data_bytes > 0xffffffffull - 36) throw DomainError("wav: too many samples");
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put(out, static_cast<std::uint32_t>(36 + data_bytes), 4);
  out += "WAVEfmt ";
  put(out, 16, 4);
  put(out, 1, 2);  // PCM
  put(out, 1, 2);  // mono
  put(out, static_cast<std::uint32_t>(sample_rate), 4);
  put(out, static_cast<std::uint32_t>(sample_rate) * 2, 4);
  put(out, 2, 2);
  put(out, 16, 2);
  out += "data";
  put(out, static_cast<std::uint32_t>(data_bytes), 4);
  for (float v : samples) put(out, static_cast<std::uint16_t>(quantize_sample(v)), 2);
  return out;
}

void write_wav(std::span<const float> samples, int sample_rate, const std::string& path) {
  const std::string bytes = encode_wav(samples, sample_rate);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

WavData decode_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE") {
    throw FormatError("wav: not a RIFF/WAVE file");
  }
  if (get(b, 4, 4) != b.size() - 8) throw FormatError("wav: RIFF size does not match file size");

  WavData wav;
  bool have_fmt = false, have_data = false;
  std::size_t at = 12;
  while (at < b.size()) {
    if (b.size() - at < 8) throw FormatError("wav: truncated chunk header");
    const std::string_view id = b.substr(at, 4);
    const std::uint32_t size = get(b, at + 4, 4);
    at += 8;
    if (b.size() - at < size) throw FormatError("wav: chunk '" + std::string(id) + "' truncated");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too short");
      const std::uint32_t format = get(b, at, 2), channels = get(b, at + 2, 2);
      const std::uint32_t rate = get(b, at + 4, 4), byte_rate = get(b, at + 8, 4);
      const std::uint32_t align = get(b, at + 12, 2), bits = get(b, at + 14, 2);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("wav: only mono 16-bit PCM is supported");
      }
      if (rate == 0 || byte_rate != rate * 2 || align != 2) {
        throw FormatError("wav: inconsistent fmt fields");
      }
      wav.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (size % 2 != 0) throw FormatError("wav: odd data size for 16-bit samples");
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(get(b, at + 2 * i, 2));
        wav.samples[i] = static_cast<float>(v) / kScale;
      }
      have_data = true;
    }
    at += size + (size & 1);  // chunks are word aligned
  }
  if (!have_fmt || !have_data) throw FormatError("wav: missing fmt or data chunk");
  return wav;
}

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_wav(buf.str());
}

}  // namespace chunkstream
