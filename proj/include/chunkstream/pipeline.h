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

#ifndef CHUNKSTREAM_PIPELINE_H_
#define CHUNKSTREAM_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chunkstream/acoustic_front.h"
#include "chunkstream/model_io.h"
#include "chunkstream/tensor.h"

namespace chunkstream {

// parallel: full-attention decoder, offline generator.
// semi:     full-attention decoder, chunkwise generator.
// full:     chunkwise decoder feeding the chunkwise generator.
enum class SynthMode { kParallel, kSemi, kFull };

SynthMode parse_mode(const std::string& name);
std::string mode_name(SynthMode mode);

struct StreamMetrics {
  double latency_s = 0.0;       // call start to first emitted audio
  double process_time_s = 0.0;  // call start to last sample
  double audio_s = 0.0;
  double rtf = 0.0;             // process_time / audio duration
};

struct SynthOptions {
  SynthMode mode = SynthMode::kFull;
  std::uint64_t seed = 0;
  // Full mode only: run the decoder on its own thread, handing latent chunks
  // to the generator through a bounded FIFO.
  bool pipelined = false;
};

struct SynthResult {
  std::vector<float> waveform;
  StreamMetrics metrics;
  std::size_t audio_chunks = 0;
  // Decoder input frames consumed before the first audio chunk was produced.
  std::size_t frames_before_first_audio = 0;
};

// Unit-normal noise, frame by frame from one seeded stream, [T x d_z].
Tensor latent_noise(std::size_t frames, std::size_t latent_dim, std::uint64_t seed);

SynthResult synth(const ScoreSequence& score, const ModelBundle& bundle,
                  const SynthOptions& options);

struct MachineInfo {
  std::string cpu;
  unsigned hardware_threads = 0;
  std::string compiler;
  std::string build_type;
};

MachineInfo machine_info();

struct BenchReport {
  SynthMode mode = SynthMode::kFull;
  std::size_t runs = 0;
  std::size_t warmup = 0;
  StreamMetrics median;
  MachineInfo machine;
};

double median(std::vector<double> values);

// Every score is synthesized `warmup` times unrecorded, then `repeats` times;
// the report holds medians over all recorded runs.
BenchReport bench(const std::vector<ScoreSequence>& scores, const ModelBundle& bundle,
                  const SynthOptions& options, std::size_t repeats, std::size_t warmup);

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_diff = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

std::vector<std::string> verify_check_names();

// Runs the named checks (all of them by default) on the bundle with seeded
// synthetic inputs. An empty selection gives an empty report.
VerifyReport verify(const ModelBundle& bundle,
                    std::optional<std::vector<std::string>> checks = std::nullopt,
                    std::uint64_t seed = 0);

std::string metrics_to_json(const StreamMetrics& m);
std::string bench_to_json(const BenchReport& r);
std::string verify_to_json(const VerifyReport& r);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_PIPELINE_H_
