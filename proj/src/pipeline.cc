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

#include "chunkstream/pipeline.h"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "chunkstream/chunk_attention.h"
#include "chunkstream/errors.h"
#include "chunkstream/vocoder.h"
#include "json.hpp"

#ifndef CHUNKSTREAM_BUILD_TYPE
#define CHUNKSTREAM_BUILD_TYPE "unknown"
#endif

namespace chunkstream {

using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Decoder rows [start, start + n) to a generator input chunk [d_z x n].
Tensor to_latent(const Tensor& decoder_rows, std::size_t start, const Tensor& eps,
                 const PriorFrontWeights& front) {
  const GaussianParams g = prior_params(decoder_rows, front);
  return transpose(sample_latent(g, slice_rows(eps, start, start + decoder_rows.rows())));
}

struct LatentChunk {
  Tensor z;
  std::size_t frames_consumed = 0;
};

// Single producer, single consumer FIFO with a capacity bound. An empty
// optional marks the end of the stream.
class ChunkQueue {
 public:
  explicit ChunkQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::optional<LatentChunk> item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<LatentChunk> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty(); });
    std::optional<LatentChunk> item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<std::optional<LatentChunk>> items_;
};

// Runs the chunkwise decoder over `frames`, calling `emit` with each latent
// chunk as soon as the decoder releases it.
template <typename Emit>
void stream_decoder(const Tensor& frames, const Tensor& eps, const ModelBundle& b,
                    Emit&& emit) {
  ChunkStreamDecoder decoder(b.config.chunk, b.decoder);
  std::size_t fed = 0, produced = 0;
  auto forward = [&](const std::vector<Tensor>& chunks) {
    for (const Tensor& c : chunks) {
      emit(LatentChunk{to_latent(c, produced, eps, b.front), fed});
      produced += c.rows();
    }
  };
  while (fed < frames.rows()) {
    const std::size_t n = std::min(std::max<std::size_t>(1, decoder.frames_needed()),
                                   frames.rows() - fed);
    const Tensor piece = slice_rows(frames, fed, fed + n);
    fed += n;
    forward(decoder.push(piece));
  }
  forward(decoder.finish());
}

}  // namespace

SynthMode parse_mode(const std::string& name) {
  if (name == "parallel") return SynthMode::kParallel;
  if (name == "semi") return SynthMode::kSemi;
  if (name == "full") return SynthMode::kFull;
  throw ConfigError("unknown mode '" + name + "' (parallel, semi or full)");
}

std::string mode_name(SynthMode mode) {
  switch (mode) {
    case SynthMode::kParallel: return "parallel";
    case SynthMode::kSemi: return "semi";
    case SynthMode::kFull: return "full";
  }
  return "full";
}

Tensor latent_noise(std::size_t frames, std::size_t latent_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Tensor eps({frames, latent_dim});
  for (float& v : eps.values()) v = normal(rng);
  return eps;
}

SynthResult synth(const ScoreSequence& score, const ModelBundle& bundle,
                  const SynthOptions& options) {
  const Clock::time_point start = Clock::now();
  const ModelConfig& cfg = bundle.config;
  const Tensor frames = prior_frames(score, bundle.front);
  const std::size_t total = frames.rows();
  const Tensor eps = latent_noise(total, cfg.frontend.latent_dim, options.seed);

  SynthResult result;
  result.waveform.reserve(total * cfg.generator.hop());
  bool first = true;
  auto append = [&](const Tensor& audio, std::size_t consumed) {
    result.waveform.insert(result.waveform.end(), audio.values().begin(),
                           audio.values().end());
    ++result.audio_chunks;
    if (first && !audio.empty()) {
      first = false;
      result.metrics.latency_s = seconds_since(start);
      result.frames_before_first_audio = consumed;
    }
  };

  if (options.mode == SynthMode::kFull) {
    GeneratorState state = init_generator_state(bundle.generator);
    auto generate = [&](const LatentChunk& c) {
      append(generator_stream(state, c.z, bundle.generator, result.audio_chunks),
             c.frames_consumed);
    };
    if (!options.pipelined) {
      stream_decoder(frames, eps, bundle, generate);
    } else {
      ChunkQueue queue(4);
      std::exception_ptr failure;
      std::thread producer([&] {
        try {
          stream_decoder(frames, eps, bundle, [&](LatentChunk c) { queue.push(std::move(c)); });
        } catch (...) {
          failure = std::current_exception();
        }
        queue.push(std::nullopt);
      });
      try {
        while (std::optional<LatentChunk> c = queue.pop()) generate(*c);
      } catch (...) {
        // Drain so the producer can finish before the exception propagates.
        while (queue.pop()) {
        }
        producer.join();
        throw;
      }
      producer.join();
      if (failure) std::rethrow_exception(failure);
    }
  } else {
    const Tensor decoded = full_attention_oracle(frames, cfg.chunk, bundle.decoder);
    const Tensor z = to_latent(decoded, 0, eps, bundle.front);
    if (options.mode == SynthMode::kParallel) {
      append(generator_offline(z, bundle.generator), total);
    } else {
      GeneratorState state = init_generator_state(bundle.generator);
      const std::size_t step = cfg.chunk.chunk_size;
      for (std::size_t at = 0; at < total; at += step) {
        const std::size_t end = std::min(total, at + step);
        append(generator_stream(state, slice_cols(z, at, end), bundle.generator,
                                result.audio_chunks),
               total);
      }
    }
  }

  StreamMetrics& m = result.metrics;
  m.process_time_s = seconds_since(start);
  m.audio_s = static_cast<double>(result.waveform.size()) / cfg.mel.sample_rate;
  m.rtf = m.audio_s > 0.0 ? m.process_time_s / m.audio_s : 0.0;
  return result;
}

MachineInfo machine_info() {
  MachineInfo info;
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.starts_with("model name")) {
      const std::size_t colon = line.find(':');
      if (colon != std::string::npos) info.cpu = line.substr(colon + 2);
      break;
    }
  }
  if (info.cpu.empty()) info.cpu = "unknown";
  info.hardware_threads = std::thread::hardware_concurrency();
#if defined(__clang__)
  info.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  info.compiler = "gcc " __VERSION__;
#else
  info.compiler = "unknown";
#endif
  info.build_type = CHUNKSTREAM_BUILD_TYPE;
  return info;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

BenchReport bench(const std::vector<ScoreSequence>& scores, const ModelBundle& bundle,
                  const SynthOptions& options, std::size_t repeats, std::size_t warmup) {
  if (scores.empty()) throw DomainError("bench: no scores");
  if (repeats == 0) throw DomainError("bench: repeats must be >= 1");
  BenchReport report;
  report.mode = options.mode;
  report.warmup = warmup;
  report.machine = machine_info();
  for (std::size_t w = 0; w < warmup; ++w) {
    for (const ScoreSequence& s : scores) synth(s, bundle, options);
  }
  std::vector<double> latency, process, audio, rtf;
  for (std::size_t r = 0; r < repeats; ++r) {
    for (const ScoreSequence& s : scores) {
      const StreamMetrics m = synth(s, bundle, options).metrics;
      latency.push_back(m.latency_s);
      process.push_back(m.process_time_s);
      audio.push_back(m.audio_s);
      rtf.push_back(m.rtf);
    }
  }
  report.runs = latency.size();
  report.median = {median(latency), median(process), median(audio), median(rtf)};
  return report;
}

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

Tensor normal_tensor(std::vector<std::size_t> dims, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Tensor t(std::move(dims));
  for (float& v : t.values()) v = normal(rng);
  return t;
}

double max_diff(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return worst;
}

std::vector<float> stream_generator(const Tensor& z, const GeneratorGraph& g,
                                    const std::vector<std::size_t>& sizes) {
  GeneratorState state = init_generator_state(g);
  std::vector<float> out;
  std::size_t at = 0, index = 0;
  for (std::size_t n : sizes) {
    const Tensor y = generator_stream(state, slice_cols(z, at, at + n), g, index++);
    out.insert(out.end(), y.values().begin(), y.values().end());
    at += n;
  }
  return out;
}

std::vector<std::size_t> random_sizes(std::size_t total, std::size_t max_chunk,
                                      std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(1, max_chunk);
  std::vector<std::size_t> sizes;
  while (total > 0) {
    sizes.push_back(std::min(total, dist(rng)));
    total -= sizes.back();
  }
  return sizes;
}

CheckResult check_generator_stream(const ModelBundle& b, std::mt19937_64& rng) {
  const GeneratorGraph& g = b.generator;
  const Tensor z = normal_tensor({g.cfg.latent_dim, 37}, rng);
  const Tensor offline = generator_offline(z, g);
  const double diff = max_diff(stream_generator(z, g, random_sizes(37, 20, rng)), offline.values());
  return {"generator_stream_equivalence", diff < 1e-5, diff,
          "chunked generator vs offline, 37 frames"};
}

CheckResult check_generator_length(const ModelBundle& b, std::mt19937_64& rng) {
  const GeneratorGraph& g = b.generator;
  const std::size_t hop = g.cfg.hop();
  for (std::size_t t : {1u, 2u, 3u, 5u, 8u}) {
    const Tensor z = normal_tensor({g.cfg.latent_dim, t}, rng);
    const std::size_t offline = generator_offline(z, g).size();
    const std::size_t streamed = stream_generator(z, g, random_sizes(t, 3, rng)).size();
    if (offline != t * hop || streamed != t * hop) {
      return {"generator_length_law", false, 0.0,
              std::to_string(t) + " frames gave " + std::to_string(offline) + " offline and " +
                  std::to_string(streamed) + " streamed samples"};
    }
  }
  return {"generator_length_law", true, 0.0, "frames x hop samples for 1, 2, 3, 5, 8 frames"};
}

CheckResult check_generator_causality(const ModelBundle& b, std::mt19937_64& rng) {
  const GeneratorGraph& g = b.generator;
  const std::size_t hop = g.cfg.hop(), t = 5;
  const Tensor z = normal_tensor({g.cfg.latent_dim, 12}, rng);
  Tensor moved = z;
  for (std::size_t c = 0; c < z.rows(); ++c) moved.at(c, t) += 1.0f;
  const Tensor a = generator_offline(z, g), c = generator_offline(moved, g);
  const double diff = max_diff(std::span(a.data(), t * hop), std::span(c.data(), t * hop));
  return {"generator_causality", diff == 0.0, diff,
          "perturbing frame 5 leaves the first 5 x hop samples unchanged"};
}

CheckResult check_natural_probe(const ModelBundle& b, std::mt19937_64& rng) {
  const GeneratorGraph& g = b.generator;
  const std::size_t hop = g.cfg.hop();
  const std::size_t start = std::max<std::size_t>(g.history_frames(), 4) + 4, len = 6;
  const Tensor z = normal_tensor({g.cfg.latent_dim, start + len + 4}, rng);
  const Tensor full = generator_offline(z, g);
  const Tensor slice = generator_slice(z, start, len, g);
  const double diff = max_diff(slice.values(), std::span(full.data() + start * hop, len * hop));
  const bool ok = diff < 1e-5;
  std::string detail = ok ? "slice computed with real history matches the full-sequence region"
                          : "boundary mismatch: slice padded at its own edge differs from "
                            "the full-sequence region";
  if (!g.cfg.natural_padding) detail += " (natural padding off)";
  return {"natural_padding_probe", ok, diff, detail};
}

CheckResult check_decoder_causality(const ModelBundle& b, std::mt19937_64& rng) {
  const ChunkConfig& c = b.config.chunk;
  const std::size_t horizon = c.chunk_size + c.right_context;
  const std::size_t total = 3 * c.chunk_size + c.right_context;
  const Tensor x = normal_tensor({total, c.hidden}, rng);
  Tensor moved = x;
  for (std::size_t t = horizon; t < total; ++t) {
    for (std::size_t j = 0; j < c.hidden; ++j) moved.at(t, j) += 1.0f;
  }
  const Tensor a = chunkstream_decode(x, c, b.decoder).output;
  const Tensor m = chunkstream_decode(moved, c, b.decoder).output;
  const double diff = max_diff(slice_rows(a, 0, c.chunk_size).values(),
                               slice_rows(m, 0, c.chunk_size).values());
  return {"decoder_chunk_causality", diff == 0.0, diff,
          "frames past the first chunk's right context do not reach it"};
}

CheckResult check_attention_degenerate(const ModelBundle& b, std::mt19937_64& rng) {
  ChunkConfig c = b.config.chunk;
  const std::size_t t = 16;
  c.memory_slots = 0;
  c.right_context = 0;
  c.left_context = t;
  c.chunk_size = t;
  const Tensor x = normal_tensor({t, c.hidden}, rng);
  const double diff = max_diff(chunkstream_decode(x, c, b.decoder).output.values(),
                               full_attention_oracle(x, c, b.decoder).values());
  return {"attention_degenerate_equivalence", diff < 1e-5, diff,
          "one chunk covering 16 frames vs full attention"};
}

CheckResult check_posterior_stream(const ModelBundle& b, std::mt19937_64& rng) {
  if (!b.config.flags.causal_posterior) {
    return {"posterior_stream_equivalence", true, 0.0, "skipped: posterior encoder is non-causal"};
  }
  const std::size_t t = 30, dims = b.config.posterior.in_channels - 1;
  AcousticFrames x{normal_tensor({t, dims}, rng), Tensor({t})};
  std::uniform_real_distribution<float> hz(80.0f, 500.0f);
  for (std::size_t i = 0; i < t; ++i) x.f0[i] = i % 5 == 4 ? 0.0f : hz(rng);
  const GaussianParams offline = posterior_encode(x, b.posterior, true);
  PosteriorStream stream(b.posterior);
  std::vector<float> mu;
  for (std::size_t at = 0; at < t; at += 7) {
    const std::size_t end = std::min(t, at + 7);
    AcousticFrames chunk{slice_rows(x.mcep, at, end), Tensor({end - at})};
    for (std::size_t i = at; i < end; ++i) chunk.f0[i - at] = x.f0[i];
    const GaussianParams g = stream.push(chunk);
    mu.insert(mu.end(), g.mu.values().begin(), g.mu.values().end());
  }
  const double diff = max_diff(mu, offline.mu.values());
  return {"posterior_stream_equivalence", diff < 1e-5, diff, "chunked posterior mu vs offline"};
}

CheckResult check_pipeline_length(const ModelBundle& b, std::mt19937_64& rng) {
  ScoreSequence score;
  std::uniform_int_distribution<int> phone(0, static_cast<int>(b.config.frontend.phones.size()) - 1);
  for (std::size_t d : {7u, 0u, 12u, 11u}) {
    score.phonemes.push_back(phone(rng));
    score.durations.push_back(d);
  }
  const std::size_t expected = 30 * b.config.generator.hop();
  std::string detail;
  bool ok = true;
  for (SynthMode mode : {SynthMode::kParallel, SynthMode::kSemi, SynthMode::kFull}) {
    const std::size_t got = synth(score, b, {.mode = mode, .seed = 1}).waveform.size();
    detail += mode_name(mode) + "=" + std::to_string(got) + " ";
    ok = ok && got == expected;
  }
  return {"pipeline_length_law", ok, 0.0, detail + "(expected " + std::to_string(expected) + ")"};
}

using CheckFn = CheckResult (*)(const ModelBundle&, std::mt19937_64&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> checks = {
      {"generator_stream_equivalence", check_generator_stream},
      {"generator_length_law", check_generator_length},
      {"generator_causality", check_generator_causality},
      {"natural_padding_probe", check_natural_probe},
      {"decoder_chunk_causality", check_decoder_causality},
      {"attention_degenerate_equivalence", check_attention_degenerate},
      {"posterior_stream_equivalence", check_posterior_stream},
      {"pipeline_length_law", check_pipeline_length},
  };
  return checks;
}

}  // namespace

std::vector<std::string> verify_check_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

VerifyReport verify(const ModelBundle& bundle, std::optional<std::vector<std::string>> checks,
                    std::uint64_t seed) {
  const std::vector<std::string> wanted = checks ? *checks : verify_check_names();
  for (const std::string& name : wanted) {
    const auto& r = registry();
    if (std::none_of(r.begin(), r.end(), [&](const auto& e) { return e.first == name; })) {
      throw ConfigError("verify: unknown check '" + name + "'");
    }
  }
  VerifyReport report;
  for (const auto& [name, fn] : registry()) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    std::mt19937_64 rng(seed);
    try {
      report.checks.push_back(fn(bundle, rng));
    } catch (const std::exception& e) {
      report.checks.push_back({name, false, 0.0, std::string("threw: ") + e.what()});
    }
  }
  return report;
}

namespace {

json metrics_json(const StreamMetrics& m) {
  return {{"latency_s", m.latency_s}, {"process_time_s", m.process_time_s},
          {"audio_s", m.audio_s}, {"rtf", m.rtf}};
}

}  // namespace

std::string metrics_to_json(const StreamMetrics& m) { return metrics_json(m).dump(2) + "\n"; }

std::string bench_to_json(const BenchReport& r) {
  json j = {{"mode", mode_name(r.mode)},
            {"runs", r.runs},
            {"warmup", r.warmup},
            {"median", metrics_json(r.median)},
            {"machine",
             {{"cpu", r.machine.cpu},
              {"hardware_threads", r.machine.hardware_threads},
              {"compiler", r.machine.compiler},
              {"build_type", r.machine.build_type}}}};
  return j.dump(2) + "\n";
}

std::string verify_to_json(const VerifyReport& r) {
  json checks = json::array();
  for (const CheckResult& c : r.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"max_diff", c.max_diff},
                      {"detail", c.detail}});
  }
  json j = {{"all_passed", r.all_passed()}, {"checks", checks}};
  return j.dump(2) + "\n";
}

}  // namespace chunkstream
