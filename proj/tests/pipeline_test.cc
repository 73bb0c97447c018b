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

#include <cmath>
#include <string>
#include <vector>

#include "chunkstream/errors.h"
#include "gtest/gtest.h"
#include "small_model.h"

namespace chunkstream {
namespace {

using testing::small_model_config;

double max_diff(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return worst;
}

ScoreSequence score_with(std::vector<std::size_t> durations, bool notes = true) {
  ScoreSequence s;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    s.phonemes.push_back(static_cast<int>(i % 4));
  }
  if (notes) {
    s.notes = std::vector<int>();
    for (std::size_t i = 0; i < durations.size(); ++i) s.notes->push_back(i % 3 ? 60 + i : -1);
  }
  s.durations = std::move(durations);
  return s;
}

TEST(LatentNoiseTest, SeededAndFrameOrdered) {
  const Tensor a = latent_noise(10, 3, 5);
  EXPECT_EQ(a, latent_noise(10, 3, 5));
  EXPECT_NE(a, latent_noise(10, 3, 6));
  // A longer draw extends a shorter one.
  EXPECT_EQ(slice_rows(latent_noise(12, 3, 5), 0, 10), a);
}

TEST(ModeTest, Names) {
  for (SynthMode m : {SynthMode::kParallel, SynthMode::kSemi, SynthMode::kFull}) {
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  }
  EXPECT_THROW(parse_mode("fast"), ConfigError);
}

class SmallPipelineTest : public ::testing::Test {
 protected:
  SmallPipelineTest() : bundle_(make_random_bundle(small_model_config(), 11)) {}
  ModelBundle bundle_;
};

TEST_F(SmallPipelineTest, AllModesEmitFramesTimesHop) {
  const ScoreSequence s = score_with({3, 0, 7, 5, 2});
  for (SynthMode m : {SynthMode::kParallel, SynthMode::kSemi, SynthMode::kFull}) {
    const SynthResult r = synth(s, bundle_, {.mode = m, .seed = 1});
    EXPECT_EQ(r.waveform.size(), 17u * 4u) << mode_name(m);
    for (float v : r.waveform) EXPECT_LT(std::abs(v), 1.0f);
  }
}

TEST_F(SmallPipelineTest, SemiMatchesParallel) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ScoreSequence s = score_with({4, 9, 1, 6, 3, 8});
    const SynthResult par = synth(s, bundle_, {.mode = SynthMode::kParallel, .seed = seed});
    const SynthResult semi = synth(s, bundle_, {.mode = SynthMode::kSemi, .seed = seed});
    EXPECT_LT(max_diff(par.waveform, semi.waveform), 1e-5);
    EXPECT_EQ(semi.audio_chunks, 7u);  // ceil(31 / 5)
  }
}

TEST_F(SmallPipelineTest, DeterministicPerSeed) {
  const ScoreSequence s = score_with({5, 5, 5});
  for (SynthMode m : {SynthMode::kParallel, SynthMode::kSemi, SynthMode::kFull}) {
    const auto a = synth(s, bundle_, {.mode = m, .seed = 9}).waveform;
    EXPECT_EQ(a, synth(s, bundle_, {.mode = m, .seed = 9}).waveform);
    EXPECT_NE(a, synth(s, bundle_, {.mode = m, .seed = 10}).waveform);
  }
}

TEST_F(SmallPipelineTest, PipelinedFullModeMatchesSequential) {
  const ScoreSequence s = score_with({6, 6, 6, 6, 3});
  const SynthResult seq = synth(s, bundle_, {.mode = SynthMode::kFull, .seed = 4});
  const SynthResult pipe =
      synth(s, bundle_, {.mode = SynthMode::kFull, .seed = 4, .pipelined = true});
  EXPECT_EQ(seq.waveform, pipe.waveform);
  EXPECT_EQ(seq.audio_chunks, pipe.audio_chunks);
  EXPECT_EQ(seq.frames_before_first_audio, pipe.frames_before_first_audio);
}

TEST_F(SmallPipelineTest, FullModeReleasesAudioAfterChunkPlusRightContext) {
  const SynthResult r = synth(score_with({10, 10, 7}), bundle_, {.mode = SynthMode::kFull});
  EXPECT_EQ(r.frames_before_first_audio, 5u + 2u);
  EXPECT_EQ(r.audio_chunks, 6u);  // ceil(27 / 5)
}

TEST_F(SmallPipelineTest, MetricsAreConsistent) {
  for (SynthMode m : {SynthMode::kParallel, SynthMode::kSemi, SynthMode::kFull}) {
    const StreamMetrics x = synth(score_with({8, 8}), bundle_, {.mode = m}).metrics;
    EXPECT_GT(x.latency_s, 0.0);
    EXPECT_LE(x.latency_s, x.process_time_s);
    EXPECT_DOUBLE_EQ(x.audio_s, 64.0 / 16000.0);
    EXPECT_DOUBLE_EQ(x.rtf, x.process_time_s / x.audio_s);
  }
}

TEST_F(SmallPipelineTest, RejectsEmptyScore) {
  EXPECT_THROW(synth(ScoreSequence{}, bundle_, {}), DomainError);
  EXPECT_THROW(synth(score_with({0, 0}), bundle_, {}), DomainError);
}

TEST_F(SmallPipelineTest, BenchCountsRunsAndRecordsMachine) {
  const std::vector<ScoreSequence> scores = {score_with({4, 4}), score_with({9})};
  const BenchReport r = bench(scores, bundle_, {.mode = SynthMode::kSemi}, 3, 1);
  EXPECT_EQ(r.runs, 6u);
  EXPECT_EQ(r.warmup, 1u);
  EXPECT_LE(r.median.latency_s, r.median.process_time_s);
  EXPECT_GT(r.median.rtf, 0.0);
  EXPECT_GT(r.machine.hardware_threads, 0u);
  EXPECT_FALSE(r.machine.cpu.empty());
  EXPECT_THROW(bench({}, bundle_, {}, 1, 0), DomainError);
}

TEST(MedianTest, OddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(median({}), DomainError);
}

TEST_F(SmallPipelineTest, VerifyPassesOnRandomBundle) {
  const VerifyReport r = verify(bundle_);
  EXPECT_EQ(r.checks.size(), verify_check_names().size());
  for (const CheckResult& c : r.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  EXPECT_TRUE(r.all_passed());
}

TEST(VerifyTest, FlagsNaturalPaddingOff) {
  ModelConfig cfg = small_model_config();
  cfg.flags.natural_padding = false;
  cfg.sync();
  const VerifyReport r = verify(make_random_bundle(cfg, 3));
  for (const CheckResult& c : r.checks) {
    if (c.name == "natural_padding_probe") {
      EXPECT_FALSE(c.passed);
      EXPECT_NE(c.detail.find("boundary mismatch"), std::string::npos);
    } else {
      EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
  }
  EXPECT_FALSE(r.all_passed());
}

TEST(VerifyTest, SelectionHandling) {
  const ModelBundle b = make_random_bundle(small_model_config(), 4);
  EXPECT_TRUE(verify(b, std::vector<std::string>{}).checks.empty());
  const VerifyReport one = verify(b, std::vector<std::string>{"generator_length_law"});
  ASSERT_EQ(one.checks.size(), 1u);
  EXPECT_EQ(one.checks[0].name, "generator_length_law");
  EXPECT_THROW(verify(b, std::vector<std::string>{"nope"}), ConfigError);
}

TEST(VerifyTest, NonCausalPosteriorIsSkipped) {
  ModelConfig cfg = small_model_config();
  cfg.flags.causal_posterior = false;
  const VerifyReport r =
      verify(make_random_bundle(cfg, 5), std::vector<std::string>{"posterior_stream_equivalence"});
  ASSERT_EQ(r.checks.size(), 1u);
  EXPECT_TRUE(r.checks[0].passed);
  EXPECT_NE(r.checks[0].detail.find("skipped"), std::string::npos);
}

TEST(PaperConfigPipelineTest, TwentyFramesAtHop512) {
  const ModelBundle b = make_random_bundle(default_model_config(512), 1);
  ScoreSequence s;
  s.phonemes = {1, 2, 3};
  s.notes = std::vector<int>{60, 62, 64};
  s.durations = {8, 7, 5};
  std::vector<float> parallel;
  for (SynthMode m : {SynthMode::kParallel, SynthMode::kSemi, SynthMode::kFull}) {
    const SynthResult r = synth(s, b, {.mode = m, .seed = 2});
    EXPECT_EQ(r.waveform.size(), 10240u) << mode_name(m);
    if (m == SynthMode::kParallel) parallel = r.waveform;
    if (m == SynthMode::kSemi) {
      EXPECT_LT(max_diff(parallel, r.waveform), 1e-5);
    }
  }
}

TEST(PaperConfigPipelineTest, FirstAudioAfter24Frames) {
  const ModelBundle b = make_random_bundle(default_model_config(512), 1);
  ScoreSequence s;
  s.phonemes = {1, 2};
  s.durations = {30, 20};
  const SynthResult r = synth(s, b, {.mode = SynthMode::kFull});
  EXPECT_EQ(r.frames_before_first_audio, 24u);
  EXPECT_EQ(r.waveform.size(), 50u * 512u);
}

}  // namespace
}  // namespace chunkstream
