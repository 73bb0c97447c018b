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

#include "chunkstream/signal_metrics.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "chunkstream/errors.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace chunkstream {
namespace {

MelConfig small_mel() {
  MelConfig cfg;
  cfg.sample_rate = 16000;
  cfg.n_fft = 64;
  cfg.win_length = 64;
  cfg.hop = 16;
  cfg.n_mels = 10;
  cfg.fmax = 8000.0;
  return cfg;
}

std::vector<float> random_wav(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<float> dist(-0.5f, 0.5f);
  std::vector<float> wav(n);
  for (float& v : wav) v = dist(rng);
  return wav;
}

TEST(MelScaleTest, SlaneyBreakpoints) {
  EXPECT_DOUBLE_EQ(hz_to_mel(500.0), 7.5);
  EXPECT_DOUBLE_EQ(hz_to_mel(1000.0), 15.0);
  EXPECT_NEAR(hz_to_mel(6400.0), 42.0, 1e-9);  // 15 + 27 * ln(6.4)/ln(6.4)
  for (double hz : {10.0, 999.0, 1000.0, 4321.0, 22050.0}) {
    EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9 * hz);
  }
}

TEST(MelFilterbankTest, WideTrianglesHaveUnitArea) {
  const MelConfig cfg;
  const Tensor fb = mel_filterbank(cfg);
  ASSERT_EQ(fb.dims(), (std::vector<std::size_t>{80, 1025}));
  const double df = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  for (std::size_t m = 40; m < 80; ++m) {
    double area = 0.0;
    for (std::size_t k = 0; k < fb.cols(); ++k) area += fb.at(m, k) * df;
    EXPECT_NEAR(area, 1.0, 0.05) << "band " << m;
  }
}

TEST(MelSpectrogramTest, SilenceIsLogFloor) {
  const MelConfig cfg = small_mel();
  const Tensor mel = mel_spectrogram(std::vector<float>(200, 0.0f), cfg);
  for (float v : mel.values()) EXPECT_FLOAT_EQ(v, std::log(1e-5f));
}

TEST(MelSpectrogramTest, FrameCountLaw) {
  const MelConfig cfg = small_mel();
  for (std::size_t len : {64u, 65u, 79u, 80u, 81u, 500u, 1024u}) {
    std::vector<float> wav(len, 0.1f);
    EXPECT_EQ(mel_spectrogram(wav, cfg).rows(), len / cfg.hop + 1) << len;
  }
  EXPECT_EQ(mel_spectrogram(std::vector<float>(10, 0.1f), cfg).rows(), 1u);
}

// Direct DFT of one reflect-padded, Hann-windowed frame.
std::vector<double> naive_frame_mel(const std::vector<float>& wav,
                                    std::size_t frame, const MelConfig& cfg) {
  const std::size_t n = cfg.n_fft;
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(wav.size());
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::ptrdiff_t j = static_cast<std::ptrdiff_t>(frame * cfg.hop + i) -
                       static_cast<std::ptrdiff_t>(n / 2);
    if (j < 0) j = -j;
    if (j >= len) j = 2 * (len - 1) - j;
    x[i] = wav[j] * (0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / n));
  }
  const Tensor fb = mel_filterbank(cfg);
  std::vector<double> out(cfg.n_mels, 0.0);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      re += x[i] * std::cos(2 * std::numbers::pi * k * i / n);
      im -= x[i] * std::sin(2 * std::numbers::pi * k * i / n);
    }
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      out[m] += fb.at(m, k) * std::hypot(re, im);
    }
  }
  for (double& v : out) v = std::log(std::max(v, cfg.log_floor));
  return out;
}

TEST(MelSpectrogramTest, MatchesDirectDft) {
  std::mt19937 rng(1);
  const MelConfig cfg = small_mel();
  const std::vector<float> wav = random_wav(301, rng);
  const Tensor mel = mel_spectrogram(wav, cfg);
  for (std::size_t f : {std::size_t{0}, std::size_t{1}, std::size_t{9}, mel.rows() - 1}) {
    const auto ref = naive_frame_mel(wav, f, cfg);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      EXPECT_NEAR(mel.at(f, m), ref[m], 1e-4) << f << "," << m;
    }
  }
}

TEST(MelSpectrogramTest, ToneAtBandCenterPeaksNearThatBand) {
  MelConfig cfg;
  cfg.sample_rate = 16000;
  cfg.fmax = 8000.0;
  cfg.hop = 256;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  for (std::size_t band : {20u, 45u, 70u}) {
    const double hz = mel_to_hz(lo + (hi - lo) * (band + 1) / (cfg.n_mels + 1));
    std::vector<float> wav(8000);
    for (std::size_t i = 0; i < wav.size(); ++i) {
      wav[i] = 0.5f * std::sin(2 * std::numbers::pi * hz * i / cfg.sample_rate);
    }
    const Tensor mel = mel_spectrogram(wav, cfg);
    const std::size_t mid = mel.rows() / 2;
    std::size_t best = 0;
    for (std::size_t m = 1; m < cfg.n_mels; ++m) {
      if (mel.at(mid, m) > mel.at(mid, best)) best = m;
    }
    EXPECT_LE(std::abs(static_cast<int>(best) - static_cast<int>(band)), 1);
  }
}

TEST(MelSpectrogramTest, DoublingAmplitudeAddsLnTwo) {
  std::mt19937 rng(2);
  const MelConfig cfg = small_mel();
  std::vector<float> wav = random_wav(256, rng);
  const Tensor a = mel_spectrogram(wav, cfg);
  for (float& v : wav) v *= 2.0f;
  const Tensor b = mel_spectrogram(wav, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > std::log(1e-3f)) {
      EXPECT_NEAR(b[i] - a[i], std::log(2.0), 1e-4);
    }
  }
}

TEST(MelSpectrogramTest, RejectsNonFiniteAndBadConfig) {
  MelConfig cfg = small_mel();
  EXPECT_THROW(mel_spectrogram(std::vector<float>{0.0f, NAN}, cfg), DomainError);
  cfg.fmax = 9000.0;
  EXPECT_THROW(mel_spectrogram(std::vector<float>(100), cfg), ConfigError);
}

TEST(McdTest, Examples) {
  const Tensor a = Tensor::matrix(1, 3, {5, 1, 2});
  EXPECT_EQ(mcd(a, a), 0.0);
  EXPECT_NEAR(mcd(a, Tensor::matrix(1, 3, {5, 2, 2})),
              10.0 / std::log(10.0) * std::sqrt(2.0), 1e-9);
  // c0 is ignored.
  EXPECT_EQ(mcd(a, Tensor::matrix(1, 3, {-7, 1, 2})), 0.0);
  std::mt19937 rng(3);
  const Tensor x = testing::random_tensor({9, 5}, rng);
  const Tensor y = testing::random_tensor({9, 5}, rng);
  EXPECT_EQ(mcd(x, y), mcd(y, x));
  EXPECT_GT(mcd(x, y), 0.0);
  EXPECT_THROW(mcd(x, Tensor({9, 4})), ShapeError);
}

TEST(F0MetricsTest, IdenticalTracks) {
  const Tensor f0 = Tensor::vector({0, 100, 120, 150, 0, 90});
  const F0Metrics m = f0_metrics(f0, f0);
  EXPECT_EQ(*m.rmse, 0.0);
  EXPECT_NEAR(*m.corr, 1.0, 1e-12);
  EXPECT_EQ(m.uv_err, 0.0);
}

TEST(F0MetricsTest, ConstantOffset) {
  const Tensor a = Tensor::vector({0, 100, 120, 150, 0, 90});
  const Tensor b = Tensor::vector({0, 110, 130, 160, 0, 100});
  const F0Metrics m = f0_metrics(a, b);
  EXPECT_NEAR(*m.rmse, 10.0, 1e-9);
  EXPECT_NEAR(*m.corr, 1.0, 1e-12);
}

TEST(F0MetricsTest, VoicingMismatchRate) {
  Tensor a({10}, 100.0f), b({10}, 100.0f);
  for (std::size_t i = 0; i < 10; ++i) a[i] = b[i] = 100.0f + i;
  b[3] = 0.0f;
  EXPECT_NEAR(f0_metrics(a, b).uv_err, 0.1, 1e-12);
}

TEST(F0MetricsTest, NoCommonVoicedFramesLeavesRmseUnset) {
  const F0Metrics m = f0_metrics(Tensor::vector({100, 0}), Tensor::vector({0, 100}));
  EXPECT_FALSE(m.rmse.has_value());
  EXPECT_FALSE(m.corr.has_value());
  EXPECT_EQ(m.uv_err, 1.0);
}

TEST(F0MetricsTest, CorrInvariantUnderAffineRescale) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> dist(80.0f, 300.0f);
  Tensor a({50}), b({50});
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = i % 7 == 0 ? 0.0f : dist(rng);
    b[i] = i % 5 == 0 ? 0.0f : dist(rng);
  }
  Tensor b2 = b;
  for (float& v : b2.values()) {
    if (v > 0.0f) v = 1.5f * v + 20.0f;
  }
  EXPECT_NEAR(*f0_metrics(a, b).corr, *f0_metrics(a, b2).corr, 1e-6);
}

TEST(MseTest, Examples) {
  const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(a, Tensor::matrix(2, 2, {3, 4, 5, 6})), 4.0);
  std::mt19937 rng(5);
  const Tensor x = testing::random_tensor({4, 3}, rng);
  const Tensor y = testing::random_tensor({4, 3}, rng);
  EXPECT_EQ(mse(x, y), mse(y, x));
  EXPECT_THROW(mse(x, a), ShapeError);
}

}  // namespace
}  // namespace chunkstream
