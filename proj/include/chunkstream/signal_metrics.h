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

#ifndef CHUNKSTREAM_SIGNAL_METRICS_H_
#define CHUNKSTREAM_SIGNAL_METRICS_H_

#include <cstddef>
#include <optional>
#include <span>

#include "chunkstream/tensor.h"

namespace chunkstream {

struct MelConfig {
  int sample_rate = 44100;
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t win_length = 2048;
  std::size_t n_mels = 80;
  double fmin = 0.0;
  double fmax = 22050.0;
  double log_floor = 1e-5;

  void validate() const;
};

// Slaney-style mel filterbank, [n_mels x (n_fft / 2 + 1)], each triangle
// scaled by 2 / (upper edge - lower edge) in Hz.
Tensor mel_filterbank(const MelConfig& cfg);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Natural-log mel magnitude spectrogram, [frames x n_mels]. Frames are centered
// with reflect padding, giving floor(len / hop) + 1 frames. A signal shorter
// than n_fft is zero padded into a single uncentered frame instead.
Tensor mel_spectrogram(std::span<const float> wav, const MelConfig& cfg);
std::size_t mel_frame_count(std::size_t num_samples, const MelConfig& cfg);

// Mel-cepstral distortion between [T x D] tracks, coefficient 0 excluded.
double mcd(const Tensor& a, const Tensor& b);

struct F0Metrics {
  // Both are empty when no frame is voiced in both tracks; corr is also empty
  // when either common-voiced track is constant.
  std::optional<double> rmse;
  std::optional<double> corr;
  double uv_err = 0.0;
};

// f0 in Hz, 0 meaning unvoiced.
F0Metrics f0_metrics(const Tensor& f0_a, const Tensor& f0_b);

double mse(const Tensor& a, const Tensor& b);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_SIGNAL_METRICS_H_
