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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

// Planning in FFTW is not thread safe; execution with new arrays is.
std::mutex fftw_planner_mutex;

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearStep = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearStep;
const double kLogStep = std::log(6.4) / 27.0;

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

// Reflect index into [0, n) the way numpy's "reflect" pad does (edge sample
// not repeated).
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (len == 1) return 0;
  const std::ptrdiff_t period = 2 * (len - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - i);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes " + a.shape_string() +
                     " and " + b.shape_string() + " differ");
  }
}

}  // namespace

void MelConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("mel: sample_rate must be positive");
  if (n_fft < 2 || hop == 0 || n_mels == 0) {
    throw ConfigError("mel: n_fft >= 2, hop >= 1 and n_mels >= 1 required");
  }
  if (win_length == 0 || win_length > n_fft) {
    throw ConfigError("mel: win_length must be in [1, n_fft]");
  }
  if (!(fmin >= 0.0 && fmax > fmin && fmax <= sample_rate / 2.0)) {
    throw ConfigError("mel: need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw ConfigError("mel: log_floor must be positive");
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearStep;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearStep;
  return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

Tensor mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.n_fft / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  }
  Tensor fb({cfg.n_mels, bins});
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    const double norm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      fb.at(m, k) = static_cast<float>(norm * std::max(0.0, std::min(rise, fall)));
    }
  }
  return fb;
}

std::size_t mel_frame_count(std::size_t num_samples, const MelConfig& cfg) {
  if (num_samples < cfg.n_fft) return 1;
  return num_samples / cfg.hop + 1;
}

Tensor mel_spectrogram(std::span<const float> wav, const MelConfig& cfg) {
  cfg.validate();
  for (float v : wav) {
    if (!std::isfinite(v)) throw DomainError("mel: waveform is not finite");
  }
  const std::size_t n_fft = cfg.n_fft, bins = n_fft / 2 + 1;
  const bool centered = wav.size() >= n_fft;
  const std::size_t frames = mel_frame_count(wav.size(), cfg);
  const auto pad = static_cast<std::ptrdiff_t>(centered ? n_fft / 2 : 0);

  // Window of win_length samples centered inside the n_fft frame.
  std::vector<double> window(n_fft, 0.0);
  const std::vector<double> hann = periodic_hann(cfg.win_length);
  const std::size_t offset = (n_fft - cfg.win_length) / 2;
  std::copy(hann.begin(), hann.end(), window.begin() + offset);

  double* in = fftw_alloc_real(n_fft);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in, out, FFTW_ESTIMATE);
  }

  const Tensor fb = mel_filterbank(cfg);
  Tensor mel({frames, cfg.n_mels});
  std::vector<double> mag(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto start = static_cast<std::ptrdiff_t>(f * cfg.hop) - pad;
    for (std::size_t i = 0; i < n_fft; ++i) {
      double sample = 0.0;
      if (centered) {
        sample = wav[reflect(start + static_cast<std::ptrdiff_t>(i), wav.size())];
      } else if (i < wav.size()) {
        sample = wav[i];
      }
      in[i] = sample * window[i];
    }
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k < bins; ++k) energy += fb.at(m, k) * mag[k];
      mel.at(f, m) = static_cast<float>(std::log(std::max(energy, cfg.log_floor)));
    }
  }

  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return mel;
}

double mcd(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mcd");
  if (a.rank() != 2 || a.rows() == 0) throw ShapeError("mcd: need [T x D], T >= 1");
  const double scale = 10.0 / std::numbers::ln10;
  double total = 0.0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    double sq = 0.0;
    for (std::size_t d = 1; d < a.cols(); ++d) {
      const double diff = static_cast<double>(a.at(t, d)) - b.at(t, d);
      sq += diff * diff;
    }
    total += scale * std::sqrt(2.0 * sq);
  }
  return total / a.rows();
}

F0Metrics f0_metrics(const Tensor& f0_a, const Tensor& f0_b) {
  require_same_shape(f0_a, f0_b, "f0_metrics");
  if (f0_a.empty()) throw ShapeError("f0_metrics: empty tracks");
  F0Metrics m;
  std::vector<double> va, vb;
  std::size_t disagree = 0;
  for (std::size_t i = 0; i < f0_a.size(); ++i) {
    if (f0_a[i] < 0.0f || f0_b[i] < 0.0f) {
      throw DomainError("f0_metrics: negative f0");
    }
    const bool voiced_a = f0_a[i] > 0.0f, voiced_b = f0_b[i] > 0.0f;
    if (voiced_a != voiced_b) ++disagree;
    if (voiced_a && voiced_b) {
      va.push_back(f0_a[i]);
      vb.push_back(f0_b[i]);
    }
  }
  m.uv_err = static_cast<double>(disagree) / f0_a.size();
  if (va.empty()) return m;

  const double n = static_cast<double>(va.size());
  double sq = 0.0, mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    sq += (va[i] - vb[i]) * (va[i] - vb[i]);
    mean_a += va[i];
    mean_b += vb[i];
  }
  m.rmse = std::sqrt(sq / n);
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    cov += (va[i] - mean_a) * (vb[i] - mean_b);
    var_a += (va[i] - mean_a) * (va[i] - mean_a);
    var_b += (vb[i] - mean_b) * (vb[i] - mean_b);
  }
  if (var_a > 0.0 && var_b > 0.0) m.corr = cov / std::sqrt(var_a * var_b);
  return m;
}

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.empty()) throw ShapeError("mse: empty tensors");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    total += diff * diff;
  }
  return total / a.size();
}

}  // namespace chunkstream
