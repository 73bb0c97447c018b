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

#ifndef CHUNKSTREAM_ACOUSTIC_FRONT_H_
#define CHUNKSTREAM_ACOUSTIC_FRONT_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chunkstream/causal_conv.h"
#include "chunkstream/signal_metrics.h"
#include "chunkstream/tensor.h"

namespace chunkstream {

// One entry per phone. `notes` is absent for speech; inside a singing score a
// value of -1 marks a phone without a note.
struct ScoreSequence {
  std::vector<int> phonemes;
  std::optional<std::vector<int>> notes;
  std::vector<std::size_t> durations;

  void validate() const;
  std::size_t total_frames() const;
};

// Parses "phoneme<TAB>note_id<TAB>duration_frames" lines. note_id is a MIDI
// pitch or "-". Blank lines and lines starting with '#' are skipped.
ScoreSequence parse_score(std::string_view text,
                          std::span<const std::string> phone_set);
ScoreSequence load_score(const std::string& path,
                         std::span<const std::string> phone_set);

struct AcousticFrames {
  Tensor mcep;  // [T x D]
  Tensor f0;    // [T], Hz, 0 = unvoiced

  void validate() const;
};

struct GaussianParams {
  Tensor mu;     // [T x d]
  Tensor sigma;  // [T x d], > 0

  void validate() const;
};

// Frame t receives the vector of the phone whose cumulative duration interval
// contains t.
Tensor length_regulate(const Tensor& phone_vectors,
                       std::span<const std::size_t> durations);

double midi_to_hz(int note);

// Embeds a score into decoder input frames: phone and note embeddings summed,
// length regulated, then a log-F0 channel derived from the note is appended
// and projected back to the hidden size.
struct PriorFrontWeights {
  Tensor phone_embedding;  // [num_phones x d]
  Tensor note_embedding;   // [num_notes x d]
  Tensor input_proj;       // [(d + 1) x d]
  Tensor input_bias;       // [d]
  Tensor prior_proj;       // [d x 2 d_z]
  Tensor prior_bias;       // [2 d_z]

  void validate() const;
  std::size_t hidden() const { return phone_embedding.cols(); }
  std::size_t latent_dim() const { return prior_proj.cols() / 2; }
};

Tensor prior_frames(const ScoreSequence& score, const PriorFrontWeights& w);

// Per-frame projection of decoder output to the frame-level prior; the second
// half of the channels is log sigma.
GaussianParams prior_params(const Tensor& decoder_out,
                            const PriorFrontWeights& w);

struct PosteriorConfig {
  std::size_t in_channels = 81;  // mcep dims + log-F0
  std::size_t hidden = 192;
  std::size_t kernel_size = 5;
  std::size_t num_layers = 4;
  std::size_t latent_dim = 192;

  void validate() const;
};

// conv -> LayerNorm over channels -> leaky ReLU, repeated, then a 1x1
// projection to [mu, log sigma].
struct PosteriorWeights {
  std::vector<ConvLayer> convs;
  std::vector<Tensor> norm_gamma;
  std::vector<Tensor> norm_beta;
  ConvLayer proj;

  void validate(const PosteriorConfig& cfg) const;
};

// [T x in_channels] encoder input: mcep followed by log F0 (0 if unvoiced).
Tensor posterior_input(const AcousticFrames& x);

GaussianParams posterior_encode(const AcousticFrames& x,
                                const PosteriorWeights& w, bool causal);

// Chunkwise causal posterior encoder.
class PosteriorStream {
 public:
  explicit PosteriorStream(const PosteriorWeights& w);
  GaussianParams push(const AcousticFrames& chunk);

 private:
  const PosteriorWeights& w_;
  std::vector<ConvState> states_;
};

// z = mu + sigma * eps.
Tensor sample_latent(const GaussianParams& g, const Tensor& eps);

// KL(q || p) of diagonal Gaussians, summed over dims and averaged over frames.
double kl_gaussian(const GaussianParams& q, const GaussianParams& p);

struct AmLosses {
  double l_f0 = 0.0;
  double l_mcep = 0.0;
  double l_dur = 0.0;
  double l_am = 0.0;
};

// F0 and mcep are mean absolute errors, duration is the mean squared error
// between predicted log durations and log(dur + 1).
AmLosses am_losses(const Tensor& pred_f0, const Tensor& gt_f0,
                   const Tensor& pred_mcep, const Tensor& gt_mcep,
                   const Tensor& pred_logdur, const Tensor& gt_dur);

// Mean absolute log-mel difference; the longer signal's extra frames are
// dropped.
double recon_loss(std::span<const float> y, std::span<const float> y_hat,
                  const MelConfig& cfg);

struct LossReport {
  double l_f0 = 0.0;
  double l_mcep = 0.0;
  double l_dur = 0.0;
  double l_am = 0.0;
  double l_kl = 0.0;
  double l_recon = 0.0;
  std::optional<double> l_adv_g;
  std::optional<double> l_fm_g;
  double total = 0.0;

  // Throws DomainError when a sum or sign invariant is broken.
  void check() const;
};

LossReport make_loss_report(const AmLosses& am, double l_kl, double l_recon,
                            std::optional<double> l_adv_g = std::nullopt,
                            std::optional<double> l_fm_g = std::nullopt);

double total_loss(const LossReport& parts);

}  // namespace chunkstream

#endif  // CHUNKSTREAM_ACOUSTIC_FRONT_H_
