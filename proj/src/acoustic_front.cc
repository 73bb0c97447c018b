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

#include "chunkstream/acoustic_front.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chunkstream/errors.h"

namespace chunkstream {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

Tensor log_f0_column(const Tensor& f0) {
  Tensor col({f0.size(), 1});
  for (std::size_t t = 0; t < f0.size(); ++t) {
    col[t] = f0[t] > 0.0f ? std::log(f0[t]) : 0.0f;
  }
  return col;
}

// Conv output is [C x T]; the rest of the encoder works on [T x C] rows.
Tensor norm_act(const Tensor& channels_by_time, const Tensor& gamma,
                const Tensor& beta) {
  Tensor y = layer_norm(transpose(channels_by_time), gamma, beta);
  activation_inplace(y, Activation::kLeakyRelu);
  return y;
}

GaussianParams split_gaussian(const Tensor& joint, std::size_t d) {
  GaussianParams g{slice_cols(joint, 0, d), slice_cols(joint, d, 2 * d)};
  for (float& v : g.sigma.values()) v = std::exp(v);
  return g;
}

}  // namespace

void ScoreSequence::validate() const {
  if (phonemes.empty()) throw DomainError("score: no phones");
  if (durations.size() != phonemes.size() ||
      (notes && notes->size() != phonemes.size())) {
    throw ShapeError("score: phonemes, notes and durations differ in length");
  }
  if (total_frames() == 0) throw DomainError("score: all durations are zero");
  for (int p : phonemes) {
    if (p < 0) throw DomainError("score: negative phoneme id");
  }
  if (notes) {
    for (int n : *notes) {
      if (n < -1) throw DomainError("score: invalid note id");
    }
  }
}

std::size_t ScoreSequence::total_frames() const {
  std::size_t total = 0;
  for (std::size_t d : durations) total += d;
  return total;
}

ScoreSequence parse_score(std::string_view text,
                          std::span<const std::string> phone_set) {
  ScoreSequence score;
  std::vector<int> notes;
  bool any_note = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const std::string where = "score line " + std::to_string(line_no) + ": ";
    const auto fields = split_tabs(line);
    if (fields.size() != 3) throw FormatError(where + "expected 3 tab-separated fields");
    const auto it = std::find(phone_set.begin(), phone_set.end(), fields[0]);
    if (it == phone_set.end()) {
      throw FormatError(where + "unknown phoneme '" + std::string(fields[0]) + "'");
    }
    score.phonemes.push_back(static_cast<int>(it - phone_set.begin()));

    int note = -1;
    if (fields[1] != "-") {
      if (!parse_number(fields[1], note) || note < 0 || note > 127) {
        throw FormatError(where + "note must be a MIDI number 0..127 or '-'");
      }
      any_note = true;
    }
    notes.push_back(note);

    std::size_t dur = 0;
    if (!parse_number(fields[2], dur)) {
      throw FormatError(where + "duration must be a nonnegative integer");
    }
    score.durations.push_back(dur);
  }
  if (any_note) score.notes = std::move(notes);
  score.validate();
  return score;
}

ScoreSequence load_score(const std::string& path,
                         std::span<const std::string> phone_set) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open score " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_score(buf.str(), phone_set);
}

void AcousticFrames::validate() const {
  require(mcep.rank() == 2 && mcep.rows() >= 1, "acoustic frames: mcep must be [T x D], T >= 1");
  require(f0.rank() == 1 && f0.size() == mcep.rows(), "acoustic frames: f0 must be [T]");
  for (float v : f0.values()) {
    if (!(v >= 0.0f)) throw DomainError("acoustic frames: f0 must be >= 0");
  }
}

void GaussianParams::validate() const {
  require(mu.rank() == 2 && mu.same_shape(sigma), "gaussian: mu and sigma must be equal [T x d]");
  for (float s : sigma.values()) {
    if (!(s > 0.0f)) throw DomainError("gaussian: sigma must be positive");
  }
}

Tensor length_regulate(const Tensor& phone_vectors,
                       std::span<const std::size_t> durations) {
  require(phone_vectors.rank() == 2 && phone_vectors.rows() == durations.size(),
          "length_regulate: need one duration per phone row");
  std::size_t total = 0;
  for (std::size_t d : durations) total += d;
  if (total == 0) throw DomainError("length_regulate: all durations are zero");
  const std::size_t dim = phone_vectors.cols();
  Tensor out({total, dim});
  std::size_t t = 0;
  for (std::size_t p = 0; p < durations.size(); ++p) {
    for (std::size_t r = 0; r < durations[p]; ++r, ++t) {
      std::copy_n(phone_vectors.row(p).data(), dim, out.row(t).data());
    }
  }
  return out;
}

double midi_to_hz(int note) { return 440.0 * std::exp2((note - 69) / 12.0); }

void PriorFrontWeights::validate() const {
  require(phone_embedding.rank() == 2 && phone_embedding.rows() >= 1,
          "prior front: phone_embedding must be [num_phones x d]");
  const std::size_t d = hidden();
  require(note_embedding.rank() == 2 && note_embedding.cols() == d,
          "prior front: note_embedding must be [num_notes x d]");
  require(input_proj.dims() == std::vector<std::size_t>{d + 1, d},
          "prior front: input_proj must be [(d+1) x d]");
  require(input_bias.dims() == std::vector<std::size_t>{d}, "prior front: input_bias must be [d]");
  require(prior_proj.rank() == 2 && prior_proj.rows() == d &&
              prior_proj.cols() % 2 == 0 && prior_proj.cols() > 0,
          "prior front: prior_proj must be [d x 2 d_z]");
  require(prior_bias.dims() == std::vector<std::size_t>{prior_proj.cols()},
          "prior front: prior_bias must be [2 d_z]");
}

Tensor prior_frames(const ScoreSequence& score, const PriorFrontWeights& w) {
  score.validate();
  w.validate();
  const std::size_t d = w.hidden(), phones = score.phonemes.size();
  Tensor phone_vec({phones, d});
  Tensor f0({phones});
  for (std::size_t p = 0; p < phones; ++p) {
    const auto id = static_cast<std::size_t>(score.phonemes[p]);
    if (id >= w.phone_embedding.rows()) {
      throw DomainError("prior front: phoneme id " + std::to_string(id) + " out of range");
    }
    auto row = phone_vec.row(p);
    for (std::size_t j = 0; j < d; ++j) row[j] = w.phone_embedding.at(id, j);
    const int note = score.notes ? (*score.notes)[p] : -1;
    if (note >= 0) {
      if (static_cast<std::size_t>(note) >= w.note_embedding.rows()) {
        throw DomainError("prior front: note id " + std::to_string(note) + " out of range");
      }
      for (std::size_t j = 0; j < d; ++j) row[j] += w.note_embedding.at(note, j);
      f0[p] = static_cast<float>(midi_to_hz(note));
    }
  }
  const Tensor f0_frames = length_regulate(f0.reshaped({phones, 1}), score.durations);
  const Tensor parts[] = {length_regulate(phone_vec, score.durations),
                          log_f0_column(f0_frames.reshaped({f0_frames.rows()}))};
  Tensor out = matmul(concat_cols(parts), w.input_proj);
  add_row_bias(out, w.input_bias);
  return out;
}

GaussianParams prior_params(const Tensor& decoder_out, const PriorFrontWeights& w) {
  require(decoder_out.rank() == 2 && decoder_out.cols() == w.hidden(),
          "prior_params: decoder output must be [T x d]");
  Tensor joint = matmul(decoder_out, w.prior_proj);
  add_row_bias(joint, w.prior_bias);
  return split_gaussian(joint, w.latent_dim());
}

void PosteriorConfig::validate() const {
  if (in_channels == 0 || hidden == 0 || kernel_size == 0 || num_layers == 0 ||
      latent_dim == 0) {
    throw ConfigError("posterior: all sizes must be positive");
  }
}

void PosteriorWeights::validate(const PosteriorConfig& cfg) const {
  cfg.validate();
  require(convs.size() == cfg.num_layers && norm_gamma.size() == cfg.num_layers &&
              norm_beta.size() == cfg.num_layers,
          "posterior: one conv and norm per layer");
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const ConvSpec& s = convs[i].spec;
    require(!s.transposed && s.kernel_size == cfg.kernel_size &&
                s.in_channels == (i == 0 ? cfg.in_channels : cfg.hidden) &&
                s.out_channels == cfg.hidden,
            "posterior: conv " + std::to_string(i) + " geometry mismatch");
    convs[i].validate();
    require(norm_gamma[i].dims() == std::vector<std::size_t>{cfg.hidden} &&
                norm_beta[i].dims() == std::vector<std::size_t>{cfg.hidden},
            "posterior: norm " + std::to_string(i) + " must be [hidden]");
  }
  require(proj.spec.in_channels == cfg.hidden && proj.spec.kernel_size == 1 &&
              proj.spec.out_channels == 2 * cfg.latent_dim,
          "posterior: proj must be 1x1 hidden -> 2 latent_dim");
  proj.validate();
}

Tensor posterior_input(const AcousticFrames& x) {
  x.validate();
  const Tensor parts[] = {x.mcep, log_f0_column(x.f0)};
  return concat_cols(parts);
}

GaussianParams posterior_encode(const AcousticFrames& x,
                                const PosteriorWeights& w, bool causal) {
  Tensor h = posterior_input(x);
  require(!w.convs.empty() && h.cols() == w.convs[0].spec.in_channels,
          "posterior_encode: input channels do not match weights");
  for (std::size_t i = 0; i < w.convs.size(); ++i) {
    const Tensor ct = transpose(h);
    const Tensor y = causal ? causal_conv1d_offline(ct, w.convs[i])
                            : centered_conv1d(ct, w.convs[i]);
    h = norm_act(y, w.norm_gamma[i], w.norm_beta[i]);
  }
  const Tensor joint = transpose(causal_conv1d_offline(transpose(h), w.proj));
  return split_gaussian(joint, w.proj.spec.out_channels / 2);
}

PosteriorStream::PosteriorStream(const PosteriorWeights& w) : w_(w) {
  for (const ConvLayer& c : w.convs) states_.push_back(init_state(c.spec));
}

GaussianParams PosteriorStream::push(const AcousticFrames& chunk) {
  Tensor h = posterior_input(chunk);
  require(h.cols() == w_.convs[0].spec.in_channels,
          "posterior stream: input channels do not match weights");
  for (std::size_t i = 0; i < w_.convs.size(); ++i) {
    const Tensor y = causal_conv1d_step(states_[i], transpose(h), w_.convs[i]);
    h = norm_act(y, w_.norm_gamma[i], w_.norm_beta[i]);
  }
  const Tensor joint = transpose(causal_conv1d_offline(transpose(h), w_.proj));
  return split_gaussian(joint, w_.proj.spec.out_channels / 2);
}

Tensor sample_latent(const GaussianParams& g, const Tensor& eps) {
  require(g.mu.same_shape(g.sigma) && g.mu.same_shape(eps),
          "sample_latent: mu, sigma and eps must share a shape");
  Tensor z = g.mu;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += g.sigma[i] * eps[i];
  return z;
}

double kl_gaussian(const GaussianParams& q, const GaussianParams& p) {
  q.validate();
  p.validate();
  require(q.mu.same_shape(p.mu), "kl_gaussian: q and p shapes differ");
  if (q.mu.rows() == 0) throw ShapeError("kl_gaussian: no frames");
  double total = 0.0;
  for (std::size_t i = 0; i < q.mu.size(); ++i) {
    const double sq = q.sigma[i], sp = p.sigma[i];
    const double dm = static_cast<double>(q.mu[i]) - p.mu[i];
    total += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
  }
  return total / q.mu.rows();
}

namespace {

double mean_abs(const Tensor& a, const Tensor& b, const char* what) {
  require(a.same_shape(b) && !a.empty(), std::string(what) + ": shapes differ or empty");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += std::abs(static_cast<double>(a[i]) - b[i]);
  }
  return total / a.size();
}

}  // namespace

AmLosses am_losses(const Tensor& pred_f0, const Tensor& gt_f0,
                   const Tensor& pred_mcep, const Tensor& gt_mcep,
                   const Tensor& pred_logdur, const Tensor& gt_dur) {
  AmLosses l;
  l.l_f0 = mean_abs(pred_f0, gt_f0, "am_losses f0");
  l.l_mcep = mean_abs(pred_mcep, gt_mcep, "am_losses mcep");
  require(pred_logdur.same_shape(gt_dur) && !gt_dur.empty(),
          "am_losses dur: shapes differ or empty");
  double sq = 0.0;
  for (std::size_t i = 0; i < gt_dur.size(); ++i) {
    if (gt_dur[i] < 0.0f) throw DomainError("am_losses: negative duration");
    const double diff = pred_logdur[i] - std::log(static_cast<double>(gt_dur[i]) + 1.0);
    sq += diff * diff;
  }
  l.l_dur = sq / gt_dur.size();
  l.l_am = l.l_f0 + l.l_mcep + l.l_dur;
  return l;
}

double recon_loss(std::span<const float> y, std::span<const float> y_hat,
                  const MelConfig& cfg) {
  const Tensor a = mel_spectrogram(y, cfg), b = mel_spectrogram(y_hat, cfg);
  const std::size_t frames = std::min(a.rows(), b.rows());
  return mean_abs(slice_rows(a, 0, frames), slice_rows(b, 0, frames), "recon_loss");
}

void LossReport::check() const {
  for (double v : {l_f0, l_mcep, l_dur, l_am, l_kl, l_recon}) {
    if (!(v >= 0.0)) throw DomainError("loss report: components must be >= 0");
  }
  if (l_am != l_f0 + l_mcep + l_dur) throw DomainError("loss report: l_am is not the sum of its parts");
  if (total != total_loss(*this)) throw DomainError("loss report: total is inconsistent");
}

LossReport make_loss_report(const AmLosses& am, double l_kl, double l_recon,
                            std::optional<double> l_adv_g,
                            std::optional<double> l_fm_g) {
  LossReport r;
  r.l_f0 = am.l_f0;
  r.l_mcep = am.l_mcep;
  r.l_dur = am.l_dur;
  r.l_am = am.l_f0 + am.l_mcep + am.l_dur;
  r.l_kl = l_kl;
  r.l_recon = l_recon;
  r.l_adv_g = l_adv_g;
  r.l_fm_g = l_fm_g;
  r.total = total_loss(r);
  r.check();
  return r;
}

double total_loss(const LossReport& parts) {
  return parts.l_recon + parts.l_am + parts.l_kl + parts.l_adv_g.value_or(0.0) +
         parts.l_fm_g.value_or(0.0);
}

}  // namespace chunkstream
