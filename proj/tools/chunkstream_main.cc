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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chunkstream/errors.h"
#include "chunkstream/model_io.h"
#include "chunkstream/pipeline.h"
#include "chunkstream/wav_io.h"
#include "json.hpp"

namespace {

using namespace chunkstream;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

int report_error(const std::string& code, const std::string& message) {
  nlohmann::ordered_json j = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  return 1;
}

std::vector<ScoreSequence> load_score_dir(const std::string& dir,
                                          const std::vector<std::string>& phones) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".score") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw IoError("no .score files in " + dir);
  std::sort(files.begin(), files.end());
  std::vector<ScoreSequence> scores;
  for (const auto& f : files) scores.push_back(load_score(f.string(), phones));
  return scores;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming singing voice synthesis engine"};
  app.require_subcommand(1);

  std::string config_path, weights_path, score_path, out_path, metrics_path, mode = "full";
  std::string scores_dir, checks;
  std::optional<std::size_t> chunk_size, left_context, right_context;
  std::uint64_t seed = 0;
  std::size_t repeats = 5, warmup = 1, hop = 512;
  bool pipelined = false;

  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a score to a WAV file");
  synth_cmd->add_option("--config", config_path, "Model config (JSON)")->required();
  synth_cmd->add_option("--weights", weights_path, "Weight file (CSSW)")->required();
  synth_cmd->add_option("--score", score_path, "Score file")->required();
  synth_cmd->add_option("--mode", mode, "parallel, semi or full");
  synth_cmd->add_option("--chunk-size", chunk_size, "Decoder chunk size override");
  synth_cmd->add_option("--left-context", left_context, "Left context override");
  synth_cmd->add_option("--right-context", right_context, "Right context override");
  synth_cmd->add_option("--seed", seed, "Latent noise seed");
  synth_cmd->add_option("--out", out_path, "Output WAV path")->required();
  synth_cmd->add_option("--metrics", metrics_path, "Write latency metrics JSON here");
  synth_cmd->add_flag("--pipelined", pipelined, "Run decoder and generator on two threads");

  auto* bench_cmd = app.add_subcommand("bench", "Median latency, process time and RTF");
  bench_cmd->add_option("--config", config_path)->required();
  bench_cmd->add_option("--weights", weights_path)->required();
  bench_cmd->add_option("--scores", scores_dir, "Directory of .score files")->required();
  bench_cmd->add_option("--mode", mode, "parallel, semi or full");
  bench_cmd->add_option("--repeats", repeats, "Recorded runs per score");
  bench_cmd->add_option("--warmup", warmup, "Unrecorded runs per score");
  bench_cmd->add_option("--seed", seed);
  bench_cmd->add_option("--out", out_path, "Write the report here instead of stdout");
  bench_cmd->add_flag("--pipelined", pipelined);

  auto* verify_cmd = app.add_subcommand("verify", "Run equivalence and causality checks");
  verify_cmd->add_option("--config", config_path)->required();
  verify_cmd->add_option("--weights", weights_path)->required();
  verify_cmd->add_option("--checks", checks, "Comma-separated subset of checks");
  verify_cmd->add_option("--seed", seed);

  auto* random_cmd = app.add_subcommand("make-random-model", "Write seeded random weights");
  random_cmd->add_option("--config", config_path)->required();
  random_cmd->add_option("--seed", seed);
  random_cmd->add_option("--out", out_path)->required();

  auto* init_cmd = app.add_subcommand("init-config", "Write a default model config");
  init_cmd->add_option("--hop", hop, "512 or 256")->check(CLI::IsMember({512, 256}));
  init_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage_error", e.what());
  }

  try {
    if (*synth_cmd) {
      ModelBundle bundle = load_model(config_path, weights_path);
      ChunkConfig& c = bundle.config.chunk;
      if (chunk_size) c.chunk_size = *chunk_size;
      if (left_context) c.left_context = *left_context;
      if (right_context) c.right_context = *right_context;
      c.validate();
      const ScoreSequence score = load_score(score_path, bundle.config.frontend.phones);
      const SynthResult r =
          synth(score, bundle, {.mode = parse_mode(mode), .seed = seed, .pipelined = pipelined});
      write_wav(r.waveform, bundle.config.mel.sample_rate, out_path);
      if (!metrics_path.empty()) write_text(metrics_path, metrics_to_json(r.metrics));
    } else if (*bench_cmd) {
      const ModelBundle bundle = load_model(config_path, weights_path);
      const auto scores = load_score_dir(scores_dir, bundle.config.frontend.phones);
      const BenchReport r = bench(scores, bundle,
                                  {.mode = parse_mode(mode), .seed = seed, .pipelined = pipelined},
                                  repeats, warmup);
      if (out_path.empty()) {
        std::cout << bench_to_json(r);
      } else {
        write_text(out_path, bench_to_json(r));
      }
    } else if (*verify_cmd) {
      const ModelBundle bundle = load_model(config_path, weights_path);
      std::optional<std::vector<std::string>> selection;
      if (verify_cmd->count("--checks")) {
        selection.emplace();
        std::stringstream ss(checks);
        for (std::string name; std::getline(ss, name, ',');) {
          if (!name.empty()) selection->push_back(name);
        }
      }
      const VerifyReport r = verify(bundle, selection, seed);
      std::cout << verify_to_json(r);
      return r.all_passed() ? 0 : 3;
    } else if (*random_cmd) {
      const ModelConfig cfg = load_config(config_path);
      save_weights(make_random_params(cfg, seed), out_path);
    } else if (*init_cmd) {
      save_config(default_model_config(hop), out_path);
    }
  } catch (const Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what());
  }
  return 0;
}
