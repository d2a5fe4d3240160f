// Copyright (c) 2026 The pngbert-ja Authors
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

#ifndef PNGBERT_APP_CONFIG_H_
#define PNGBERT_APP_CONFIG_H_

// Experiment configuration: one INI file with sections, overridable with
// "section.key=value" strings and serialized back in a canonical form whose
// hash identifies the run.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pngbert/codec/masking.h"
#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/downstream/tts_model.h"
#include "pngbert/encoder/encoder.h"
#include "pngbert/encoder/pretrain.h"
#include "pngbert/metrics/metrics.h"
#include "pngbert/metrics/probe.h"

namespace pngbert::app {

struct ProbeSettings {
  metrics::ProbeConfig probe;
  std::size_t train_limit = 2000;  // sentences from the train split
};

struct EvalSettings {
  metrics::AerOptions aer;
  std::size_t synth_limit = 500;  // sentences synthesized for aer and cer
  std::size_t batch_size = 32;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  corpus::CorpusSpec corpus;
  double embedding_min_distance = 0.9;
  std::string encoder_preset = "desk";
  encoder::EncoderConfig encoder;
  codec::MaskingPolicy masking;
  encoder::PretrainConfig pretrain;
  std::string finetune_preset = "PGB2";
  downstream::FinetuneConfig finetune;
  downstream::DecoderConfig decoder;
  downstream::BaselineConfig baseline;
  ProbeSettings probe;
  EvalSettings eval;

  // Stage seeds follow the run seed unless a section sets its own.
  static ExperimentConfig defaults(std::uint64_t seed = 1);

  // Canonical INI text listing every key.
  std::string to_ini() const;
  std::string hash() const;
  void validate() const;
};

// Throws ConfigError on unknown sections or keys, unparsable values or
// malformed overrides.
ExperimentConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace pngbert::app

#endif  // PNGBERT_APP_CONFIG_H_
