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

#ifndef PNGBERT_ENCODER_PRETRAIN_H_
#define PNGBERT_ENCODER_PRETRAIN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "pngbert/codec/masking.h"
#include "pngbert/encoder/encoder.h"
#include "pngbert/encoder/evaluation.h"
#include "pngbert/nn/optim.h"

namespace pngbert::encoder {

struct PretrainConfig {
  int steps = 20000;
  int batch_size = 32;
  double lr = 5e-5;
  double l2 = 1e-4;
  bool decoupled_l2 = false;
  int eval_every = 1000;
  int log_every = 100;
  std::size_t valid_limit = 500;
  // Phoneme-only pretraining: graphemes are masked in every input and carry
  // no loss.
  bool pb_mode = false;
  std::uint64_t seed = 1;
  codec::MaskingPolicy policy;

  void validate() const;  // throws ConfigError
};

struct ValidationScores {
  int step = -1;
  Accuracy mlm;
  Accuracy g2p;
  Accuracy p2g;
  // Model selection key.
  double score() const { return mlm.rate() + g2p.rate(); }
};

struct PretrainIo {
  std::filesystem::path out_dir;  // empty: no checkpoints
  std::string metadata;           // JSON object merged into checkpoint metadata
  std::ostream* log = nullptr;    // JSON-lines
};

struct PretrainResult {
  std::vector<double> losses;  // one per step
  ValidationScores last;
  ValidationScores best;
};

ValidationScores validate_encoder(nn::ParameterStore& params, const EncoderConfig& config,
                                  const codec::Vocabulary& vocab, const std::vector<codec::TokenSequence>& valid,
                                  const PretrainConfig& pretrain, int step);

// Trains from optimizer.step up to pretrain.steps. Writes last.ckpt and
// best.ckpt into io.out_dir. Throws DivergenceError naming the step when the
// loss or a gradient turns non-finite.
PretrainResult pretrain(const EncoderConfig& config, const PretrainConfig& pretrain, nn::ParameterStore& params,
                        nn::OptimizerState& optimizer, const std::vector<codec::TokenSequence>& train,
                        const std::vector<codec::TokenSequence>& valid, const codec::Vocabulary& vocab,
                        const PretrainIo& io = {});

// The masked input and targets of training sentence `index` in `epoch`.
codec::MaskedSequence pretraining_example(const codec::TokenSequence& seq, const codec::Vocabulary& vocab,
                                          const PretrainConfig& pretrain, std::uint64_t epoch, std::uint64_t index);

}  // namespace pngbert::encoder

#endif  // PNGBERT_ENCODER_PRETRAIN_H_
