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

#ifndef PNGBERT_DOWNSTREAM_BASELINE_ENCODER_H_
#define PNGBERT_DOWNSTREAM_BASELINE_ENCODER_H_

// Non-pretrained phoneme encoder: embedding, three same-padded convolutions
// and one bidirectional LSTM.

#include <cstdint>
#include <string>
#include <vector>

#include "pngbert/nn/graph.h"
#include "pngbert/nn/ops.h"

namespace pngbert::downstream {

inline const std::string kBaselinePrefix = "baseline/";

struct BaselineConfig {
  int vocab_size = 0;
  int embedding_dim = 48;
  int tone_dim = 16;
  bool tone_input = false;
  int channels = 64;
  int kernel = 5;
  int conv_layers = 3;
  int lstm_hidden = 32;  // per direction

  int output_dim() const { return 2 * lstm_hidden; }
  void validate() const;
};

void init_baseline_encoder(const BaselineConfig& config, nn::ParameterStore& params, std::uint64_t seed);

// ids and tones are packed ragged sequences delimited by offsets; tones must
// be given exactly when config.tone_input is set. Returns one row per input
// token.
nn::Var baseline_encode(nn::Graph& g, nn::ParameterStore& params, const BaselineConfig& config,
                        const std::vector<int>& ids, const std::vector<int>& tones,
                        const std::vector<std::size_t>& offsets);

// Runs an LSTM over every packed sequence independently; with reverse set,
// each sequence is read from its own last token back to its first. Output
// row i belongs to input row i.
nn::Var lstm_over_sequences(nn::Graph& g, nn::Var x, const std::vector<std::size_t>& offsets, nn::Var w_input,
                            nn::Var w_hidden, nn::Var bias, bool reverse);

}  // namespace pngbert::downstream

#endif  // PNGBERT_DOWNSTREAM_BASELINE_ENCODER_H_
