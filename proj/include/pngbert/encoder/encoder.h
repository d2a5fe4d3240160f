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

#ifndef PNGBERT_ENCODER_ENCODER_H_
#define PNGBERT_ENCODER_ENCODER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pngbert/codec/sequence.h"
#include "pngbert/common/rng.h"
#include "pngbert/nn/graph.h"
#include "pngbert/nn/ops.h"

namespace pngbert::encoder {

inline const std::string kPrefix = "encoder/";

struct EncoderConfig {
  int layers = 4;
  int hidden = 64;
  int heads = 4;
  int ffn = 0;  // 0 means 4 * hidden
  int max_len = 256;
  int vocab_size = 0;
  int max_words = 64;  // rows of the word-position table minus one
  bool use_word_positions = false;
  double dropout = 0.1;

  int ffn_dim() const { return ffn > 0 ? ffn : 4 * hidden; }
  void validate() const;  // throws ConfigError

  static EncoderConfig paper_base();
  static EncoderConfig paper_small();
  static EncoderConfig desk();
  // "paper-base", "paper-small" or "desk".
  static EncoderConfig preset(const std::string& name);
};

std::string layer_prefix(int layer);

// Interleaved sin/cos: component 2i is sin(pos / 10000^(2i/d)), 2i+1 the
// matching cos.
std::vector<double> positional_encoding(int position, int d);

// Adds freshly initialized encoder parameters under kPrefix.
void init_encoder(const EncoderConfig& config, nn::ParameterStore& params, std::uint64_t seed);

// Sequences packed one after another along rows; no padding needed, but
// explicit PAD tokens are honoured as never-attended keys.
struct EncoderBatch {
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<int> positions;
  std::vector<int> word_positions;  // empty unless enabled
  std::vector<std::size_t> offsets;

  std::size_t rows() const { return ids.size(); }
  std::size_t sequences() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

EncoderBatch pack(const std::vector<const codec::TokenSequence*>& sequences);

struct EncoderOutput {
  std::vector<nn::Var> layers;  // residual stream after every block
  nn::Var final;                // final layer after the closing layer norm
};

// Throws DataError on sequences longer than max_len or ids outside the
// vocabulary. Dropout is active only when training.
EncoderOutput encode(nn::Graph& graph, nn::ParameterStore& params, const EncoderConfig& config,
                     const EncoderBatch& batch, bool training, Rng& dropout_rng);

// Logits over the vocabulary at the given rows of `final`, through the
// transposed token-embedding table plus an output bias.
nn::Var mlm_logits(nn::Graph& graph, nn::ParameterStore& params, nn::Var final, const std::vector<int>& rows);

// Keeps only the top `tuned_layers` blocks trainable (with the closing layer
// norm). Embeddings stay trainable only when every layer is tuned; the MLM
// output bias is frozen whenever the encoder is not fully tuned.
void freeze_encoder(nn::ParameterStore& params, const EncoderConfig& config, int tuned_layers);

}  // namespace pngbert::encoder

#endif  // PNGBERT_ENCODER_ENCODER_H_
