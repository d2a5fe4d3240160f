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

#ifndef PNGBERT_ENCODER_EVALUATION_H_
#define PNGBERT_ENCODER_EVALUATION_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pngbert/codec/masking.h"
#include "pngbert/encoder/encoder.h"

namespace pngbert::encoder {

enum class MaskMode { kMlm, kG2p, kP2g };
std::optional<MaskMode> parse_mask_mode(const std::string& name);
std::string mask_mode_name(MaskMode mode);

struct TokenPrediction {
  std::size_t sequence = 0;
  std::size_t position = 0;
  int target = 0;
  int predicted = 0;
};

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct EvalOptions {
  codec::MaskingPolicy policy;     // used by MaskMode::kMlm
  std::uint64_t seed = 20260101;  // fixed evaluation masking seed
  bool mask_grapheme_input = false;
  std::size_t batch_size = 64;
};

// Argmax prediction at every loss position after masking each sequence
// the given way. Dropout is off.
std::vector<TokenPrediction> masked_predictions(nn::ParameterStore& params, const EncoderConfig& config,
                                                const codec::Vocabulary& vocab,
                                                const std::vector<codec::TokenSequence>& sequences, MaskMode mode,
                                                const EvalOptions& options = {});

Accuracy accuracy_of(const std::vector<TokenPrediction>& predictions,
                     const std::function<bool(const TokenPrediction&)>& keep = nullptr);

Accuracy masked_accuracy(nn::ParameterStore& params, const EncoderConfig& config, const codec::Vocabulary& vocab,
                         const std::vector<codec::TokenSequence>& sequences, MaskMode mode,
                         const EvalOptions& options = {});

}  // namespace pngbert::encoder

#endif  // PNGBERT_ENCODER_EVALUATION_H_
