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

#ifndef PNGBERT_CODEC_MASKING_H_
#define PNGBERT_CODEC_MASKING_H_

#include <array>
#include <cstdint>
#include <vector>

#include "pngbert/codec/sequence.h"
#include "pngbert/common/rng.h"

namespace pngbert::codec {

enum class Strategy : std::uint8_t {
  kMaskBoth = 0,
  kMaskGraphemeOnly = 1,
  kMaskPhonemeOnly = 2,
  kKeepIntact = 3,
  kRandomReplace = 4,
};
inline constexpr int kStrategyCount = 5;

struct MaskingPolicy {
  double select_fraction = 0.25;
  // Relative weights; the defaults add to 84 and are renormalized.
  std::array<double, kStrategyCount> weights = {48, 8, 8, 10, 10};
  // When false, only tokens that were actually replaced carry loss.
  bool loss_on_unchanged = true;

  void validate() const;  // throws ConfigError
  std::array<double, kStrategyCount> probabilities() const;
};

struct MaskedSequence {
  TokenSequence input;     // ids after masking, other channels untouched
  std::vector<int> target; // original ids
  std::vector<std::uint8_t> loss_mask;
  std::vector<int> selected_words;
  std::vector<Strategy> strategies;  // parallel to selected_words

  std::size_t loss_count() const;
};

// Reproducible per-sentence stream for (seed, epoch, sentence index).
Rng masking_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sentence_index);

// RandomReplace draws from the token's own segment range of the vocabulary.
MaskedSequence mask_for_mlm(const TokenSequence& seq, const Vocabulary& vocab, const MaskingPolicy& policy,
                            Rng& rng);

// Masks every token of one segment (SEP excluded) and puts loss on them.
MaskedSequence mask_segment(const TokenSequence& seq, Segment which);
// Composes with an earlier masking; loss masks are united.
MaskedSequence mask_segment(const MaskedSequence& masked, Segment which);

// Grapheme segment masked, no loss targets.
TokenSequence mask_graphemes_for_inference(const TokenSequence& seq);

// Unmasked view with no loss positions.
MaskedSequence unmasked(const TokenSequence& seq);

}  // namespace pngbert::codec

#endif  // PNGBERT_CODEC_MASKING_H_
