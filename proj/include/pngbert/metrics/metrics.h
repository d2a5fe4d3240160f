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

#ifndef PNGBERT_METRICS_METRICS_H_
#define PNGBERT_METRICS_METRICS_H_

#include <cstddef>
#include <string>
#include <vector>

#include "pngbert/codec/sequence.h"
#include "pngbert/codec/vocabulary.h"
#include "pngbert/corpus/frames.h"
#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/encoder/evaluation.h"
#include "pngbert/nn/tensor.h"

namespace pngbert::metrics {

// ---- Alignment ----

struct AttentionRecord {
  std::size_t utterance = 0;
  nn::Tensor matrix;  // decoder steps x encoder positions
  bool hit_max_steps = false;
};

struct AerOptions {
  int jump_threshold = 4;
  int duration_threshold = 30;
  // true: the longest run of consecutive steps on one position counts;
  // false: the total number of steps per position counts.
  bool consecutive_duration = true;
};

enum class AlignmentError { kNone, kJump, kDwell, kMaxSteps };

std::vector<int> argmax_path(const nn::Tensor& matrix);
AlignmentError classify_alignment(const AttentionRecord& record, const AerOptions& options = {});
// Fraction of utterances with any alignment error. Throws
// std::invalid_argument on an empty set.
double attention_error_rate(const std::vector<AttentionRecord>& records, const AerOptions& options = {});
// Fraction of utterances whose argmax path never moves backwards.
double monotonic_fraction(const std::vector<AttentionRecord>& records);

// ---- Edit distance ----

std::size_t levenshtein(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
// Sum of distances over sum of reference lengths.
double cer(const std::vector<std::vector<std::string>>& refs, const std::vector<std::vector<std::string>>& hyps);

// ---- Acoustic oracle ----

// Nearest phoneme embedding per frame on the first 8 columns, with runs of
// one phoneme collapsed to a single symbol.
std::vector<std::string> oracle_decode(const nn::Tensor& frames, const corpus::PhonemeEmbedding& embedding);

// ---- G2P on homographs ----

// Per phoneme-segment token: whether its word is a homograph in the lexicon.
std::vector<bool> homograph_token_mask(const corpus::Sentence& sentence, const codec::TokenSequence& sequence,
                                       const corpus::Lexicon& lexicon);

// Context-free baseline: every word is read with its most frequent reading
// in `reference`. Returns per-token accuracy over `eval`, restricted to
// homograph words when homographs_only is set.
encoder::Accuracy reading_prior_accuracy(const std::vector<corpus::Sentence>& reference,
                                         const std::vector<corpus::Sentence>& eval, const corpus::Lexicon& lexicon,
                                         bool homographs_only);

struct G2pBreakdown {
  encoder::Accuracy all;
  encoder::Accuracy homographs;
};

// Full-phoneme-segment masking, split into all tokens and homograph tokens.
G2pBreakdown g2p_accuracy(nn::ParameterStore& params, const encoder::EncoderConfig& config,
                          const codec::Vocabulary& vocab, const std::vector<corpus::Sentence>& sentences,
                          const corpus::Lexicon& lexicon, const encoder::EvalOptions& options = {});

}  // namespace pngbert::metrics

#endif  // PNGBERT_METRICS_METRICS_H_
