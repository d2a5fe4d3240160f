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

#ifndef PNGBERT_CODEC_SEQUENCE_H_
#define PNGBERT_CODEC_SEQUENCE_H_

#include <optional>
#include <string>
#include <vector>

#include "pngbert/codec/vocabulary.h"
#include "pngbert/corpus/toy_corpus.h"

namespace pngbert::codec {

// [CLS, phonemes..., SEP, graphemes..., SEP] with parallel channels.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<int> segment_ids;      // 0 = CLS + phonemes + SEP, 1 = graphemes + SEP
  std::vector<int> token_positions;  // global 0..len-1
  std::vector<int> word_ids;         // -1 on specials
  std::optional<std::vector<int>> word_positions;  // word index + 1, specials 0
  int word_count = 0;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
};

// Throws std::invalid_argument on an empty sentence or empty word, DataError
// on unknown symbols or sequences longer than max_length.
TokenSequence assemble_sequence(const corpus::Sentence& sentence, const Vocabulary& vocab,
                                bool use_word_positions = false,
                                std::size_t max_length = kMaxSequenceLength);

// Indices of phoneme tokens, excluding CLS and SEP.
Span phoneme_span(const TokenSequence& seq);
Span grapheme_span(const TokenSequence& seq);

struct Detokenized {
  std::vector<std::string> phonemes;
  std::vector<std::string> graphemes;
};
Detokenized detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace pngbert::codec

#endif  // PNGBERT_CODEC_SEQUENCE_H_
