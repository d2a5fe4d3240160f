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

#include "pngbert/codec/sequence.h"

#include <stdexcept>

#include "pngbert/common/errors.h"

namespace pngbert::codec {

TokenSequence assemble_sequence(const corpus::Sentence& sentence, const Vocabulary& vocab, bool use_word_positions,
                                std::size_t max_length) {
  if (sentence.words.empty()) throw std::invalid_argument("assemble_sequence: empty sentence");
  TokenSequence seq;
  seq.word_count = static_cast<int>(sentence.words.size());
  auto push = [&](int id, int segment, int word) {
    seq.ids.push_back(id);
    seq.segment_ids.push_back(segment);
    seq.token_positions.push_back(static_cast<int>(seq.token_positions.size()));
    seq.word_ids.push_back(word);
  };
  push(kCls, 0, -1);
  for (std::size_t w = 0; w < sentence.words.size(); ++w) {
    const auto& word = sentence.words[w];
    if (word.phonemes.empty() || word.graphemes.empty()) {
      throw std::invalid_argument("assemble_sequence: word " + std::to_string(w) + " is empty");
    }
    for (const auto& p : word.phonemes) push(vocab.id(Segment::kPhoneme, p), 0, static_cast<int>(w));
  }
  push(kSep, 0, -1);
  for (std::size_t w = 0; w < sentence.words.size(); ++w) {
    for (const auto& g : sentence.words[w].graphemes) push(vocab.id(Segment::kGrapheme, g), 1, static_cast<int>(w));
  }
  push(kSep, 1, -1);
  if (seq.size() > max_length) {
    throw DataError("sequence of " + std::to_string(seq.size()) + " tokens exceeds the maximum of " +
                    std::to_string(max_length));
  }
  if (use_word_positions) {
    seq.word_positions.emplace();
    for (int w : seq.word_ids) seq.word_positions->push_back(w + 1);
  }
  return seq;
}

Span phoneme_span(const TokenSequence& seq) {
  Span s{1, 1};
  while (s.end < seq.size() && seq.ids[s.end] != kSep && seq.segment_ids[s.end] == 0) ++s.end;
  if (seq.size() == 0) s = {0, 0};
  return s;
}

Span grapheme_span(const TokenSequence& seq) {
  std::size_t b = 0;
  while (b < seq.size() && seq.segment_ids[b] == 0) ++b;
  std::size_t e = seq.size();
  if (e > b && seq.ids[e - 1] == kSep) --e;
  return {b, e};
}

Detokenized detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  Detokenized out;
  for (int id : ids) {
    if (vocab.is_phoneme(id)) {
      out.phonemes.push_back(vocab.symbol(id));
    } else if (vocab.is_grapheme(id)) {
      out.graphemes.push_back(vocab.symbol(id));
    }
  }
  return out;
}

}  // namespace pngbert::codec
