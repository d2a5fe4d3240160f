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

#ifndef PNGBERT_CODEC_VOCABULARY_H_
#define PNGBERT_CODEC_VOCABULARY_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pngbert/corpus/toy_corpus.h"

namespace pngbert::codec {

inline constexpr int kPad = 0;
inline constexpr int kCls = 1;
inline constexpr int kSep = 2;
inline constexpr int kMask = 3;
inline constexpr int kSpecialCount = 4;
inline constexpr std::size_t kMaxSequenceLength = 256;

enum class Segment { kPhoneme = 0, kGrapheme = 1 };

// Specials first, then phonemes and graphemes, each block sorted. Names are
// segment-qualified ("p:ka", "g:日") so a grapheme may share a phoneme's
// spelling without sharing its id.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws DataError on duplicate or empty symbols.
  Vocabulary(std::vector<std::string> phonemes, std::vector<std::string> graphemes);

  std::size_t size() const { return names_.size(); }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  // Bare symbol without the segment prefix; specials keep their bracketed name.
  std::string symbol(int id) const;
  std::optional<int> find(Segment segment, const std::string& symbol) const;
  int id(Segment segment, const std::string& symbol) const;  // throws DataError

  int phoneme_begin() const { return kSpecialCount; }
  int phoneme_end() const { return grapheme_begin_; }
  int grapheme_begin() const { return grapheme_begin_; }
  int grapheme_end() const { return static_cast<int>(names_.size()); }
  bool is_phoneme(int id) const { return id >= phoneme_begin() && id < phoneme_end(); }
  bool is_grapheme(int id) const { return id >= grapheme_begin() && id < grapheme_end(); }

  const std::vector<std::string>& names() const { return names_; }
  // Hash of the serialized table; artifacts record it to detect drift.
  std::string hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
  int grapheme_begin_ = kSpecialCount;
};

Vocabulary build_vocabulary(const corpus::Lexicon& lexicon);

// One name per line; line number = id.
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

}  // namespace pngbert::codec

#endif  // PNGBERT_CODEC_VOCABULARY_H_
