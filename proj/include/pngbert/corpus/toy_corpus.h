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

#ifndef PNGBERT_CORPUS_TOY_CORPUS_H_
#define PNGBERT_CORPUS_TOY_CORPUS_H_

// ToyJa: a seeded synthetic pitch-accent language. Words carry a spelling,
// one or more readings (homographs pick theirs from the left neighbour's
// word class), a word class and a lexical accent type. Sentences are walks
// on a sparse word-successor graph grouped into accentual phrases.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pngbert/common/rng.h"

namespace pngbert::corpus {

// Label order is fixed and doubles as the class index of tone heads.
enum class Tone : std::uint8_t {
  kPhraseStartLow = 0,  // %L
  kLow = 1,             // L
  kHigh = 2,            // H
  kAccent = 3,          // A
  kPhraseEndLow = 4,    // L%
};
inline constexpr int kToneCount = 5;
inline constexpr std::array<std::string_view, kToneCount> kToneSymbols = {"%L", "L", "H", "A", "L%"};

inline std::string_view tone_symbol(Tone t) { return kToneSymbols[static_cast<int>(t)]; }
std::optional<Tone> parse_tone(std::string_view symbol);
inline int tone_index(Tone t) { return static_cast<int>(t); }

struct CorpusSpec {
  std::uint64_t seed = 1;
  int lexicon_size = 200;
  double homograph_fraction = 0.1;
  // Entries that reuse an earlier entry's reading with a different spelling
  // and accent, so spelling matters for accent.
  double homophone_fraction = 0.1;
  int word_classes = 4;
  int grapheme_inventory = 30;
  int phoneme_inventory = 16;
  int successors_per_word = 3;
  int min_words = 2;
  int max_words = 5;
  double p_join = 0.5;
  int train_size = 5000;
  int valid_size = 500;
  int test_size = 500;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LexiconEntry {
  int word_id = 0;
  std::vector<std::string> graphemes;
  std::vector<std::vector<std::string>> readings;
  // reading_rule[c] = reading index used after a word of class c.
  std::vector<int> reading_rule;
  int word_class = 0;
  int accent_type = 0;

  bool is_homograph() const { return readings.size() > 1; }
  int min_mora_count() const;
  int reading_for_left_class(int left_class) const;
};

struct Lexicon {
  std::vector<LexiconEntry> entries;
  // successors[w] = words that may follow w, drawn uniformly.
  std::vector<std::vector<int>> successors;
  std::vector<std::string> phoneme_inventory;
  std::vector<std::string> grapheme_inventory;
  int word_classes = 0;

  std::size_t homograph_count() const;
  // -1 when no entry has this spelling.
  int find_by_graphemes(const std::vector<std::string>& graphemes) const;
};

struct Word {
  std::vector<std::string> graphemes;
  std::vector<std::string> phonemes;
  std::vector<Tone> tones;
  int lexicon_id = -1;

  friend bool operator==(const Word&, const Word&) = default;
};

struct Sentence {
  std::vector<Word> words;
  std::vector<bool> phrase_breaks;  // true = word starts an accentual phrase

  std::size_t mora_count() const;
  std::vector<std::string> phonemes() const;
  std::vector<std::string> graphemes() const;
  std::vector<Tone> tones() const;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Dataset {
  std::vector<Sentence> train;
  std::vector<Sentence> valid;
  std::vector<Sentence> test;
};

// Word as seen by the sandhi rule: its mora count in this sentence and its
// lexical accent type.
struct AccentedWord {
  int mora_count = 0;
  int accent_type = 0;
};

Lexicon build_lexicon(const CorpusSpec& spec);

Sentence generate_sentence(const Lexicon& lexicon, const CorpusSpec& spec, Rng& rng);

// Accent type of a joined accentual phrase in phrase moras: the first
// accented word's nucleus survives, later nuclei are deleted.
int apply_sandhi(std::span<const AccentedWord> phrase);

// Tone string of a phrase of `mora_count` moras with the given nucleus.
// Throws std::invalid_argument when the nucleus lies beyond the phrase.
std::vector<Tone> derive_tones(int mora_count, int accent_type);

// Recomputes every word's tones from phrase_breaks and lexical accents.
void assign_tones(Sentence& sentence, const Lexicon& lexicon);

// (%L|A) H* A? L* followed by a final L%, with at most one A.
bool tones_well_formed(std::span<const Tone> phrase_tones);

// Checks a sentence against the tone rules (re-derivation).
bool sentence_consistent(const Sentence& sentence, const Lexicon& lexicon);

// Train/valid/test with disjoint sentences; each split uses its own stream.
Dataset generate_dataset(const Lexicon& lexicon, const CorpusSpec& spec);

}  // namespace pngbert::corpus

#endif  // PNGBERT_CORPUS_TOY_CORPUS_H_
