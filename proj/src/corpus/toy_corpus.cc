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

#include "pngbert/corpus/toy_corpus.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "pngbert/common/errors.h"

namespace pngbert::corpus {

namespace {

// One phoneme per mora.
constexpr std::array<std::string_view, 40> kMorae = {
    "a",  "i",  "u",  "e",  "o",  "ka", "ki", "ku",  "ke",  "ko", "sa", "shi", "su", "se",
    "so", "ta", "chi", "tsu", "te", "to", "na", "ni",  "nu",  "ne", "no", "ha",  "hi", "fu",
    "he", "ho", "ma", "mi", "mu", "me", "mo", "ra", "ri", "ru", "re", "ro"};

constexpr std::array<std::string_view, 60> kGraphemes = {
    "日", "本", "語", "山", "川", "田", "中", "人", "大", "小", "学", "生", "木", "水", "火",
    "土", "金", "月", "年", "上", "下", "子", "手", "目", "口", "花", "雨", "空", "海", "石",
    "竹", "糸", "車", "音", "力", "王", "玉", "町", "村", "林", "森", "草", "虫", "貝", "犬",
    "見", "先", "名", "気", "天", "文", "字", "雪", "風", "夜", "朝", "星", "光", "道", "門"};

enum Stream : std::uint64_t { kLexiconStream = 1, kTrainStream = 11, kValidStream = 12, kTestStream = 13 };

constexpr int kMaxGraphemes = 3;
constexpr int kMaxReadingLength = 4;

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::vector<std::string> random_reading(const std::vector<std::string>& inventory, Rng& rng) {
  const int len = uniform_int(rng, 1, kMaxReadingLength);
  std::vector<std::string> reading;
  while (static_cast<int>(reading.size()) < len) {
    const std::string& p = pick(inventory, rng);
    if (!reading.empty() && reading.back() == p) continue;
    reading.push_back(p);
  }
  return reading;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

// Assigns every class a reading so that the classes actually seen before
// the homograph split as evenly as possible between its readings.
std::vector<int> balanced_rule(const std::vector<double>& class_weight, int reading_count, Rng& rng) {
  const int classes = static_cast<int>(class_weight.size());
  std::vector<int> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return class_weight[a] > class_weight[b]; });
  std::vector<double> load(reading_count, 0.0);
  std::vector<int> rule(classes, 0);
  for (int c : order) {
    if (class_weight[c] <= 0.0) {
      rule[c] = uniform_int(rng, 0, reading_count - 1);
      continue;
    }
    const int target = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    rule[c] = target;
    load[target] += class_weight[c];
  }
  return rule;
}

std::string sentence_key(const Sentence& s) {
  std::string key;
  for (std::size_t i = 0; i < s.words.size(); ++i) {
    key += s.phrase_breaks[i] ? "^" : "|";
    key += join(s.words[i].graphemes, ' ') + "/" + join(s.words[i].phonemes, ' ');
  }
  return key;
}

}  // namespace

std::optional<Tone> parse_tone(std::string_view symbol) {
  for (int i = 0; i < kToneCount; ++i) {
    if (kToneSymbols[i] == symbol) return static_cast<Tone>(i);
  }
  return std::nullopt;
}

void CorpusSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("corpus spec: " + what); };
  if (word_classes <= 0) fail("word_classes must be positive");
  if (lexicon_size < 10) fail("lexicon_size must be at least 10");
  if (homograph_fraction < 0.0 || homograph_fraction > 1.0) fail("homograph_fraction must be in [0,1]");
  if (homophone_fraction < 0.0 || homophone_fraction > 1.0) fail("homophone_fraction must be in [0,1]");
  if (homograph_fraction > 0.0 && homograph_fraction * lexicon_size < 0.5) {
    fail("homograph_fraction * lexicon_size must round to at least one entry");
  }
  if (homograph_fraction + homophone_fraction > 1.0) fail("homograph and homophone fractions exceed 1");
  if (homograph_fraction > 0.0 && word_classes < 2) fail("homographs need at least two word classes");
  if (grapheme_inventory < 2 || grapheme_inventory > static_cast<int>(kGraphemes.size())) {
    fail("grapheme_inventory must be in [2," + std::to_string(kGraphemes.size()) + "]");
  }
  if (phoneme_inventory < 3 || phoneme_inventory > static_cast<int>(kMorae.size())) {
    fail("phoneme_inventory must be in [3," + std::to_string(kMorae.size()) + "]");
  }
  const long spellings = static_cast<long>(grapheme_inventory) * (1 + grapheme_inventory + grapheme_inventory * grapheme_inventory);
  if (spellings < 2L * lexicon_size) fail("grapheme_inventory too small for lexicon_size");
  if (successors_per_word < 1 || successors_per_word > lexicon_size) fail("successors_per_word out of range");
  if (min_words < 1 || max_words < min_words) fail("need 1 <= min_words <= max_words");
  if (p_join < 0.0 || p_join > 1.0) fail("p_join must be in [0,1]");
  if (train_size < 0 || valid_size < 0 || test_size < 0) fail("split sizes must be non-negative");
}

int LexiconEntry::min_mora_count() const {
  int m = kMaxReadingLength + 1;
  for (const auto& r : readings) m = std::min(m, static_cast<int>(r.size()));
  return m;
}

int LexiconEntry::reading_for_left_class(int left_class) const {
  if (!is_homograph()) return 0;
  return reading_rule.at(static_cast<std::size_t>(left_class));
}

std::size_t Lexicon::homograph_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const LexiconEntry& e) { return e.is_homograph(); }));
}

int Lexicon::find_by_graphemes(const std::vector<std::string>& graphemes) const {
  for (const auto& e : entries) {
    if (e.graphemes == graphemes) return e.word_id;
  }
  return -1;
}

std::size_t Sentence::mora_count() const {
  std::size_t n = 0;
  for (const auto& w : words) n += w.phonemes.size();
  return n;
}

std::vector<std::string> Sentence::phonemes() const {
  std::vector<std::string> out;
  for (const auto& w : words) out.insert(out.end(), w.phonemes.begin(), w.phonemes.end());
  return out;
}

std::vector<std::string> Sentence::graphemes() const {
  std::vector<std::string> out;
  for (const auto& w : words) out.insert(out.end(), w.graphemes.begin(), w.graphemes.end());
  return out;
}

std::vector<Tone> Sentence::tones() const {
  std::vector<Tone> out;
  for (const auto& w : words) out.insert(out.end(), w.tones.begin(), w.tones.end());
  return out;
}

Lexicon build_lexicon(const CorpusSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, {kLexiconStream});
  Lexicon lex;
  lex.word_classes = spec.word_classes;
  for (int i = 0; i < spec.phoneme_inventory; ++i) lex.phoneme_inventory.emplace_back(kMorae[i]);
  for (int i = 0; i < spec.grapheme_inventory; ++i) lex.grapheme_inventory.emplace_back(kGraphemes[i]);

  const int n = spec.lexicon_size;
  const int homographs = static_cast<int>(std::llround(spec.homograph_fraction * n));
  const int homophones = static_cast<int>(std::llround(spec.homophone_fraction * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> kind(n, 'n');  // n: plain, g: homograph, p: homophone
  for (int i = 0; i < homographs; ++i) kind[order[i]] = 'g';
  for (int i = homographs; i < homographs + homophones; ++i) kind[order[i]] = 'p';

  std::set<std::string> spellings;
  lex.entries.resize(n);
  for (int i = 0; i < n; ++i) {
    LexiconEntry& e = lex.entries[i];
    e.word_id = i;
    do {
      e.graphemes.clear();
      const int len = uniform_int(rng, 1, kMaxGraphemes);
      for (int k = 0; k < len; ++k) e.graphemes.push_back(pick(lex.grapheme_inventory, rng));
    } while (!spellings.insert(join(e.graphemes, ' ')).second);

    e.word_class = uniform_int(rng, 0, spec.word_classes - 1);
    std::vector<int> sources;
    for (int j = 0; j < i; ++j) {
      if (kind[j] == 'n') sources.push_back(j);
    }
    if (kind[i] == 'g') {
      e.readings.push_back(random_reading(lex.phoneme_inventory, rng));
      do {
        e.readings.resize(1);
        e.readings.push_back(random_reading(lex.phoneme_inventory, rng));
      } while (e.readings[1] == e.readings[0]);
      e.accent_type = uniform_int(rng, 0, e.min_mora_count());
    } else if (kind[i] == 'p' && !sources.empty()) {
      const LexiconEntry& src = lex.entries[pick(sources, rng)];
      e.readings.push_back(src.readings[0]);
      const int moras = e.min_mora_count();
      do {
        e.accent_type = uniform_int(rng, 0, moras);
      } while (e.accent_type == src.accent_type);
    } else {
      e.readings.push_back(random_reading(lex.phoneme_inventory, rng));
      e.accent_type = uniform_int(rng, 0, e.min_mora_count());
    }
    e.reading_rule.assign(spec.word_classes, 0);
  }

  lex.successors.assign(n, {});
  for (int w = 0; w < n; ++w) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    lex.successors[w].assign(all.begin(), all.begin() + spec.successors_per_word);
    std::sort(lex.successors[w].begin(), lex.successors[w].end());
  }

  for (int h = 0; h < n; ++h) {
    LexiconEntry& e = lex.entries[h];
    if (!e.is_homograph()) continue;
    // Make sure words of at least two classes can precede the homograph.
    for (;;) {
      std::set<int> classes = {0};  // sentence-initial position counts as class 0
      for (int w = 0; w < n; ++w) {
        const auto& s = lex.successors[w];
        if (std::binary_search(s.begin(), s.end(), h)) classes.insert(lex.entries[w].word_class);
      }
      if (classes.size() >= 2) break;
      std::vector<int> candidates;
      for (int w = 0; w < n; ++w) {
        if (!classes.count(lex.entries[w].word_class)) candidates.push_back(w);
      }
      if (candidates.empty()) break;  // every word has one class; validate() rejects C < 2
      auto& s = lex.successors[pick(candidates, rng)];
      s.insert(std::upper_bound(s.begin(), s.end(), h), h);
    }
    std::vector<double> weight(spec.word_classes, 0.0);
    weight[0] += 1.0 / n;
    for (int w = 0; w < n; ++w) {
      const auto& s = lex.successors[w];
      if (std::binary_search(s.begin(), s.end(), h)) weight[lex.entries[w].word_class] += 1.0 / s.size();
    }
    e.reading_rule = balanced_rule(weight, static_cast<int>(e.readings.size()), rng);
  }
  return lex;
}

int apply_sandhi(std::span<const AccentedWord> phrase) {
  int offset = 0;
  for (const auto& w : phrase) {
    if (w.accent_type > 0) return offset + w.accent_type;
    offset += w.mora_count;
  }
  return 0;
}

std::vector<Tone> derive_tones(int mora_count, int accent_type) {
  if (mora_count < 1) throw std::invalid_argument("derive_tones: phrase has no moras");
  if (accent_type < 0 || accent_type > mora_count) {
    throw std::invalid_argument("derive_tones: nucleus " + std::to_string(accent_type) + " beyond " +
                                std::to_string(mora_count) + " moras");
  }
  std::vector<Tone> tones(static_cast<std::size_t>(mora_count));
  for (int m = 1; m <= mora_count; ++m) {
    Tone t;
    if (accent_type == m) {
      t = Tone::kAccent;
    } else if (m == 1) {
      t = Tone::kPhraseStartLow;
    } else if (accent_type == 0 || m < accent_type) {
      t = Tone::kHigh;
    } else {
      t = Tone::kLow;
    }
    tones[m - 1] = t;
  }
  tones.back() = Tone::kPhraseEndLow;
  return tones;
}

void assign_tones(Sentence& sentence, const Lexicon& lexicon) {
  const std::size_t n = sentence.words.size();
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && !sentence.phrase_breaks[end]) ++end;
    std::vector<AccentedWord> phrase;
    int moras = 0;
    for (std::size_t i = start; i < end; ++i) {
      const Word& w = sentence.words[i];
      const int m = static_cast<int>(w.phonemes.size());
      phrase.push_back({m, lexicon.entries.at(static_cast<std::size_t>(w.lexicon_id)).accent_type});
      moras += m;
    }
    const std::vector<Tone> tones = derive_tones(moras, apply_sandhi(phrase));
    std::size_t k = 0;
    for (std::size_t i = start; i < end; ++i) {
      Word& w = sentence.words[i];
      w.tones.assign(tones.begin() + static_cast<std::ptrdiff_t>(k),
                     tones.begin() + static_cast<std::ptrdiff_t>(k + w.phonemes.size()));
      k += w.phonemes.size();
    }
    start = end;
  }
}

bool tones_well_formed(std::span<const Tone> t) {
  if (t.empty() || t.back() != Tone::kPhraseEndLow) return false;
  if (t.size() == 1) return true;
  const auto prefix = t.first(t.size() - 1);
  std::size_t i = 0;
  if (prefix[0] == Tone::kAccent) {
    i = 1;
  } else if (prefix[0] == Tone::kPhraseStartLow) {
    i = 1;
    while (i < prefix.size() && prefix[i] == Tone::kHigh) ++i;
    if (i < prefix.size() && prefix[i] == Tone::kAccent) ++i;
  } else {
    return false;
  }
  while (i < prefix.size() && prefix[i] == Tone::kLow) ++i;
  return i == prefix.size();
}

bool sentence_consistent(const Sentence& sentence, const Lexicon& lexicon) {
  if (sentence.words.empty() || sentence.phrase_breaks.size() != sentence.words.size()) return false;
  if (!sentence.phrase_breaks[0]) return false;
  for (const Word& w : sentence.words) {
    if (w.tones.size() != w.phonemes.size() || w.phonemes.empty() || w.graphemes.empty()) return false;
    if (w.lexicon_id < 0 || static_cast<std::size_t>(w.lexicon_id) >= lexicon.entries.size()) return false;
  }
  Sentence copy = sentence;
  try {
    assign_tones(copy, lexicon);
  } catch (const std::invalid_argument&) {
    return false;
  }
  if (!(copy == sentence)) return false;
  std::vector<Tone> phrase;
  for (std::size_t i = 0; i < sentence.words.size(); ++i) {
    if (i > 0 && sentence.phrase_breaks[i]) {
      if (!tones_well_formed(phrase)) return false;
      phrase.clear();
    }
    phrase.insert(phrase.end(), sentence.words[i].tones.begin(), sentence.words[i].tones.end());
  }
  return tones_well_formed(phrase);
}

Sentence generate_sentence(const Lexicon& lexicon, const CorpusSpec& spec, Rng& rng) {
  if (lexicon.entries.empty()) throw std::invalid_argument("generate_sentence: empty lexicon");
  const int target = uniform_int(rng, spec.min_words, spec.max_words);
  Sentence s;
  std::uniform_int_distribution<std::size_t> first(0, lexicon.entries.size() - 1);
  int prev = static_cast<int>(first(rng));
  {
    const LexiconEntry& e = lexicon.entries[static_cast<std::size_t>(prev)];
    s.words.push_back({e.graphemes, e.readings[static_cast<std::size_t>(e.reading_for_left_class(0))], {}, prev});
  }
  while (static_cast<int>(s.words.size()) < target) {
    const LexiconEntry& left = lexicon.entries[static_cast<std::size_t>(prev)];
    std::vector<int> candidates = lexicon.successors[static_cast<std::size_t>(prev)];
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const std::string& last_phoneme = s.words.back().phonemes.back();
    int chosen = -1;
    for (int c : candidates) {
      const LexiconEntry& e = lexicon.entries[static_cast<std::size_t>(c)];
      const auto& reading = e.readings[static_cast<std::size_t>(e.reading_for_left_class(left.word_class))];
      // Adjacent identical moras would be indistinguishable in rendered frames.
      if (reading.front() != last_phoneme) {
        chosen = c;
        break;
      }
    }
    if (chosen < 0) break;
    const LexiconEntry& e = lexicon.entries[static_cast<std::size_t>(chosen)];
    s.words.push_back(
        {e.graphemes, e.readings[static_cast<std::size_t>(e.reading_for_left_class(left.word_class))], {}, chosen});
    prev = chosen;
  }
  std::bernoulli_distribution breaks(1.0 - spec.p_join);
  s.phrase_breaks.assign(s.words.size(), true);
  for (std::size_t i = 1; i < s.words.size(); ++i) s.phrase_breaks[i] = breaks(rng);
  assign_tones(s, lexicon);
  return s;
}

Dataset generate_dataset(const Lexicon& lexicon, const CorpusSpec& spec) {
  Dataset ds;
  std::set<std::string> seen;
  auto fill = [&](std::vector<Sentence>& out, int count, std::uint64_t stream, bool exclusive) {
    Rng rng = make_rng(spec.seed, {stream});
    const long max_attempts = 200L * std::max(count, 1) + 1000;
    long attempts = 0;
    while (static_cast<int>(out.size()) < count) {
      if (++attempts > max_attempts) {
        throw ConfigError("corpus spec: cannot draw " + std::to_string(count) +
                          " distinct held-out sentences; the language is too small");
      }
      Sentence s = generate_sentence(lexicon, spec, rng);
      const std::string key = sentence_key(s);
      if (exclusive && seen.count(key)) continue;
      seen.insert(key);
      out.push_back(std::move(s));
    }
  };
  fill(ds.train, spec.train_size, kTrainStream, false);
  fill(ds.valid, spec.valid_size, kValidStream, true);
  fill(ds.test, spec.test_size, kTestStream, true);
  return ds;
}

}  // namespace pngbert::corpus
