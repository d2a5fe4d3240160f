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

#include <map>
#include <set>

#include "doctest.h"
#include "pngbert/common/errors.h"
#include "pngbert/corpus/dataset_io.h"
#include "pngbert/corpus/frames.h"
#include "pngbert/corpus/toy_corpus.h"
#include "test_util.h"

namespace pngbert::corpus {
namespace {

using T = Tone;

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.seed = 7;
  spec.train_size = 400;
  spec.valid_size = 60;
  spec.test_size = 60;
  return spec;
}

std::string key(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += x + " ";
  return s;
}

TEST_CASE("homograph count follows the fraction") {
  CorpusSpec spec;
  spec.lexicon_size = 10;
  spec.homograph_fraction = 0.2;
  const Lexicon lex = build_lexicon(spec);
  CHECK(lex.entries.size() == 10);
  CHECK(lex.homograph_count() == 2);
  CHECK(lex.phoneme_inventory.size() == 16);
  CHECK(lex.grapheme_inventory.size() == 30);
  spec.lexicon_size = 200;
  spec.homograph_fraction = 0.1;
  CHECK(build_lexicon(spec).homograph_count() == 20);
}

TEST_CASE("lexicon entries respect their invariants") {
  const Lexicon lex = build_lexicon(small_spec());
  std::set<std::string> spellings;
  for (const auto& e : lex.entries) {
    REQUIRE(!e.readings.empty());
    CHECK(e.graphemes.size() >= 1);
    CHECK(e.graphemes.size() <= 3);
    CHECK(spellings.insert(key(e.graphemes)).second);
    for (const auto& r : e.readings) {
      CHECK(r.size() >= 1);
      CHECK(r.size() <= 4);
    }
    CHECK(e.accent_type >= 0);
    CHECK(e.accent_type <= e.min_mora_count());
    CHECK(e.reading_rule.size() == 4);
  }
}

TEST_CASE("every homograph needs its left context") {
  const Lexicon lex = build_lexicon(small_spec());
  const int n = static_cast<int>(lex.entries.size());
  for (int h = 0; h < n; ++h) {
    const auto& e = lex.entries[h];
    if (!e.is_homograph()) continue;
    std::set<int> readings_seen;
    readings_seen.insert(e.reading_rule[0]);  // sentence-initial
    for (int w = 0; w < n; ++w) {
      for (int s : lex.successors[w]) {
        if (s == h) readings_seen.insert(e.reading_rule[lex.entries[w].word_class]);
      }
    }
    CHECK(readings_seen.size() >= 2);
  }
}

TEST_CASE("zero word classes is rejected") {
  CorpusSpec spec;
  spec.word_classes = 0;
  CHECK_THROWS_AS(build_lexicon(spec), ConfigError);
  spec = CorpusSpec();
  spec.lexicon_size = 5;
  CHECK_THROWS_AS(build_lexicon(spec), ConfigError);
  spec = CorpusSpec();
  spec.p_join = 1.5;
  CHECK_THROWS_AS(build_lexicon(spec), ConfigError);
}

TEST_CASE("generation is deterministic down to the bytes") {
  testing::TempDir dir;
  for (int run = 0; run < 2; ++run) {
    const CorpusSpec spec = small_spec();
    const Lexicon lex = build_lexicon(spec);
    const Dataset ds = generate_dataset(lex, spec);
    const std::string r = std::to_string(run);
    write_lexicon(dir / ("lex" + r), lex);
    write_grammar(dir / ("gram" + r), lex);
    write_dataset(dir / ("train" + r), ds.train);
    write_dataset(dir / ("test" + r), ds.test);
  }
  for (const char* name : {"lex", "gram", "train", "test"}) {
    const std::string a = testing::read_file(dir / (std::string(name) + "0"));
    CHECK(!a.empty());
    CHECK(a == testing::read_file(dir / (std::string(name) + "1")));
  }
}

TEST_CASE("without homographs a unigram lookup table is a perfect G2P") {
  CorpusSpec spec = small_spec();
  spec.homograph_fraction = 0.0;
  const Lexicon lex = build_lexicon(spec);
  CHECK(lex.homograph_count() == 0);
  const Dataset ds = generate_dataset(lex, spec);
  // Learn spelling -> reading from training data only.
  std::map<std::string, std::vector<std::string>> table;
  for (const auto& s : ds.train) {
    for (const auto& w : s.words) table.emplace(key(w.graphemes), w.phonemes);
  }
  std::size_t right = 0, total = 0;
  for (const auto& s : ds.test) {
    for (const auto& w : s.words) {
      auto it = table.find(key(w.graphemes));
      if (it == table.end()) continue;  // unseen word; not a context question
      total += w.phonemes.size();
      for (std::size_t i = 0; i < w.phonemes.size(); ++i) right += it->second[i] == w.phonemes[i];
    }
  }
  CHECK(total > 0);
  CHECK(right == total);
}

TEST_CASE("with homographs the lookup table is not enough") {
  const CorpusSpec spec = small_spec();
  const Lexicon lex = build_lexicon(spec);
  const Dataset ds = generate_dataset(lex, spec);
  std::map<std::string, std::set<std::string>> readings;
  for (const auto& s : ds.train) {
    for (const auto& w : s.words) readings[key(w.graphemes)].insert(key(w.phonemes));
  }
  std::size_t ambiguous = 0;
  for (const auto& [k, v] : readings) ambiguous += v.size() > 1;
  CHECK(ambiguous > 0);
}

TEST_CASE("homographs read by the left neighbour's class") {
  const CorpusSpec spec = small_spec();
  const Lexicon lex = build_lexicon(spec);
  const Dataset ds = generate_dataset(lex, spec);
  std::size_t checked = 0;
  for (const auto& s : ds.train) {
    for (std::size_t i = 0; i < s.words.size(); ++i) {
      const auto& e = lex.entries[s.words[i].lexicon_id];
      if (!e.is_homograph()) continue;
      const int left = i == 0 ? 0 : lex.entries[s.words[i - 1].lexicon_id].word_class;
      CHECK(s.words[i].phonemes == e.readings[e.reading_rule[left]]);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("generated sentences are well formed") {
  const CorpusSpec spec = small_spec();
  const Lexicon lex = build_lexicon(spec);
  const Dataset ds = generate_dataset(lex, spec);
  CHECK(ds.train.size() == 400);
  CHECK(ds.valid.size() == 60);
  CHECK(ds.test.size() == 60);
  std::set<std::size_t> lengths;
  for (const auto& s : ds.train) {
    CHECK(sentence_consistent(s, lex));
    CHECK(s.phrase_breaks[0]);
    lengths.insert(s.words.size());
    const auto p = s.phonemes();
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i] != p[i - 1]);
    for (std::size_t i = 1; i < s.words.size(); ++i) {
      const auto& succ = lex.successors[s.words[i - 1].lexicon_id];
      CHECK(std::find(succ.begin(), succ.end(), s.words[i].lexicon_id) != succ.end());
    }
  }
  CHECK(*lengths.begin() >= 1);
  CHECK(*lengths.rbegin() <= 5);
  // All five tone labels show up.
  std::set<T> tones;
  for (const auto& s : ds.train) {
    for (T t : s.tones()) tones.insert(t);
  }
  CHECK(tones.size() == 5);
}

TEST_CASE("splits are disjoint") {
  const CorpusSpec spec = small_spec();
  const Lexicon lex = build_lexicon(spec);
  const Dataset ds = generate_dataset(lex, spec);
  std::set<std::string> train;
  for (const auto& s : ds.train) train.insert(format_sentence(s));
  std::set<std::string> held;
  for (const auto* split : {&ds.valid, &ds.test}) {
    for (const auto& s : *split) {
      const std::string line = format_sentence(s);
      CHECK(train.count(line) == 0);
      CHECK(held.insert(line).second);
    }
  }
}

TEST_CASE("tampered tones are caught by re-derivation") {
  const CorpusSpec spec = small_spec();
  const Lexicon lex = build_lexicon(spec);
  Rng rng(3);
  Sentence s = generate_sentence(lex, spec, rng);
  REQUIRE(sentence_consistent(s, lex));
  Sentence bad = s;
  bad.words[0].tones[0] = bad.words[0].tones[0] == T::kHigh ? T::kLow : T::kHigh;
  CHECK(!sentence_consistent(bad, lex));
  bad = s;
  bad.phrase_breaks[0] = false;
  CHECK(!sentence_consistent(bad, lex));
}

TEST_CASE("p_join = 0 breaks at every word") {
  CorpusSpec spec = small_spec();
  spec.p_join = 0.0;
  const Lexicon lex = build_lexicon(spec);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Sentence s = generate_sentence(lex, spec, rng);
    for (bool b : s.phrase_breaks) CHECK(b);
  }
}

TEST_CASE("one-mora unaccented single word gets a lone L%") {
  Lexicon lex;
  LexiconEntry e;
  e.graphemes = {"日"};
  e.readings = {{"a"}};
  e.reading_rule = {0};
  lex.entries = {e};
  lex.successors = {{0}};
  lex.word_classes = 1;
  lex.phoneme_inventory = {"a"};
  lex.grapheme_inventory = {"日"};
  CorpusSpec spec;
  spec.min_words = spec.max_words = 1;
  Rng rng(1);
  const Sentence s = generate_sentence(lex, spec, rng);
  REQUIRE(s.words.size() == 1);
  CHECK(s.words[0].tones == std::vector<T>{T::kPhraseEndLow});
}

TEST_CASE("tone rule hand cases") {
  CHECK(derive_tones(3, 2) == std::vector<T>{T::kPhraseStartLow, T::kAccent, T::kPhraseEndLow});
  CHECK(derive_tones(3, 0) == std::vector<T>{T::kPhraseStartLow, T::kHigh, T::kPhraseEndLow});
  for (int a = 0; a <= 1; ++a) CHECK(derive_tones(1, a) == std::vector<T>{T::kPhraseEndLow});
  CHECK(derive_tones(4, 1) == std::vector<T>{T::kAccent, T::kLow, T::kLow, T::kPhraseEndLow});
  CHECK(derive_tones(5, 3) == std::vector<T>{T::kPhraseStartLow, T::kHigh, T::kAccent, T::kLow, T::kPhraseEndLow});
  CHECK(derive_tones(4, 4) == std::vector<T>{T::kPhraseStartLow, T::kHigh, T::kHigh, T::kPhraseEndLow});
  CHECK_THROWS_AS(derive_tones(2, 3), std::invalid_argument);
  CHECK_THROWS_AS(derive_tones(0, 0), std::invalid_argument);
}

TEST_CASE("sandhi keeps the first nucleus") {
  const std::vector<AccentedWord> a = {{3, 2}, {2, 1}};
  CHECK(apply_sandhi(a) == 2);
  const std::vector<AccentedWord> b = {{3, 0}, {2, 1}};
  CHECK(apply_sandhi(b) == 4);
  const std::vector<AccentedWord> c = {{4, 3}};
  CHECK(apply_sandhi(c) == 3);
  const std::vector<AccentedWord> d = {{2, 0}, {1, 0}};
  CHECK(apply_sandhi(d) == 0);
}

TEST_CASE("tone pattern recognizer") {
  using V = std::vector<T>;
  CHECK(tones_well_formed(V{T::kPhraseEndLow}));
  CHECK(tones_well_formed(V{T::kPhraseStartLow, T::kHigh, T::kHigh, T::kPhraseEndLow}));
  CHECK(tones_well_formed(V{T::kAccent, T::kLow, T::kPhraseEndLow}));
  CHECK(!tones_well_formed(V{T::kHigh, T::kPhraseEndLow}));
  CHECK(!tones_well_formed(V{T::kPhraseStartLow, T::kAccent, T::kAccent, T::kPhraseEndLow}));
  CHECK(!tones_well_formed(V{T::kPhraseStartLow, T::kLow, T::kHigh, T::kPhraseEndLow}));
  CHECK(!tones_well_formed(V{T::kPhraseStartLow, T::kHigh}));
  CHECK(!tones_well_formed(V{}));
}

TEST_CASE("dataset files round trip") {
  CorpusSpec spec = small_spec();
  spec.train_size = 1000;
  const Lexicon lex = build_lexicon(spec);
  const Dataset ds = generate_dataset(lex, spec);
  testing::TempDir dir;
  write_dataset(dir / "train.tsv", ds.train);
  CHECK(read_dataset(dir / "train.tsv", &lex) == ds.train);

  write_lexicon(dir / "lexicon.tsv", lex);
  write_grammar(dir / "grammar.tsv", lex);
  const Lexicon back = read_lexicon(dir / "lexicon.tsv", dir / "grammar.tsv");
  REQUIRE(back.entries.size() == lex.entries.size());
  for (std::size_t i = 0; i < lex.entries.size(); ++i) {
    CHECK(back.entries[i].graphemes == lex.entries[i].graphemes);
    CHECK(back.entries[i].readings == lex.entries[i].readings);
    CHECK(back.entries[i].reading_rule == lex.entries[i].reading_rule);
    CHECK(back.entries[i].word_class == lex.entries[i].word_class);
    CHECK(back.entries[i].accent_type == lex.entries[i].accent_type);
  }
  CHECK(back.successors == lex.successors);
  CHECK(back.phoneme_inventory == lex.phoneme_inventory);
  CHECK(back.grapheme_inventory == lex.grapheme_inventory);
  CHECK(back.word_classes == lex.word_classes);
}

TEST_CASE("the example line parses") {
  const Sentence s = parse_sentence("^g1 g2 | g3\t^p1 p2 | p3\t^%L H | L%", 1);
  REQUIRE(s.words.size() == 2);
  CHECK(s.phrase_breaks == std::vector<bool>{true, false});
  CHECK(s.words[0].graphemes == std::vector<std::string>{"g1", "g2"});
  CHECK(s.words[1].phonemes == std::vector<std::string>{"p3"});
  CHECK(s.words[0].tones == std::vector<T>{T::kPhraseStartLow, T::kHigh});
  CHECK(s.words[1].lexicon_id == -1);
  CHECK(format_sentence(s) == "^g1 g2 | g3\t^p1 p2 | p3\t^%L H | L%");
}

TEST_CASE("malformed lines name line and column") {
  testing::TempDir dir;
  {
    std::ofstream out(dir / "bad.tsv");
    out << "^g1\t^p1\t^L%\n";
    out << "^g1 g2\t^p1 p2\t^L%\n";
  }
  try {
    read_dataset(dir / "bad.tsv");
    FAIL("expected an error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("column 15") != std::string::npos);
    CHECK(msg.find("alignment") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_sentence("^g1\t^p1", 4), DataError);
  CHECK_THROWS_AS(parse_sentence("^g1\t^p1\t^X", 4), DataError);
  CHECK_THROWS_AS(parse_sentence("g1\tp1\tL%", 4), DataError);
  CHECK_THROWS_AS(parse_sentence("^g1 | g2\t^p1\t^L%", 4), DataError);
  CHECK_THROWS_AS(parse_sentence("^g1 |\t^p1 |\t^L% |", 4), DataError);
}

TEST_CASE("an empty file is an empty dataset") {
  testing::TempDir dir;
  { std::ofstream out(dir / "empty.tsv"); }
  CHECK(read_dataset(dir / "empty.tsv").empty());
  CHECK_THROWS_AS(read_dataset(dir / "missing.tsv"), DataError);
}

TEST_CASE("frames follow the duration and f0 tables") {
  const PhonemeEmbedding emb = make_phoneme_embedding({"a", "ka", "shi"}, 1);
  Sentence s;
  s.words = {{{"日"}, {"a"}, {T::kPhraseEndLow}, 0}};
  s.phrase_breaks = {true};
  Frames f = render_frames(s, emb);
  CHECK(f.values.rows() == 2);
  CHECK(f.values.cols() == 10);
  CHECK(f.stop == std::vector<double>{0.0, 1.0});
  CHECK(f.values(0, kF0Column) == doctest::Approx(0.1));
  CHECK(f.values(1, kEnergyColumn) == 1.0);

  s.words = {{{"日", "本"}, {"ka", "a", "shi", "ka"}, {T::kAccent, T::kLow, T::kLow, T::kPhraseEndLow}, 0}};
  f = render_frames(s, emb);
  CHECK(f.values.rows() == 2 + 3 + 4 + 2);
  CHECK(f.values(0, kF0Column) == 1.0);
  CHECK(f.values(2, kF0Column) == doctest::Approx(0.3));
  CHECK(f.phoneme_of == std::vector<int>{0, 0, 1, 1, 1, 2, 2, 2, 2, 3, 3});
  double norm = 0.0;
  for (int d = 0; d < kEmbeddingDim; ++d) norm += f.values(5, d) * f.values(5, d);
  CHECK(norm == doctest::Approx(1.0));

  CHECK(tone_f0(T::kPhraseStartLow) == 0.2);
  CHECK(tone_f0(T::kHigh) == 0.8);

  s.words[0].phonemes[1] = "zz";
  CHECK_THROWS_AS(render_frames(s, emb), DataError);
}

TEST_CASE("phoneme embeddings are well separated and persist") {
  const Lexicon lex = build_lexicon(CorpusSpec());
  const PhonemeEmbedding emb = make_phoneme_embedding(lex.phoneme_inventory, 1);
  CHECK(emb.min_pairwise_distance() >= 0.9);
  testing::TempDir dir;
  write_embedding(dir / "emb.tsv", emb);
  const PhonemeEmbedding back = read_embedding(dir / "emb.tsv");
  CHECK(back.symbols == emb.symbols);
  CHECK(back.vectors == emb.vectors);
}

}  // namespace
}  // namespace pngbert::corpus
