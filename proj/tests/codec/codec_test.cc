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

#include <boost/math/distributions/chi_squared.hpp>
#include <set>

#include "doctest.h"
#include "pngbert/codec/masking.h"
#include "pngbert/codec/sequence.h"
#include "pngbert/codec/vocabulary.h"
#include "pngbert/common/errors.h"
#include "pngbert/corpus/toy_corpus.h"
#include "test_util.h"

namespace pngbert::codec {
namespace {

using corpus::Sentence;
using corpus::Word;

Sentence one_word() {
  Sentence s;
  s.words = {Word{{"g1"}, {"p1", "p2"}, {corpus::Tone::kPhraseStartLow, corpus::Tone::kPhraseEndLow}, 0}};
  s.phrase_breaks = {true};
  return s;
}

const Vocabulary& tiny_vocab() {
  static const Vocabulary v({"p2", "p1"}, {"g1"});
  return v;
}

struct Fixture {
  corpus::CorpusSpec spec;
  corpus::Lexicon lex;
  corpus::Dataset ds;
  Vocabulary vocab;
  Fixture() {
    spec.seed = 11;
    spec.train_size = 1000;
    spec.valid_size = 10;
    spec.test_size = 10;
    lex = corpus::build_lexicon(spec);
    ds = corpus::generate_dataset(lex, spec);
    vocab = build_vocabulary(lex);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TEST_CASE("vocabulary layout") {
  const Vocabulary& v = tiny_vocab();
  REQUIRE(v.size() == 7);
  CHECK(v.name(0) == "[PAD]");
  CHECK(v.name(3) == "[MASK]");
  CHECK(v.id(Segment::kPhoneme, "p1") == 4);
  CHECK(v.id(Segment::kPhoneme, "p2") == 5);
  CHECK(v.id(Segment::kGrapheme, "g1") == 6);
  CHECK(v.symbol(6) == "g1");
  CHECK(v.is_phoneme(5));
  CHECK(!v.is_phoneme(6));
  CHECK_THROWS_AS(v.id(Segment::kGrapheme, "p1"), DataError);
}

TEST_CASE("colliding symbols stay distinct") {
  const Vocabulary v({"a", "ka"}, {"a"});
  CHECK(v.id(Segment::kPhoneme, "a") != v.id(Segment::kGrapheme, "a"));
  CHECK_THROWS_AS(Vocabulary({"a", "a"}, {"b"}), DataError);
  CHECK_THROWS_AS(Vocabulary({}, {"b"}), DataError);
}

TEST_CASE("vocabulary is stable and persists") {
  const auto& f = fixture();
  CHECK(build_vocabulary(f.lex) == f.vocab);
  CHECK(build_vocabulary(f.lex).hash() == f.vocab.hash());
  testing::TempDir dir;
  write_vocabulary(dir / "vocab.txt", f.vocab);
  CHECK(read_vocabulary(dir / "vocab.txt") == f.vocab);
  {
    std::ofstream out(dir / "bad.txt");
    out << "[PAD]\n[CLS]\n[MASK]\n[SEP]\np:a\ng:b\n";
  }
  CHECK_THROWS_AS(read_vocabulary(dir / "bad.txt"), DataError);
}

TEST_CASE("one-word layout") {
  const TokenSequence seq = assemble_sequence(one_word(), tiny_vocab());
  CHECK(seq.ids == std::vector<int>{kCls, 4, 5, kSep, 6, kSep});
  CHECK(seq.segment_ids == std::vector<int>{0, 0, 0, 0, 1, 1});
  CHECK(seq.word_ids == std::vector<int>{-1, 0, 0, -1, 0, -1});
  CHECK(seq.token_positions == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(!seq.word_positions.has_value());
  const Span p = phoneme_span(seq);
  CHECK(p.begin == 1);
  CHECK(p.end == 3);
  const Span g = grapheme_span(seq);
  CHECK(g.begin == 4);
  CHECK(g.end == 5);

  const TokenSequence wp = assemble_sequence(one_word(), tiny_vocab(), true);
  REQUIRE(wp.word_positions.has_value());
  CHECK(*wp.word_positions == std::vector<int>{0, 1, 1, 0, 1, 0});
  CHECK(wp.ids == seq.ids);
}

TEST_CASE("assembly errors") {
  CHECK_THROWS_AS(assemble_sequence(Sentence{}, tiny_vocab()), std::invalid_argument);
  Sentence s = one_word();
  s.words[0].graphemes = {"zz"};
  CHECK_THROWS_AS(assemble_sequence(s, tiny_vocab()), DataError);
  s = one_word();
  CHECK_THROWS_AS(assemble_sequence(s, tiny_vocab(), false, 5), DataError);
}

TEST_CASE("layout and round trip on generated sentences") {
  const auto& f = fixture();
  for (const Sentence& s : f.ds.train) {
    const TokenSequence seq = assemble_sequence(s, f.vocab);
    const Span p = phoneme_span(seq);
    CHECK(p.size() == s.mora_count());
    CHECK(seq.ids.front() == kCls);
    CHECK(seq.ids[p.end] == kSep);
    CHECK(seq.ids.back() == kSep);
    const Detokenized d = detokenize(seq.ids, f.vocab);
    CHECK(d.phonemes == s.phonemes());
    CHECK(d.graphemes == s.graphemes());
    std::set<int> segments(seq.segment_ids.begin(), seq.segment_ids.end());
    CHECK(segments.size() == 2);
  }
}

TEST_CASE("forced strategies") {
  const TokenSequence seq = assemble_sequence(one_word(), tiny_vocab());
  MaskingPolicy policy;
  policy.weights = {1, 0, 0, 0, 0};
  Rng rng(1);
  MaskedSequence m = mask_for_mlm(seq, tiny_vocab(), policy, rng);
  CHECK(m.input.ids == std::vector<int>{kCls, kMask, kMask, kSep, kMask, kSep});
  CHECK(m.target == seq.ids);
  CHECK(m.loss_mask == std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0});

  policy.weights = {0, 0, 0, 1, 0};
  m = mask_for_mlm(seq, tiny_vocab(), policy, rng);
  CHECK(m.input.ids == seq.ids);
  CHECK(m.loss_mask == std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0});
  policy.loss_on_unchanged = false;
  m = mask_for_mlm(seq, tiny_vocab(), policy, rng);
  CHECK(m.loss_count() == 0);

  policy = MaskingPolicy();
  policy.weights = {0, 1, 0, 0, 0};
  m = mask_for_mlm(seq, tiny_vocab(), policy, rng);
  CHECK(m.input.ids == std::vector<int>{kCls, 4, 5, kSep, kMask, kSep});
  policy.weights = {0, 0, 1, 0, 0};
  m = mask_for_mlm(seq, tiny_vocab(), policy, rng);
  CHECK(m.input.ids == std::vector<int>{kCls, kMask, kMask, kSep, 6, kSep});

  policy.weights = {0, 0, 0, 0, 1};
  for (int i = 0; i < 50; ++i) {
    m = mask_for_mlm(seq, tiny_vocab(), policy, rng);
    CHECK(tiny_vocab().is_phoneme(m.input.ids[1]));
    CHECK(tiny_vocab().is_phoneme(m.input.ids[2]));
    CHECK(tiny_vocab().is_grapheme(m.input.ids[4]));
  }
}

TEST_CASE("policy validation") {
  MaskingPolicy p;
  auto probs = p.probabilities();
  CHECK(probs[0] == doctest::Approx(48.0 / 84));
  CHECK(probs[4] == doctest::Approx(10.0 / 84));
  p.weights = {0, 0, 0, 0, 0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = MaskingPolicy();
  p.weights[2] = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = MaskingPolicy();
  p.select_fraction = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("selection count and word alignment") {
  const auto& f = fixture();
  MaskingPolicy policy;
  std::size_t index = 0;
  for (const Sentence& s : f.ds.train) {
    const TokenSequence seq = assemble_sequence(s, f.vocab);
    Rng rng = masking_rng(3, 0, index++);
    const MaskedSequence m = mask_for_mlm(seq, f.vocab, policy, rng);
    const int n = static_cast<int>(s.words.size());
    CHECK(m.selected_words.size() == static_cast<std::size_t>((n + 3) / 4));
    std::set<int> chosen(m.selected_words.begin(), m.selected_words.end());
    CHECK(chosen.size() == m.selected_words.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const bool in_selected = seq.word_ids[t] >= 0 && chosen.count(seq.word_ids[t]);
      CHECK(static_cast<bool>(m.loss_mask[t]) == in_selected);
      if (seq.word_ids[t] < 0) CHECK(m.input.ids[t] == seq.ids[t]);
    }
    for (std::size_t i = 0; i < m.selected_words.size(); ++i) {
      const int w = m.selected_words[i];
      bool p_masked = true, g_masked = true;
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (seq.word_ids[t] != w) continue;
        (seq.segment_ids[t] == 0 ? p_masked : g_masked) &= m.input.ids[t] == kMask;
      }
      if (m.strategies[i] == Strategy::kMaskBoth) CHECK((p_masked && g_masked));
    }
    // Same stream reproduces the same masking.
    Rng again = masking_rng(3, 0, index - 1);
    CHECK(mask_for_mlm(seq, f.vocab, policy, again).input == m.input);
  }
}

TEST_CASE("strategy frequencies match the policy") {
  const auto& f = fixture();
  MaskingPolicy policy;
  const auto probs = policy.probabilities();
  std::array<double, kStrategyCount> counts{};
  std::size_t total = 0;
  std::vector<TokenSequence> seqs;
  for (const Sentence& s : f.ds.train) seqs.push_back(assemble_sequence(s, f.vocab));
  for (std::uint64_t epoch = 0; total < 100000; ++epoch) {
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      Rng rng = masking_rng(5, epoch, i);
      for (Strategy s : mask_for_mlm(seqs[i], f.vocab, policy, rng).strategies) {
        counts[static_cast<int>(s)] += 1;
        ++total;
      }
    }
  }
  double chi2 = 0.0;
  for (int k = 0; k < kStrategyCount; ++k) {
    CHECK(std::abs(counts[k] / total - probs[k]) <= 0.01);
    const double expected = probs[k] * total;
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(kStrategyCount - 1), chi2));
  CHECK(p > 0.01);
}

TEST_CASE("segment masking") {
  const TokenSequence seq = assemble_sequence(one_word(), tiny_vocab());
  const MaskedSequence g2p = mask_segment(seq, Segment::kPhoneme);
  CHECK(g2p.input.ids == std::vector<int>{kCls, kMask, kMask, kSep, 6, kSep});
  CHECK(g2p.loss_mask == std::vector<std::uint8_t>{0, 1, 1, 0, 0, 0});
  const MaskedSequence p2g = mask_segment(seq, Segment::kGrapheme);
  CHECK(p2g.input.ids == std::vector<int>{kCls, 4, 5, kSep, kMask, kSep});
  CHECK(p2g.loss_mask == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 0});
  const MaskedSequence both = mask_segment(g2p, Segment::kGrapheme);
  CHECK(both.input.ids == std::vector<int>{kCls, kMask, kMask, kSep, kMask, kSep});
  CHECK(both.loss_mask == std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0});
  CHECK(both.target == seq.ids);
}

TEST_CASE("inference grapheme masking") {
  const TokenSequence seq = assemble_sequence(one_word(), tiny_vocab());
  const TokenSequence once = mask_graphemes_for_inference(seq);
  CHECK(once.ids == std::vector<int>{kCls, 4, 5, kSep, kMask, kSep});
  CHECK(mask_graphemes_for_inference(once) == once);
  CHECK(std::equal(seq.ids.begin(), seq.ids.begin() + 4, once.ids.begin()));
}

}  // namespace
}  // namespace pngbert::codec
