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

#include "pngbert/codec/masking.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pngbert/common/errors.h"

namespace pngbert::codec {

void MaskingPolicy::validate() const {
  if (!(select_fraction > 0.0 && select_fraction <= 1.0)) throw ConfigError("masking: select_fraction must be in (0,1]");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("masking: strategy weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ConfigError("masking: at least one strategy weight must be positive");
}

std::array<double, kStrategyCount> MaskingPolicy::probabilities() const {
  validate();
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::array<double, kStrategyCount> p;
  for (int i = 0; i < kStrategyCount; ++i) p[i] = weights[i] / total;
  return p;
}

std::size_t MaskedSequence::loss_count() const {
  return static_cast<std::size_t>(std::count(loss_mask.begin(), loss_mask.end(), 1));
}

Rng masking_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sentence_index) {
  return make_rng(seed, {0x6d61736bULL, epoch, sentence_index});
}

MaskedSequence unmasked(const TokenSequence& seq) {
  MaskedSequence m;
  m.input = seq;
  m.target = seq.ids;
  m.loss_mask.assign(seq.size(), 0);
  return m;
}

MaskedSequence mask_for_mlm(const TokenSequence& seq, const Vocabulary& vocab, const MaskingPolicy& policy,
                            Rng& rng) {
  const auto probs = policy.probabilities();
  MaskedSequence m = unmasked(seq);
  const int n = seq.word_count;
  if (n <= 0) return m;
  const int k = std::min(n, static_cast<int>(std::ceil(policy.select_fraction * n - 1e-9)));

  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  std::vector<int> words(n);
  std::iota(words.begin(), words.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> d(i, n - 1);
    std::swap(words[i], words[d(rng)]);
  }
  std::discrete_distribution<int> pick(probs.begin(), probs.end());
  std::vector<int> strategy_of(n, -1);
  for (int i = 0; i < k; ++i) {
    const Strategy s = static_cast<Strategy>(pick(rng));
    m.selected_words.push_back(words[i]);
    m.strategies.push_back(s);
    strategy_of[words[i]] = static_cast<int>(s);
  }

  std::uniform_int_distribution<int> random_phoneme(vocab.phoneme_begin(), vocab.phoneme_end() - 1);
  std::uniform_int_distribution<int> random_grapheme(vocab.grapheme_begin(), vocab.grapheme_end() - 1);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const int w = seq.word_ids[t];
    if (w < 0 || strategy_of[w] < 0) continue;
    const bool phoneme = seq.segment_ids[t] == 0;
    bool changed = false;
    switch (static_cast<Strategy>(strategy_of[w])) {
      case Strategy::kMaskBoth:
        m.input.ids[t] = kMask;
        changed = true;
        break;
      case Strategy::kMaskGraphemeOnly:
        if (!phoneme) m.input.ids[t] = kMask;
        changed = !phoneme;
        break;
      case Strategy::kMaskPhonemeOnly:
        if (phoneme) m.input.ids[t] = kMask;
        changed = phoneme;
        break;
      case Strategy::kKeepIntact:
        break;
      case Strategy::kRandomReplace:
        // A draw may equal the original token; it is kept as is.
        m.input.ids[t] = phoneme ? random_phoneme(rng) : random_grapheme(rng);
        changed = true;
        break;
    }
    if (policy.loss_on_unchanged || changed) m.loss_mask[t] = 1;
  }
  return m;
}

MaskedSequence mask_segment(const MaskedSequence& masked, Segment which) {
  MaskedSequence m = masked;
  const Span span = which == Segment::kPhoneme ? phoneme_span(m.input) : grapheme_span(m.input);
  for (std::size_t t = span.begin; t < span.end; ++t) {
    m.input.ids[t] = kMask;
    m.loss_mask[t] = 1;
  }
  return m;
}

MaskedSequence mask_segment(const TokenSequence& seq, Segment which) { return mask_segment(unmasked(seq), which); }

TokenSequence mask_graphemes_for_inference(const TokenSequence& seq) {
  TokenSequence out = seq;
  const Span span = grapheme_span(out);
  for (std::size_t t = span.begin; t < span.end; ++t) out.ids[t] = kMask;
  return out;
}

}  // namespace pngbert::codec
