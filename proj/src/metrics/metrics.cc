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

#include "pngbert/metrics/metrics.h"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>

namespace pngbert::metrics {

std::vector<int> argmax_path(const nn::Tensor& matrix) {
  std::vector<int> path(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    auto row = matrix.row(r);
    path[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return path;
}

AlignmentError classify_alignment(const AttentionRecord& record, const AerOptions& options) {
  if (record.hit_max_steps) return AlignmentError::kMaxSteps;
  const std::vector<int> path = argmax_path(record.matrix);
  for (std::size_t t = 1; t < path.size(); ++t) {
    if (std::abs(path[t] - path[t - 1]) > options.jump_threshold) return AlignmentError::kJump;
  }
  if (options.consecutive_duration) {
    int run = 0;
    for (std::size_t t = 0; t < path.size(); ++t) {
      run = t > 0 && path[t] == path[t - 1] ? run + 1 : 1;
      if (run > options.duration_threshold) return AlignmentError::kDwell;
    }
  } else {
    std::map<int, int> total;
    for (int p : path) {
      if (++total[p] > options.duration_threshold) return AlignmentError::kDwell;
    }
  }
  return AlignmentError::kNone;
}

double attention_error_rate(const std::vector<AttentionRecord>& records, const AerOptions& options) {
  if (records.empty()) throw std::invalid_argument("attention_error_rate: no records");
  std::size_t errors = 0;
  for (const auto& r : records) {
    if (classify_alignment(r, options) != AlignmentError::kNone) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(records.size());
}

double monotonic_fraction(const std::vector<AttentionRecord>& records) {
  if (records.empty()) throw std::invalid_argument("monotonic_fraction: no records");
  std::size_t ok = 0;
  for (const auto& r : records) {
    const std::vector<int> path = argmax_path(r.matrix);
    if (std::is_sorted(path.begin(), path.end())) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

std::size_t levenshtein(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diagonal + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
      diagonal = up;
    }
  }
  return row[hyp.size()];
}

double cer(const std::vector<std::vector<std::string>>& refs, const std::vector<std::vector<std::string>>& hyps) {
  if (refs.size() != hyps.size()) throw std::invalid_argument("cer: reference and hypothesis counts differ");
  std::size_t distance = 0, length = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    distance += levenshtein(refs[i], hyps[i]);
    length += refs[i].size();
  }
  if (length == 0) throw std::invalid_argument("cer: empty references");
  return static_cast<double>(distance) / static_cast<double>(length);
}

std::vector<std::string> oracle_decode(const nn::Tensor& frames, const corpus::PhonemeEmbedding& embedding) {
  if (frames.rows() > 0 && frames.cols() != static_cast<std::size_t>(corpus::kFrameDim)) {
    throw std::invalid_argument("oracle_decode: frames must have " + std::to_string(corpus::kFrameDim) + " columns");
  }
  if (embedding.symbols.empty()) throw std::invalid_argument("oracle_decode: empty embedding");
  std::vector<std::string> out;
  int last = -1;
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    int best = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < embedding.vectors.size(); ++k) {
      double d = 0.0;
      for (int c = 0; c < corpus::kEmbeddingDim; ++c) {
        const double diff = frames(r, c) - embedding.vectors[k][c];
        d += diff * diff;
      }
      if (d < best_distance) {
        best_distance = d;
        best = static_cast<int>(k);
      }
    }
    if (best != last) out.push_back(embedding.symbols[best]);
    last = best;
  }
  return out;
}

std::vector<bool> homograph_token_mask(const corpus::Sentence& sentence, const codec::TokenSequence& sequence,
                                       const corpus::Lexicon& lexicon) {
  std::vector<bool> mask(sequence.size(), false);
  const codec::Span span = codec::phoneme_span(sequence);
  for (std::size_t t = span.begin; t < span.end; ++t) {
    const int w = sequence.word_ids[t];
    if (w < 0 || static_cast<std::size_t>(w) >= sentence.words.size()) {
      throw std::invalid_argument("homograph_token_mask: sequence does not belong to the sentence");
    }
    const int id = sentence.words[w].lexicon_id;
    mask[t] = id >= 0 && lexicon.entries.at(id).is_homograph();
  }
  return mask;
}

encoder::Accuracy reading_prior_accuracy(const std::vector<corpus::Sentence>& reference,
                                         const std::vector<corpus::Sentence>& eval, const corpus::Lexicon& lexicon,
                                         bool homographs_only) {
  std::map<int, std::map<std::vector<std::string>, std::size_t>> counts;
  for (const auto& s : reference) {
    for (const auto& w : s.words) ++counts[w.lexicon_id][w.phonemes];
  }
  std::map<int, std::vector<std::string>> prior;
  for (const auto& [id, readings] : counts) {
    std::size_t best = 0;
    for (const auto& [reading, n] : readings) {
      if (n > best) {
        best = n;
        prior[id] = reading;
      }
    }
  }
  encoder::Accuracy acc;
  for (const auto& s : eval) {
    for (const auto& w : s.words) {
      if (homographs_only && !(w.lexicon_id >= 0 && lexicon.entries.at(w.lexicon_id).is_homograph())) continue;
      auto it = prior.find(w.lexicon_id);
      const std::vector<std::string> guess =
          it != prior.end() ? it->second : lexicon.entries.at(w.lexicon_id).readings.front();
      for (std::size_t i = 0; i < w.phonemes.size(); ++i) {
        ++acc.total;
        if (i < guess.size() && guess[i] == w.phonemes[i]) ++acc.correct;
      }
    }
  }
  return acc;
}

G2pBreakdown g2p_accuracy(nn::ParameterStore& params, const encoder::EncoderConfig& config,
                          const codec::Vocabulary& vocab, const std::vector<corpus::Sentence>& sentences,
                          const corpus::Lexicon& lexicon, const encoder::EvalOptions& options) {
  std::vector<codec::TokenSequence> seqs;
  std::vector<std::vector<bool>> homograph;
  for (const auto& s : sentences) {
    seqs.push_back(codec::assemble_sequence(s, vocab, config.use_word_positions));
    homograph.push_back(homograph_token_mask(s, seqs.back(), lexicon));
  }
  const auto preds = encoder::masked_predictions(params, config, vocab, seqs, encoder::MaskMode::kG2p, options);
  G2pBreakdown out;
  out.all = encoder::accuracy_of(preds);
  out.homographs =
      encoder::accuracy_of(preds, [&](const encoder::TokenPrediction& p) { return homograph[p.sequence][p.position]; });
  return out;
}

}  // namespace pngbert::metrics
