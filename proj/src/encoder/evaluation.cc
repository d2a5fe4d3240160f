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

#include "pngbert/encoder/evaluation.h"

#include <algorithm>

namespace pngbert::encoder {

std::optional<MaskMode> parse_mask_mode(const std::string& name) {
  if (name == "mlm") return MaskMode::kMlm;
  if (name == "g2p") return MaskMode::kG2p;
  if (name == "p2g") return MaskMode::kP2g;
  return std::nullopt;
}

std::string mask_mode_name(MaskMode mode) {
  switch (mode) {
    case MaskMode::kMlm: return "mlm";
    case MaskMode::kG2p: return "g2p";
    case MaskMode::kP2g: return "p2g";
  }
  return "?";
}

std::vector<TokenPrediction> masked_predictions(nn::ParameterStore& params, const EncoderConfig& config,
                                                const codec::Vocabulary& vocab,
                                                const std::vector<codec::TokenSequence>& sequences, MaskMode mode,
                                                const EvalOptions& options) {
  std::vector<TokenPrediction> out;
  Rng unused(0);
  for (std::size_t start = 0; start < sequences.size(); start += options.batch_size) {
    const std::size_t stop = std::min(sequences.size(), start + options.batch_size);
    std::vector<codec::MaskedSequence> masked;
    for (std::size_t i = start; i < stop; ++i) {
      codec::MaskedSequence m;
      switch (mode) {
        case MaskMode::kMlm: {
          Rng rng = codec::masking_rng(options.seed, 0, i);
          m = codec::mask_for_mlm(sequences[i], vocab, options.policy, rng);
          break;
        }
        case MaskMode::kG2p:
          m = codec::mask_segment(sequences[i], codec::Segment::kPhoneme);
          break;
        case MaskMode::kP2g:
          m = codec::mask_segment(sequences[i], codec::Segment::kGrapheme);
          break;
      }
      if (options.mask_grapheme_input) m.input = codec::mask_graphemes_for_inference(m.input);
      masked.push_back(std::move(m));
    }
    std::vector<const codec::TokenSequence*> inputs;
    for (const auto& m : masked) inputs.push_back(&m.input);
    const EncoderBatch batch = pack(inputs);
    std::vector<int> rows;
    std::vector<TokenPrediction> pending;
    for (std::size_t k = 0; k < masked.size(); ++k) {
      for (std::size_t t = 0; t < masked[k].loss_mask.size(); ++t) {
        if (!masked[k].loss_mask[t]) continue;
        rows.push_back(static_cast<int>(batch.offsets[k] + t));
        pending.push_back({start + k, t, masked[k].target[t], -1});
      }
    }
    if (rows.empty()) continue;
    nn::Graph g(false);
    const EncoderOutput enc = encode(g, params, config, batch, false, unused);
    const nn::Tensor& logits = mlm_logits(g, params, enc.final, rows).value();
    for (std::size_t r = 0; r < pending.size(); ++r) {
      const auto row = logits.row(r);
      pending[r].predicted = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      out.push_back(pending[r]);
    }
  }
  return out;
}

Accuracy accuracy_of(const std::vector<TokenPrediction>& predictions,
                     const std::function<bool(const TokenPrediction&)>& keep) {
  Accuracy a;
  for (const auto& p : predictions) {
    if (keep && !keep(p)) continue;
    ++a.total;
    a.correct += p.predicted == p.target;
  }
  return a;
}

Accuracy masked_accuracy(nn::ParameterStore& params, const EncoderConfig& config, const codec::Vocabulary& vocab,
                         const std::vector<codec::TokenSequence>& sequences, MaskMode mode,
                         const EvalOptions& options) {
  return accuracy_of(masked_predictions(params, config, vocab, sequences, mode, options));
}

}  // namespace pngbert::encoder
