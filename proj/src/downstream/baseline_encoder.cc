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

#include "pngbert/downstream/baseline_encoder.h"

#include <algorithm>
#include <cmath>

#include "pngbert/common/errors.h"
#include "pngbert/common/rng.h"
#include "pngbert/corpus/toy_corpus.h"

namespace pngbert::downstream {

using nn::Tensor;
using nn::Var;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

std::string conv_prefix(int k) { return kBaselinePrefix + "conv" + std::to_string(k) + "."; }

}  // namespace

void BaselineConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("baseline encoder: vocab_size must be positive");
  if (embedding_dim < 1 || tone_dim < 1 || channels < 1 || lstm_hidden < 1 || conv_layers < 0) {
    throw ConfigError("baseline encoder: dimensions must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("baseline encoder: kernel must be odd");
}

void init_baseline_encoder(const BaselineConfig& config, nn::ParameterStore& params, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, {0x62617365ULL});
  params.add(kBaselinePrefix + "embedding", gaussian(config.vocab_size, config.embedding_dim, 0.3, rng));
  std::size_t in = config.embedding_dim;
  if (config.tone_input) {
    params.add(kBaselinePrefix + "tone_embedding", gaussian(corpus::kToneCount, config.tone_dim, 0.3, rng));
    in += config.tone_dim;
  }
  for (int k = 0; k < config.conv_layers; ++k) {
    const std::size_t fan_in = in * config.kernel;
    params.add(conv_prefix(k) + "weight", gaussian(fan_in, config.channels, std::sqrt(2.0 / fan_in), rng));
    params.add(conv_prefix(k) + "bias", Tensor::zeros(1, config.channels));
    params.add(conv_prefix(k) + "ln.gain", Tensor({1, static_cast<std::size_t>(config.channels)}, 1.0));
    params.add(conv_prefix(k) + "ln.bias", Tensor::zeros(1, config.channels));
    in = config.channels;
  }
  const std::size_t h = config.lstm_hidden;
  for (const char* dir : {"lstm.forward.", "lstm.backward."}) {
    const std::string p = kBaselinePrefix + dir;
    params.add(p + "w_input", gaussian(in, 4 * h, std::sqrt(1.0 / in), rng));
    params.add(p + "w_hidden", gaussian(h, 4 * h, std::sqrt(1.0 / h), rng));
    Tensor b = Tensor::zeros(1, 4 * h);
    for (std::size_t i = h; i < 2 * h; ++i) b[i] = 1.0;
    params.add(p + "bias", std::move(b));
  }
}

Var lstm_over_sequences(nn::Graph& g, Var x, const std::vector<std::size_t>& offsets, Var w_input, Var w_hidden,
                        Var bias, bool reverse) {
  if (offsets.size() < 2 || offsets.back() != x.rows()) {
    throw std::invalid_argument("lstm_over_sequences: offsets do not cover the input");
  }
  const std::size_t batch = offsets.size() - 1, hidden = w_hidden.rows();
  std::size_t steps = 0;
  for (std::size_t b = 0; b < batch; ++b) steps = std::max(steps, offsets[b + 1] - offsets[b]);

  nn::LstmState state{g.constant(Tensor::zeros(batch, hidden)), g.constant(Tensor::zeros(batch, hidden))};
  std::vector<Var> outputs;
  std::vector<int> back(x.rows(), -1);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<int> index(batch, -1);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = offsets[b + 1] - offsets[b];
      if (t >= len) continue;
      const std::size_t row = offsets[b] + (reverse ? len - 1 - t : t);
      index[b] = static_cast<int>(row);
      back[row] = static_cast<int>(t * batch + b);
    }
    state = nn::lstm_cell(nn::gather_rows(x, index), state, w_input, w_hidden, bias);
    outputs.push_back(state.h);
  }
  // Each sequence is left-aligned in its own pass, so padding rows only
  // trail a sequence and never feed its real tokens.
  return nn::gather_rows(nn::concat_rows(outputs), back);
}

Var baseline_encode(nn::Graph& g, nn::ParameterStore& params, const BaselineConfig& config,
                    const std::vector<int>& ids, const std::vector<int>& tones,
                    const std::vector<std::size_t>& offsets) {
  if (ids.empty()) throw std::invalid_argument("baseline_encode: empty input");
  if (config.tone_input != !tones.empty() || (config.tone_input && tones.size() != ids.size())) {
    throw std::invalid_argument("baseline_encode: tone inputs must match the tone_input setting");
  }
  for (int id : ids) {
    if (id < 0 || id >= config.vocab_size) throw DataError("baseline_encode: token id out of range");
  }
  auto P = [&](const std::string& name) { return g.param(params.at(name)); };
  Var x = nn::embedding_lookup(P(kBaselinePrefix + "embedding"), ids);
  if (config.tone_input) {
    for (int t : tones) {
      if (t < 0 || t >= corpus::kToneCount) throw DataError("baseline_encode: tone id out of range");
    }
    x = nn::concat_cols({x, nn::embedding_lookup(P(kBaselinePrefix + "tone_embedding"), tones)});
  }
  for (int k = 0; k < config.conv_layers; ++k) {
    const std::string p = conv_prefix(k);
    x = nn::relu(nn::conv1d(x, P(p + "weight"), P(p + "bias"), offsets, config.kernel));
    x = nn::layer_norm(x, P(p + "ln.gain"), P(p + "ln.bias"));
  }
  const std::string fw = kBaselinePrefix + "lstm.forward.", bw = kBaselinePrefix + "lstm.backward.";
  Var forward = lstm_over_sequences(g, x, offsets, P(fw + "w_input"), P(fw + "w_hidden"), P(fw + "bias"), false);
  Var backward = lstm_over_sequences(g, x, offsets, P(bw + "w_input"), P(bw + "w_hidden"), P(bw + "bias"), true);
  return nn::concat_cols({forward, backward});
}

}  // namespace pngbert::downstream
