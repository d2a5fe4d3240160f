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

#include "pngbert/metrics/probe.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pngbert/common/rng.h"
#include "pngbert/corpus/toy_corpus.h"
#include "pngbert/nn/graph.h"
#include "pngbert/nn/ops.h"
#include "pngbert/nn/optim.h"

namespace pngbert::metrics {

using corpus::Tone;

ProbeResult tone_accuracies(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("tone_accuracies: size mismatch");
  ProbeResult r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool hit = predicted[i] == labels[i];
    const int label = labels[i];
    ++r.ta.total;
    r.ta.correct += hit;
    if (label == corpus::tone_index(Tone::kPhraseStartLow) || label == corpus::tone_index(Tone::kPhraseEndLow)) {
      ++r.pa.total;
      r.pa.correct += hit;
    }
    if (label == corpus::tone_index(Tone::kAccent)) {
      ++r.aa.total;
      r.aa.correct += hit;
    }
  }
  return r;
}

ProbeResult linear_probe(const nn::Tensor& train_features, const std::vector<int>& train_labels,
                         const nn::Tensor& eval_features, const std::vector<int>& eval_labels,
                         const ProbeConfig& config) {
  if (train_features.rows() != train_labels.size() || eval_features.rows() != eval_labels.size()) {
    throw std::invalid_argument("linear_probe: one label per feature row required");
  }
  if (train_labels.empty() || eval_labels.empty()) throw std::invalid_argument("linear_probe: empty split");
  if (train_features.cols() != eval_features.cols()) throw std::invalid_argument("linear_probe: width mismatch");
  const std::size_t d = train_features.cols();
  Rng rng = make_rng(config.seed, {0x70726f6265ULL});
  std::normal_distribution<double> n(0.0, 0.01);
  nn::ParameterStore params;
  nn::Tensor w = nn::Tensor::zeros(d, corpus::kToneCount);
  for (double& v : w.values()) v = n(rng);
  params.add("probe/weight", std::move(w));
  params.add("probe/bias", nn::Tensor::zeros(1, corpus::kToneCount));
  nn::OptimizerState opt;
  const std::vector<unsigned char> all(train_labels.size(), 1);
  for (int step = 0; step < config.steps; ++step) {
    nn::Graph g;
    nn::Var x = g.constant(train_features);
    nn::Var loss = nn::cross_entropy(nn::linear(x, g.param(params.at("probe/weight")), g.param(params.at("probe/bias"))),
                                     train_labels, all);
    params.zero_grad();
    g.backward(loss);
    nn::adam_step(params, opt, config.lr);
  }
  nn::Graph g(false);
  const nn::Tensor logits = nn::linear(g.constant(eval_features), g.param(params.at("probe/weight")),
                                       g.param(params.at("probe/bias")))
                                .value();
  std::vector<int> predicted(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    predicted[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return tone_accuracies(predicted, eval_labels);
}

}  // namespace pngbert::metrics
