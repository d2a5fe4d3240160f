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

#ifndef PNGBERT_METRICS_PROBE_H_
#define PNGBERT_METRICS_PROBE_H_

#include <cstdint>
#include <vector>

#include "pngbert/encoder/evaluation.h"
#include "pngbert/nn/tensor.h"

namespace pngbert::metrics {

struct ProbeConfig {
  double lr = 1e-3;
  int steps = 2000;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  encoder::Accuracy ta;  // every token
  encoder::Accuracy pa;  // tokens labelled %L or L%
  encoder::Accuracy aa;  // tokens labelled A
};

// Trains one affine 5-way tone classifier on fixed features with full-batch
// Adam and scores it on the evaluation rows.
ProbeResult linear_probe(const nn::Tensor& train_features, const std::vector<int>& train_labels,
                         const nn::Tensor& eval_features, const std::vector<int>& eval_labels,
                         const ProbeConfig& config = {});

// Scores fixed predictions the same way.
ProbeResult tone_accuracies(const std::vector<int>& predicted, const std::vector<int>& labels);

}  // namespace pngbert::metrics

#endif  // PNGBERT_METRICS_PROBE_H_
