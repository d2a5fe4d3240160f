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

#ifndef PNGBERT_NN_OPTIM_H_
#define PNGBERT_NN_OPTIM_H_

#include <cstdint>
#include <map>
#include <string>

#include "pngbert/nn/graph.h"

namespace pngbert::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2_coefficient = 0.0;
  // false: L2 folded into the gradient before the moment updates.
  // true: AdamW-style decay applied directly to the parameter.
  bool decoupled = false;
};

struct AdamMoments {
  Tensor first;
  Tensor second;
};

struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

// One Adam update of every trainable parameter, using its accumulated grad.
// Frozen parameters are left untouched.
void adam_step(ParameterStore& params, OptimizerState& state, double lr);

// base_lr * (1 - step / total_steps), floored at zero.
double linear_decay_lr(std::int64_t step, std::int64_t total_steps, double base_lr);

// Global L2 norm of all trainable gradients.
double grad_norm(const ParameterStore& params);

}  // namespace pngbert::nn

#endif  // PNGBERT_NN_OPTIM_H_
