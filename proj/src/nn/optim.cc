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

#include "pngbert/nn/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pngbert/common/errors.h"

namespace pngbert::nn {

void adam_step(ParameterStore& params, OptimizerState& state, double lr) {
  const AdamConfig& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    AdamMoments& m = state.moments[name];
    if (m.first.size() != p.value.size()) {
      m.first = Tensor(p.value.shape());
      m.second = Tensor(p.value.shape());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad[i];
      if (!cfg.decoupled) g += cfg.l2_coefficient * p.value[i];
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in " + name);
      m.first[i] = cfg.beta1 * m.first[i] + (1.0 - cfg.beta1) * g;
      m.second[i] = cfg.beta2 * m.second[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m.first[i] / correction1;
      const double v_hat = m.second[i] / correction2;
      double update = m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      if (cfg.decoupled) update += cfg.l2_coefficient * p.value[i];
      p.value[i] -= lr * update;
    }
  }
}

double linear_decay_lr(std::int64_t step, std::int64_t total_steps, double base_lr) {
  if (total_steps <= 0) throw std::invalid_argument("linear_decay_lr: total_steps must be positive");
  if (step < 0) throw std::invalid_argument("linear_decay_lr: negative step");
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return std::max(0.0, base_lr * (1.0 - frac));
}

double grad_norm(const ParameterStore& params) {
  double s = 0.0;
  for (const auto& [name, p] : params) {
    if (!p.trainable) continue;
    for (double g : p.grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace pngbert::nn
