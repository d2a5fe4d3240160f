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

#include "pngbert/nn/grad_check.h"

#include <algorithm>
#include <cmath>

namespace pngbert::nn {

namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h) {
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(g.input(t));
    Var out = fn(g, leaves);
    g.backward(out);
    for (const Var& v : leaves) {
      analytic.push_back(v.grad().size() == v.value().size() ? v.grad() : Tensor(v.value().shape()));
    }
  }
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Graph g(false);
    std::vector<Var> leaves;
    for (const Tensor& t : xs) leaves.push_back(g.constant(t));
    return fn(g, leaves).value()[0];
  };
  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (std::size_t j = 0; j < probe[i].size(); ++j) {
      const double saved = probe[i][j];
      probe[i][j] = saved + h;
      const double up = evaluate(probe);
      probe[i][j] = saved - h;
      const double down = evaluate(probe);
      probe[i][j] = saved;
      const double err = rel_error(analytic[i][j], (up - down) / (2.0 * h));
      ++result.checked;
      if (err > result.max_rel_error) result = {err, i, j, result.checked};
    }
  }
  return result;
}

GradCheckResult grad_check_params(const ParamScalarFn& fn, ParameterStore& params, double h,
                                  std::size_t max_per_tensor) {
  params.zero_grad();
  {
    Graph g;
    Var out = fn(g);
    g.backward(out);
  }
  auto evaluate = [&] {
    Graph g(false);
    return fn(g).value()[0];
  };
  GradCheckResult result;
  std::size_t index = 0;
  for (auto& [name, p] : params) {
    if (!p.trainable) {
      ++index;
      continue;
    }
    const std::size_t n = p.value.size();
    const std::size_t stride = (max_per_tensor == 0 || n <= max_per_tensor) ? 1 : n / max_per_tensor;
    for (std::size_t j = 0; j < n; j += stride) {
      const double saved = p.value[j];
      p.value[j] = saved + h;
      const double up = evaluate();
      p.value[j] = saved - h;
      const double down = evaluate();
      p.value[j] = saved;
      const double err = rel_error(p.grad[j], (up - down) / (2.0 * h));
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.input = index;
        result.element = j;
      }
    }
    ++index;
  }
  return result;
}

}  // namespace pngbert::nn
