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

#ifndef PNGBERT_NN_GRAD_CHECK_H_
#define PNGBERT_NN_GRAD_CHECK_H_

#include <functional>
#include <vector>

#include "pngbert/nn/graph.h"

namespace pngbert::nn {

// Builds a scalar from the given leaves on a fresh graph.
using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t input = 0;    // where the worst error occurred
  std::size_t element = 0;
  std::size_t checked = 0;  // number of coordinates compared
};

// Central differences against reverse mode over every coordinate of every
// input. Relative error is |a - n| / max(1, |a|, |n|).
GradCheckResult grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h = 1e-5);

// Same check over the trainable parameters of a store; fn reads them
// through graph.param(). max_per_tensor > 0 samples that many coordinates
// per parameter tensor (evenly strided) to bound the cost.
using ParamScalarFn = std::function<Var(Graph&)>;
GradCheckResult grad_check_params(const ParamScalarFn& fn, ParameterStore& params, double h = 1e-5,
                                  std::size_t max_per_tensor = 0);

}  // namespace pngbert::nn

#endif  // PNGBERT_NN_GRAD_CHECK_H_
