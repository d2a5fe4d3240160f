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

#ifndef PNGBERT_NN_OPS_H_
#define PNGBERT_NN_OPS_H_

#include <cstddef>
#include <utility>
#include <vector>

#include "pngbert/common/rng.h"
#include "pngbert/nn/graph.h"
#include "pngbert/nn/kernels.h"

namespace pngbert::nn {

// Linear algebra.
Var matmul(Var a, Var b);     // a: m x k, b: k x n
Var matmul_nt(Var a, Var b);  // a: m x k, b: n x k  ->  a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // Hadamard
Var scale(Var a, double s);
Var add_bias(Var x, Var bias);  // bias has x.cols() values, broadcast over rows
Var linear(Var x, Var weight, Var bias);  // x * W + b
Var sum(Var x);                           // 1 x 1

// Pointwise.
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

// Row-wise normalizers over the last axis.
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Shape plumbing.
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var reshape(Var x, std::size_t rows, std::size_t cols);
// out[i] = x[index[i]]; index -1 yields a zero row. Gradients scatter-add.
Var gather_rows(Var x, const std::vector<int>& index);
inline Var embedding_lookup(Var table, const std::vector<int>& ids) { return gather_rows(table, ids); }

// Losses; each returns a 1 x 1 mean over the rows where mask is nonzero.
// Throws std::invalid_argument when the mask selects nothing.
Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<unsigned char>& mask);
Var masked_mse(Var pred, const Tensor& target, const std::vector<unsigned char>& row_mask);
Var bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<unsigned char>& mask);

// Inverted dropout: identity when !training, else zero with prob p and scale 1/(1-p).
Var dropout(Var x, double p, Rng& rng, bool training);

// Multi-head scaled dot-product self-attention over a packed ragged batch.
Var multi_head_attention(Var q, Var k, Var v, const kernels::AttentionLayout& layout);

// Same-padded 1-D convolution over packed ragged sequences.
// Rows [offsets[s], offsets[s+1]) form sequence s; padding never crosses sequences.
// weight: (width * in_channels) x out_channels, tap-major.
Var unfold_ragged(Var x, const std::vector<std::size_t>& offsets, std::size_t width);
Var conv1d(Var x, Var weight, Var bias, const std::vector<std::size_t>& offsets, std::size_t width);

struct LstmState {
  Var h;
  Var c;
};
// Gate layout in the 4H pre-activation: input, forget, cell, output.
LstmState lstm_cell(Var x, const LstmState& prev, Var w_input, Var w_hidden, Var bias);

// x: (B*T) x a, q: B x a. Adds q's row b to rows [b*T, (b+1)*T).
Var add_group_broadcast(Var x, Var q, std::size_t group);
// alpha: B x T, memory: (B*T) x d  ->  B x d with row b = sum_t alpha(b,t) memory(b*T+t).
Var group_weighted_sum(Var alpha, Var memory);

// Forward-attention recurrence on B x T matrices:
//   alpha(n) ~ (prev(n) + prev(n-1)) * softmax(energies)(n)
// restricted to the first lengths[b] positions of row b and renormalized.
// A floor of eps is added on the reachable support so a row never collapses
// to all zeros.
Var forward_attention(Var prev_alpha, Var energies, const std::vector<std::size_t>& lengths,
                      double eps = 1e-8);

}  // namespace pngbert::nn

#endif  // PNGBERT_NN_OPS_H_
