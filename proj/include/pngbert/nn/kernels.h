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

#ifndef PNGBERT_NN_KERNELS_H_
#define PNGBERT_NN_KERNELS_H_

// Raw compute kernels behind the autodiff ops. Every kernel has two
// implementations with identical signatures:
//   kernels::            OpenMP-parallel, GEMM through Eigen
//   kernels::reference:: plain serial loops, kept as the test oracle
// tests/nn/kernels_test.cc checks one against the other and
// bench/bench_kernels.cc times them.

#include <cstddef>
#include <span>
#include <vector>

namespace pngbert::nn::kernels {

// Ragged batch of sequences packed along rows. Sequence s occupies rows
// [offsets[s], offsets[s+1]). Rows with key_valid == 0 (padding) never
// receive attention.
struct AttentionLayout {
  std::vector<std::size_t> offsets;
  std::vector<unsigned char> key_valid;
  std::size_t heads = 1;

  std::size_t sequences() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t rows() const { return offsets.empty() ? 0 : offsets.back(); }
  // Size of the saved probability buffer: heads * sum(len^2).
  std::size_t prob_size() const;
  std::size_t prob_offset(std::size_t seq) const;
};

// C = alpha * op(A) * op(B) + beta * C, all row-major.
// op(A) is m x k, op(B) is k x n.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c);

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols);

// Normalizes each row over cols; saves mean and reciprocal std per row.
void layer_norm_forward(const double* x, const double* gain, const double* bias, std::size_t rows,
                        std::size_t cols, double eps, double* out, double* mean, double* rstd);
// Accumulates into dx, dgain, dbias.
void layer_norm_backward(const double* x, const double* gain, const double* mean, const double* rstd,
                         const double* dout, std::size_t rows, std::size_t cols, double* dx,
                         double* dgain, double* dbias);

// Scaled dot-product attention, all heads. q, k, v, out are rows x d.
// probs receives layout.prob_size() values.
void attention_forward(const double* q, const double* k, const double* v, std::size_t d,
                       const AttentionLayout& layout, double* out, double* probs);
// Accumulates into dq, dk, dv.
void attention_backward(const double* q, const double* k, const double* v, const double* probs,
                        const double* dout, std::size_t d, const AttentionLayout& layout, double* dq,
                        double* dk, double* dv);

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c);
void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols);
void layer_norm_forward(const double* x, const double* gain, const double* bias, std::size_t rows,
                        std::size_t cols, double eps, double* out, double* mean, double* rstd);
void layer_norm_backward(const double* x, const double* gain, const double* mean, const double* rstd,
                         const double* dout, std::size_t rows, std::size_t cols, double* dx,
                         double* dgain, double* dbias);
void attention_forward(const double* q, const double* k, const double* v, std::size_t d,
                       const AttentionLayout& layout, double* out, double* probs);
void attention_backward(const double* q, const double* k, const double* v, const double* probs,
                        const double* dout, std::size_t d, const AttentionLayout& layout, double* dq,
                        double* dk, double* dv);

}  // namespace reference

}  // namespace pngbert::nn::kernels

#endif  // PNGBERT_NN_KERNELS_H_
