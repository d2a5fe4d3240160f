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

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "pngbert/nn/kernels.h"

namespace pngbert::nn::kernels {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
using ConstStrided = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using MutStrided = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

std::ptrdiff_t idx(std::size_t v) { return static_cast<std::ptrdiff_t>(v); }

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  if (m == 0 || n == 0) return;
  MutMap cm(c, idx(m), idx(n));
  if (k == 0) {
    if (beta == 0.0) cm.setZero(); else cm *= beta;
    return;
  }
  ConstMap am(a, trans_a ? idx(k) : idx(m), trans_a ? idx(m) : idx(k));
  ConstMap bm(b, trans_b ? idx(n) : idx(k), trans_b ? idx(k) : idx(n));
  if (beta == 0.0) {
    cm.setZero();
  } else if (beta != 1.0) {
    cm *= beta;
  }
  if (!trans_a && !trans_b) cm.noalias() += alpha * am * bm;
  else if (!trans_a && trans_b) cm.noalias() += alpha * am * bm.transpose();
  else if (trans_a && !trans_b) cm.noalias() += alpha * am.transpose() * bm;
  else cm.noalias() += alpha * am.transpose() * bm.transpose();
}

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < idx(rows); ++r) {
    const double* x = in + r * idx(cols);
    double* y = out + r * idx(cols);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    const double inv = 1.0 / sum;
    for (std::size_t c = 0; c < cols; ++c) y[c] *= inv;
  }
}

void layer_norm_forward(const double* x, const double* gain, const double* bias, std::size_t rows,
                        std::size_t cols, double eps, double* out, double* mean, double* rstd) {
  const double n = static_cast<double>(cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < idx(rows); ++r) {
    const double* xr = x + r * idx(cols);
    double* yr = out + r * idx(cols);
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= n;
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (std::size_t c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gain[c] + bias[c];
  }
}

void layer_norm_backward(const double* x, const double* gain, const double* mean, const double* rstd,
                         const double* dout, std::size_t rows, std::size_t cols, double* dx,
                         double* dgain, double* dbias) {
  const double n = static_cast<double>(cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < idx(rows); ++r) {
    const double* xr = x + r * idx(cols);
    const double* dr = dout + r * idx(cols);
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean[r]) * rstd[r];
      const double dxhat = dr[c] * gain[c];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean[r]) * rstd[r];
      dx[r * idx(cols) + idx(c)] += rstd[r] * (dr[c] * gain[c] - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
    }
  }
  // Column reductions stay serial so the summation order is fixed.
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    const double* dr = dout + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      dgain[c] += dr[c] * (xr[c] - mean[r]) * rstd[r];
      dbias[c] += dr[c];
    }
  }
}

void attention_forward(const double* q, const double* k, const double* v, std::size_t d,
                       const AttentionLayout& layout, double* out, double* probs) {
  const std::size_t heads = layout.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::ptrdiff_t jobs = idx(layout.sequences() * heads);
  std::vector<std::size_t> prob_base(layout.sequences() + 1, 0);
  for (std::size_t s = 0; s < layout.sequences(); ++s) {
    const std::size_t len = layout.offsets[s + 1] - layout.offsets[s];
    prob_base[s + 1] = prob_base[s] + heads * len * len;
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t s = static_cast<std::size_t>(job) / heads;
    const std::size_t h = static_cast<std::size_t>(job) % heads;
    const std::size_t base = layout.offsets[s];
    const std::size_t len = layout.offsets[s + 1] - base;
    if (len == 0) continue;
    const std::size_t col = h * dh;
    ConstStrided qh(q + base * d + col, idx(len), idx(dh), Eigen::OuterStride<>(idx(d)));
    ConstStrided kh(k + base * d + col, idx(len), idx(dh), Eigen::OuterStride<>(idx(d)));
    ConstStrided vh(v + base * d + col, idx(len), idx(dh), Eigen::OuterStride<>(idx(d)));
    MutStrided oh(out + base * d + col, idx(len), idx(dh), Eigen::OuterStride<>(idx(d)));
    MutMap p(probs + prob_base[s] + h * len * len, idx(len), idx(len));
    p.noalias() = scale * qh * kh.transpose();
    for (std::size_t i = 0; i < len; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) {
        if (layout.key_valid[base + j]) mx = std::max(mx, p(idx(i), idx(j)));
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        double& pij = p(idx(i), idx(j));
        pij = layout.key_valid[base + j] ? std::exp(pij - mx) : 0.0;
        sum += pij;
      }
      const double inv = sum > 0.0 ? 1.0 / sum : 0.0;
      p.row(idx(i)) *= inv;
    }
    oh.noalias() = p * vh;
  }
}

void attention_backward(const double* q, const double* k, const double* v, const double* probs,
                        const double* dout, std::size_t d, const AttentionLayout& layout, double* dq,
                        double* dk, double* dv) {
  const std::size_t heads = layout.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::ptrdiff_t jobs = idx(layout.sequences() * heads);
  std::vector<std::size_t> prob_base(layout.sequences() + 1, 0);
  for (std::size_t s = 0; s < layout.sequences(); ++s) {
    const std::size_t len = layout.offsets[s + 1] - layout.offsets[s];
    prob_base[s + 1] = prob_base[s] + heads * len * len;
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t s = static_cast<std::size_t>(job) / heads;
    const std::size_t h = static_cast<std::size_t>(job) % heads;
    const std::size_t base = layout.offsets[s];
    const std::size_t len = layout.offsets[s + 1] - base;
    if (len == 0) continue;
    const std::size_t col = h * dh;
    const Eigen::OuterStride<> stride(idx(d));
    ConstStrided qh(q + base * d + col, idx(len), idx(dh), stride);
    ConstStrided kh(k + base * d + col, idx(len), idx(dh), stride);
    ConstStrided vh(v + base * d + col, idx(len), idx(dh), stride);
    ConstStrided doh(dout + base * d + col, idx(len), idx(dh), stride);
    MutStrided dqh(dq + base * d + col, idx(len), idx(dh), stride);
    MutStrided dkh(dk + base * d + col, idx(len), idx(dh), stride);
    MutStrided dvh(dv + base * d + col, idx(len), idx(dh), stride);
    ConstMap p(probs + prob_base[s] + h * len * len, idx(len), idx(len));
    RowMatrix dp = doh * vh.transpose();
    dvh.noalias() += p.transpose() * doh;
    Eigen::VectorXd row_dot = (p.array() * dp.array()).rowwise().sum();
    RowMatrix ds = (p.array() * (dp.colwise() - row_dot).array()) * scale;
    dqh.noalias() += ds * kh;
    dkh.noalias() += ds.transpose() * qh;
  }
}

}  // namespace pngbert::nn::kernels
