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

#include <cmath>
#include <limits>

#include "pngbert/nn/kernels.h"

namespace pngbert::nn::kernels {

std::size_t AttentionLayout::prob_size() const { return prob_offset(sequences()); }

std::size_t AttentionLayout::prob_offset(std::size_t seq) const {
  std::size_t total = 0;
  for (std::size_t s = 0; s < seq; ++s) {
    const std::size_t len = offsets[s + 1] - offsets[s];
    total += heads * len * len;
  }
  return total;
}

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        sum += av * bv;
      }
      c[i * n + j] = alpha * sum + (beta == 0.0 ? 0.0 : beta * c[i * n + j]);
    }
  }
}

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= sum;
  }
}

void layer_norm_forward(const double* x, const double* gain, const double* bias, std::size_t rows,
                        std::size_t cols, double eps, double* out, double* mean, double* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = (xr[c] - mu) * rs * gain[c] + bias[c];
  }
}

void layer_norm_backward(const double* x, const double* gain, const double* mean, const double* rstd,
                         const double* dout, std::size_t rows, std::size_t cols, double* dx,
                         double* dgain, double* dbias) {
  const double n = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    const double* dr = dout + r * cols;
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean[r]) * rstd[r];
      const double dxhat = dr[c] * gain[c];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
      dgain[c] += dr[c] * xhat;
      dbias[c] += dr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean[r]) * rstd[r];
      const double dxhat = dr[c] * gain[c];
      dx[r * cols + c] += rstd[r] * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
    }
  }
}

void attention_forward(const double* q, const double* k, const double* v, std::size_t d,
                       const AttentionLayout& layout, double* out, double* probs) {
  const std::size_t heads = layout.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t s = 0; s < layout.sequences(); ++s) {
    const std::size_t base = layout.offsets[s];
    const std::size_t len = layout.offsets[s + 1] - base;
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs + layout.prob_offset(s) + h * len * len;
      const std::size_t col = h * dh;
      for (std::size_t i = 0; i < len; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          if (!layout.key_valid[base + j]) continue;
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += q[(base + i) * d + col + c] * k[(base + j) * d + col + c];
          p[i * len + j] = dot * scale;
          mx = std::max(mx, p[i * len + j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          if (!layout.key_valid[base + j]) {
            p[i * len + j] = 0.0;
            continue;
          }
          p[i * len + j] = std::exp(p[i * len + j] - mx);
          sum += p[i * len + j];
        }
        for (std::size_t j = 0; j < len; ++j) p[i * len + j] = sum > 0.0 ? p[i * len + j] / sum : 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < len; ++j) acc += p[i * len + j] * v[(base + j) * d + col + c];
          out[(base + i) * d + col + c] = acc;
        }
      }
    }
  }
}

void attention_backward(const double* q, const double* k, const double* v, const double* probs,
                        const double* dout, std::size_t d, const AttentionLayout& layout, double* dq,
                        double* dk, double* dv) {
  const std::size_t heads = layout.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> dp;
  for (std::size_t s = 0; s < layout.sequences(); ++s) {
    const std::size_t base = layout.offsets[s];
    const std::size_t len = layout.offsets[s + 1] - base;
    dp.assign(len, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      const double* p = probs + layout.prob_offset(s) + h * len * len;
      const std::size_t col = h * dh;
      for (std::size_t i = 0; i < len; ++i) {
        double row_dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) acc += dout[(base + i) * d + col + c] * v[(base + j) * d + col + c];
          dp[j] = acc;
          row_dot += p[i * len + j] * acc;
          for (std::size_t c = 0; c < dh; ++c) {
            dv[(base + j) * d + col + c] += p[i * len + j] * dout[(base + i) * d + col + c];
          }
        }
        for (std::size_t j = 0; j < len; ++j) {
          const double ds = p[i * len + j] * (dp[j] - row_dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) {
            dq[(base + i) * d + col + c] += ds * k[(base + j) * d + col + c];
            dk[(base + j) * d + col + c] += ds * q[(base + i) * d + col + c];
          }
        }
      }
    }
  }
}

}  // namespace reference
}  // namespace pngbert::nn::kernels
