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

#include "pngbert/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "pngbert/common/errors.h"

namespace pngbert::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string dims(const Var& v) { return shape_string(v.value().shape()); }

void require_same(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
}

std::size_t count_mask(const std::vector<unsigned char>& mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](unsigned char m) { return m != 0; }));
}

}  // namespace

Var matmul(Var a, Var b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul: " + dims(a) + " x " + dims(b));
  Tensor out = Tensor::zeros(m, n);
  kernels::gemm(false, false, m, n, k, 1.0, a.value().data(), b.value().data(), 0.0, out.data());
  return a.graph().record(std::move(out), {a, b}, [a, b, m, n, k](const Tensor& g, const Tensor&) {
    Graph& graph = a.graph();
    if (a.requires_grad()) {
      kernels::gemm(false, true, m, k, n, 1.0, g.data(), b.value().data(), 1.0, graph.grad_buffer(a).data());
    }
    if (b.requires_grad()) {
      kernels::gemm(true, false, k, n, m, 1.0, a.value().data(), g.data(), 1.0, graph.grad_buffer(b).data());
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  require(b.cols() == k, "matmul_nt: " + dims(a) + " x " + dims(b) + "^T");
  Tensor out = Tensor::zeros(m, n);
  kernels::gemm(false, true, m, n, k, 1.0, a.value().data(), b.value().data(), 0.0, out.data());
  return a.graph().record(std::move(out), {a, b}, [a, b, m, n, k](const Tensor& g, const Tensor&) {
    Graph& graph = a.graph();
    if (a.requires_grad()) {
      kernels::gemm(false, false, m, k, n, 1.0, g.data(), b.value().data(), 1.0, graph.grad_buffer(a).data());
    }
    if (b.requires_grad()) {
      kernels::gemm(true, false, n, k, m, 1.0, g.data(), a.value().data(), 1.0, graph.grad_buffer(b).data());
    }
  });
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return a.graph().record(std::move(out), {a, b}, [a, b](const Tensor& g, const Tensor&) {
    if (a.requires_grad()) a.graph().grad_buffer(a) += g;
    if (b.requires_grad()) b.graph().grad_buffer(b) += g;
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](const Tensor& g, const Tensor&) {
    if (a.requires_grad()) a.graph().grad_buffer(a) += g;
    if (b.requires_grad()) {
      Tensor& gb = b.graph().grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](const Tensor& g, const Tensor&) {
    if (a.requires_grad()) {
      Tensor& ga = a.graph().grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = b.graph().grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return a.graph().record(std::move(out), {a}, [a, s](const Tensor& g, const Tensor&) {
    Tensor& ga = a.graph().grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_bias(Var x, Var bias) {
  const std::size_t rows = x.rows(), cols = x.cols();
  require(bias.value().size() == cols, "add_bias: " + dims(x) + " + " + dims(bias));
  Tensor out = x.value();
  const double* b = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) += b[c];
  }
  return x.graph().record(std::move(out), {x, bias}, [x, bias, rows, cols](const Tensor& g, const Tensor&) {
    if (x.requires_grad()) x.graph().grad_buffer(x) += g;
    if (bias.requires_grad()) {
      Tensor& gb = bias.graph().grad_buffer(bias);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g(r, c);
      }
    }
  });
}

Var linear(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.graph().record(Tensor::scalar(s), {x}, [x](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (double& v : gx.values()) v += g[0];
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return x.graph().record(std::move(out), {x}, [x](const Tensor& g, const Tensor& y) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] > 0.0 ? g[i] : 0.0;
  });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::tanh(v);
  return x.graph().record(std::move(out), {x}, [x](const Tensor& g, const Tensor& y) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return x.graph().record(std::move(out), {x}, [x](const Tensor& g, const Tensor& y) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(x.value().shape());
  kernels::softmax_rows(x.value().data(), out.data(), rows, cols);
  return x.graph().record(std::move(out), {x}, [x, rows, cols](const Tensor& g, const Tensor& y) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  require(gain.value().size() == cols && bias.value().size() == cols, "layer_norm: affine size mismatch");
  Tensor out(x.value().shape());
  auto stats = std::make_shared<std::vector<double>>(2 * rows);
  kernels::layer_norm_forward(x.value().data(), gain.value().data(), bias.value().data(), rows, cols, eps,
                              out.data(), stats->data(), stats->data() + rows);
  return x.graph().record(std::move(out), {x, gain, bias},
                          [x, gain, bias, rows, cols, stats](const Tensor& g, const Tensor&) {
    Graph& graph = x.graph();
    Tensor scratch_x, scratch_g, scratch_b;
    double* dx = nullptr;
    if (x.requires_grad()) {
      dx = graph.grad_buffer(x).data();
    } else {
      scratch_x = Tensor(x.value().shape());
      dx = scratch_x.data();
    }
    double* dg = nullptr;
    double* db = nullptr;
    if (gain.requires_grad()) {
      dg = graph.grad_buffer(gain).data();
    } else {
      scratch_g = Tensor({cols});
      dg = scratch_g.data();
    }
    if (bias.requires_grad()) {
      db = graph.grad_buffer(bias).data();
    } else {
      scratch_b = Tensor({cols});
      db = scratch_b.data();
    }
    kernels::layer_norm_backward(x.value().data(), gain.value().data(), stats->data(), stats->data() + rows,
                                 g.data(), rows, cols, dx, dg, db);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.row(r).data(), v.cols(), out.row(r).data() + off);
    off += v.cols();
  }
  return parts[0].graph().record(std::move(out), parts, [parts, rows](const Tensor& g, const Tensor&) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t pc = p.cols();
      if (p.requires_grad()) {
        Tensor& gp = p.graph().grad_buffer(p);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < pc; ++c) gp(r, c) += g(r, off + c);
        }
      }
      off += pc;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + off * cols);
    off += p.rows();
  }
  return parts[0].graph().record(std::move(out), parts, [parts, cols](const Tensor& g, const Tensor&) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) {
        Tensor& gp = p.graph().grad_buffer(p);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off * cols + i];
      }
      off += p.rows();
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const std::size_t rows = x.rows();
  require(begin <= end && end <= x.cols(), "slice_cols: range out of bounds");
  const std::size_t width = end - begin;
  Tensor out = Tensor::zeros(rows, width);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().row(r).data() + begin, width, out.row(r).data());
  return x.graph().record(std::move(out), {x}, [x, begin, width, rows](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < width; ++c) gx(r, begin + c) += g(r, c);
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const std::size_t cols = x.cols();
  require(begin <= end && end <= x.rows(), "slice_rows: range out of bounds");
  Tensor out = Tensor::zeros(end - begin, cols);
  std::copy_n(x.value().data() + begin * cols, (end - begin) * cols, out.data());
  return x.graph().record(std::move(out), {x}, [x, begin, cols](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  Tensor out = x.value().reshaped({rows, cols});
  return x.graph().record(std::move(out), {x}, [x](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var gather_rows(Var x, const std::vector<int>& index) {
  const std::size_t cols = x.cols();
  const std::size_t n = x.rows();
  Tensor out = Tensor::zeros(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    require(static_cast<std::size_t>(index[i]) < n, "gather_rows: index " + std::to_string(index[i]) +
                                                        " out of range for " + std::to_string(n) + " rows");
    std::copy_n(x.value().row(static_cast<std::size_t>(index[i])).data(), cols, out.row(i).data());
  }
  return x.graph().record(std::move(out), {x}, [x, index, cols](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] < 0) continue;
      double* dst = gx.row(static_cast<std::size_t>(index[i])).data();
      const double* src = g.row(i).data();
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<unsigned char>& mask) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  require(targets.size() == rows && mask.size() == rows, "cross_entropy: targets/mask length mismatch");
  const std::size_t count = count_mask(mask);
  if (count == 0) throw std::invalid_argument("cross_entropy: empty mask (no targets)");
  auto probs = std::make_shared<Tensor>(logits.value().shape());
  kernels::softmax_rows(logits.value().data(), probs->data(), rows, cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < cols, "cross_entropy: target out of range");
    const auto row = logits.value().row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    loss += mx + std::log(z) - row[static_cast<std::size_t>(targets[r])];
  }
  const double inv = 1.0 / static_cast<double>(count);
  return logits.graph().record(Tensor::scalar(loss * inv), {logits},
                               [logits, targets, mask, probs, rows, cols, inv](const Tensor& g, const Tensor&) {
    Tensor& gl = logits.graph().grad_buffer(logits);
    const double s = g[0] * inv;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!mask[r]) continue;
      for (std::size_t c = 0; c < cols; ++c) gl(r, c) += s * (*probs)(r, c);
      gl(r, static_cast<std::size_t>(targets[r])) -= s;
    }
  });
}

Var masked_mse(Var pred, const Tensor& target, const std::vector<unsigned char>& row_mask) {
  const std::size_t rows = pred.rows(), cols = pred.cols();
  require(target.size() == pred.value().size() && row_mask.size() == rows, "masked_mse: shape mismatch");
  const std::size_t count = count_mask(row_mask);
  if (count == 0) throw std::invalid_argument("masked_mse: empty mask");
  const double inv = 1.0 / static_cast<double>(count * cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!row_mask[r]) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = pred.value()(r, c) - target[r * cols + c];
      loss += d * d;
    }
  }
  return pred.graph().record(Tensor::scalar(loss * inv), {pred},
                             [pred, target, row_mask, rows, cols, inv](const Tensor& g, const Tensor&) {
    Tensor& gp = pred.graph().grad_buffer(pred);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!row_mask[r]) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        gp(r, c) += g[0] * 2.0 * inv * (pred.value()(r, c) - target[r * cols + c]);
      }
    }
  });
}

Var bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<unsigned char>& mask) {
  const std::size_t n = logits.value().size();
  require(targets.size() == n && mask.size() == n, "bce_with_logits: shape mismatch");
  const std::size_t count = count_mask(mask);
  if (count == 0) throw std::invalid_argument("bce_with_logits: empty mask");
  const double inv = 1.0 / static_cast<double>(count);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double x = logits.value()[i];
    loss += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return logits.graph().record(Tensor::scalar(loss * inv), {logits},
                               [logits, targets, mask, n, inv](const Tensor& g, const Tensor&) {
    Tensor& gl = logits.graph().grad_buffer(logits);
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      const double x = logits.value()[i];
      const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      gl[i] += g[0] * inv * (s - targets[i]);
    }
  });
}

Var dropout(Var x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0,1)");
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  auto keep = std::make_shared<std::vector<double>>(x.value().size());
  std::bernoulli_distribution drop(p);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*keep)[i] = drop(rng) ? 0.0 : keep_scale;
    out[i] *= (*keep)[i];
  }
  return x.graph().record(std::move(out), {x}, [x, keep](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*keep)[i];
  });
}

Var multi_head_attention(Var q, Var k, Var v, const kernels::AttentionLayout& layout) {
  const std::size_t rows = q.rows(), d = q.cols();
  require(k.rows() == rows && v.rows() == rows && k.cols() == d && v.cols() == d,
          "multi_head_attention: q/k/v shape mismatch");
  require(layout.rows() == rows && layout.key_valid.size() == rows, "multi_head_attention: layout mismatch");
  require(layout.heads > 0 && d % layout.heads == 0, "multi_head_attention: width not divisible by heads");
  Tensor out(q.value().shape());
  auto probs = std::make_shared<std::vector<double>>(layout.prob_size());
  kernels::attention_forward(q.value().data(), k.value().data(), v.value().data(), d, layout, out.data(),
                             probs->data());
  auto shared_layout = std::make_shared<kernels::AttentionLayout>(layout);
  return q.graph().record(std::move(out), {q, k, v}, [q, k, v, d, probs, shared_layout](const Tensor& g, const Tensor&) {
    Graph& graph = q.graph();
    Tensor scratch;
    auto target = [&](const Var& x) -> double* {
      if (x.requires_grad()) return graph.grad_buffer(x).data();
      if (scratch.size() == 0) scratch = Tensor(x.value().shape());
      return scratch.data();
    };
    double* dq = target(q);
    double* dk = target(k);
    double* dv = target(v);
    kernels::attention_backward(q.value().data(), k.value().data(), v.value().data(), probs->data(), g.data(), d,
                                *shared_layout, dq, dk, dv);
  });
}

Var unfold_ragged(Var x, const std::vector<std::size_t>& offsets, std::size_t width) {
  require(width % 2 == 1, "unfold_ragged: width must be odd");
  require(!offsets.empty() && offsets.back() == x.rows(), "unfold_ragged: offsets do not cover input");
  const std::size_t rows = x.rows(), ch = x.cols();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width / 2);
  // src[r * width + tap] = source row or -1 for zero padding.
  auto src = std::make_shared<std::vector<std::ptrdiff_t>>(rows * width, -1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto lo = static_cast<std::ptrdiff_t>(offsets[s]);
    const auto hi = static_cast<std::ptrdiff_t>(offsets[s + 1]);
    for (std::ptrdiff_t r = lo; r < hi; ++r) {
      for (std::size_t tap = 0; tap < width; ++tap) {
        const std::ptrdiff_t from = r + static_cast<std::ptrdiff_t>(tap) - pad;
        if (from >= lo && from < hi) (*src)[static_cast<std::size_t>(r) * width + tap] = from;
      }
    }
  }
  Tensor out = Tensor::zeros(rows, width * ch);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t tap = 0; tap < width; ++tap) {
      const std::ptrdiff_t from = (*src)[r * width + tap];
      if (from < 0) continue;
      std::copy_n(x.value().row(static_cast<std::size_t>(from)).data(), ch, out.row(r).data() + tap * ch);
    }
  }
  return x.graph().record(std::move(out), {x}, [x, src, rows, ch, width](const Tensor& g, const Tensor&) {
    Tensor& gx = x.graph().grad_buffer(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t tap = 0; tap < width; ++tap) {
        const std::ptrdiff_t from = (*src)[r * width + tap];
        if (from < 0) continue;
        double* dst = gx.row(static_cast<std::size_t>(from)).data();
        const double* gs = g.row(r).data() + tap * ch;
        for (std::size_t c = 0; c < ch; ++c) dst[c] += gs[c];
      }
    }
  });
}

Var conv1d(Var x, Var weight, Var bias, const std::vector<std::size_t>& offsets, std::size_t width) {
  require(weight.rows() == width * x.cols(), "conv1d: weight rows must equal width * in_channels");
  return add_bias(matmul(unfold_ragged(x, offsets, width), weight), bias);
}

LstmState lstm_cell(Var x, const LstmState& prev, Var w_input, Var w_hidden, Var bias) {
  const std::size_t hidden = prev.h.cols();
  require(w_hidden.cols() == 4 * hidden && w_input.cols() == 4 * hidden, "lstm_cell: gate width must be 4H");
  Var gates = add_bias(add(matmul(x, w_input), matmul(prev.h, w_hidden)), bias);
  Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
  Var forget_gate = sigmoid(slice_cols(gates, hidden, 2 * hidden));
  Var candidate = tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
  Var out_gate = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

Var add_group_broadcast(Var x, Var q, std::size_t group) {
  const std::size_t batch = q.rows(), cols = q.cols();
  require(x.rows() == batch * group && x.cols() == cols, "add_group_broadcast: shape mismatch");
  Tensor out = x.value();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < group; ++t) {
      for (std::size_t c = 0; c < cols; ++c) out(b * group + t, c) += q.value()(b, c);
    }
  }
  return x.graph().record(std::move(out), {x, q}, [x, q, batch, group, cols](const Tensor& g, const Tensor&) {
    if (x.requires_grad()) x.graph().grad_buffer(x) += g;
    if (q.requires_grad()) {
      Tensor& gq = q.graph().grad_buffer(q);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < group; ++t) {
          for (std::size_t c = 0; c < cols; ++c) gq(b, c) += g(b * group + t, c);
        }
      }
    }
  });
}

Var group_weighted_sum(Var alpha, Var memory) {
  const std::size_t batch = alpha.rows(), group = alpha.cols(), d = memory.cols();
  require(memory.rows() == batch * group, "group_weighted_sum: memory rows must be B*T");
  Tensor out = Tensor::zeros(batch, d);
  for (std::size_t b = 0; b < batch; ++b) {
    kernels::gemm(false, false, 1, d, group, 1.0, alpha.value().row(b).data(),
                  memory.value().data() + b * group * d, 0.0, out.row(b).data());
  }
  return alpha.graph().record(std::move(out), {alpha, memory},
                              [alpha, memory, batch, group, d](const Tensor& g, const Tensor&) {
    Graph& graph = alpha.graph();
    for (std::size_t b = 0; b < batch; ++b) {
      if (alpha.requires_grad()) {
        kernels::gemm(false, true, 1, group, d, 1.0, g.row(b).data(), memory.value().data() + b * group * d, 1.0,
                      graph.grad_buffer(alpha).row(b).data());
      }
      if (memory.requires_grad()) {
        kernels::gemm(true, false, group, d, 1, 1.0, alpha.value().row(b).data(), g.row(b).data(), 1.0,
                      graph.grad_buffer(memory).data() + b * group * d);
      }
    }
  });
}

Var forward_attention(Var prev_alpha, Var energies, const std::vector<std::size_t>& lengths, double eps) {
  const std::size_t batch = prev_alpha.rows(), width = prev_alpha.cols();
  require(energies.rows() == batch && energies.cols() == width, "forward_attention: shape mismatch");
  require(lengths.size() == batch, "forward_attention: lengths size mismatch");
  auto y = std::make_shared<Tensor>(Tensor::zeros(batch, width));       // masked softmax
  auto shifted = std::make_shared<Tensor>(Tensor::zeros(batch, width)); // prev(n) + prev(n-1)
  auto norm = std::make_shared<std::vector<double>>(batch, 0.0);
  Tensor out = Tensor::zeros(batch, width);
  const Tensor& prev = prev_alpha.value();
  const Tensor& e = energies.value();
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t len = lengths[b];
    require(len >= 1 && len <= width, "forward_attention: invalid length");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < len; ++n) mx = std::max(mx, e(b, n));
    double z = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      (*y)(b, n) = std::exp(e(b, n) - mx);
      z += (*y)(b, n);
    }
    for (std::size_t n = 0; n < len; ++n) (*y)(b, n) /= z;
    double total = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double s = prev(b, n) + (n > 0 ? prev(b, n - 1) : 0.0);
      (*shifted)(b, n) = s;
      out(b, n) = s * (*y)(b, n) + (s > 0.0 ? eps : 0.0);
      total += out(b, n);
    }
    if (total <= 0.0) {
      // prev carried no mass inside the valid range; restart at position 0.
      out(b, 0) = 1.0;
      total = 1.0;
    }
    (*norm)[b] = total;
    for (std::size_t n = 0; n < len; ++n) out(b, n) /= total;
  }
  return prev_alpha.graph().record(
      std::move(out), {prev_alpha, energies},
      [prev_alpha, energies, lengths, y, shifted, norm, batch](const Tensor& g, const Tensor& alpha) {
        Graph& graph = prev_alpha.graph();
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t len = lengths[b];
          double dot = 0.0;
          for (std::size_t n = 0; n < len; ++n) dot += g(b, n) * alpha(b, n);
          std::vector<double> g_hat(len);
          for (std::size_t n = 0; n < len; ++n) g_hat[n] = (g(b, n) - dot) / (*norm)[b];
          if (prev_alpha.requires_grad()) {
            Tensor& gp = graph.grad_buffer(prev_alpha);
            for (std::size_t n = 0; n < len; ++n) {
              const double gs = g_hat[n] * (*y)(b, n);
              gp(b, n) += gs;
              if (n > 0) gp(b, n - 1) += gs;
            }
          }
          if (energies.requires_grad()) {
            Tensor& ge = graph.grad_buffer(energies);
            double ydot = 0.0;
            for (std::size_t n = 0; n < len; ++n) ydot += (*y)(b, n) * g_hat[n] * (*shifted)(b, n);
            for (std::size_t n = 0; n < len; ++n) {
              ge(b, n) += (*y)(b, n) * (g_hat[n] * (*shifted)(b, n) - ydot);
            }
          }
        }
      });
}

}  // namespace pngbert::nn
