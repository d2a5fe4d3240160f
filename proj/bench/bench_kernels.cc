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

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pngbert/app/pipeline.h"
#include "pngbert/nn/kernels.h"

namespace {

namespace k = pngbert::nn::kernels;

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void row(const std::string& name, const std::string& shape, double ref_ms, double par_ms, double diff) {
  std::printf("%-20s %-22s %10.4f %10.4f %8.2fx %10.2e\n", name.c_str(), shape.c_str(), ref_ms, par_ms,
              ref_ms / par_ms, diff);
}

k::AttentionLayout ragged_layout(std::size_t batch, std::size_t max_len, std::size_t heads, std::mt19937_64& rng) {
  k::AttentionLayout layout;
  layout.heads = heads;
  layout.offsets.push_back(0);
  std::uniform_int_distribution<std::size_t> len(max_len / 2, max_len);
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t n = len(rng);
    layout.offsets.push_back(layout.offsets.back() + n);
    for (std::size_t i = 0; i < n; ++i) layout.key_valid.push_back(i + 2 < n ? 1 : 0);
  }
  return layout;
}

}  // namespace

int main(int argc, char** argv) {
  pngbert::app::tune_allocator();
  CLI::App app{"reference versus parallel numeric kernels"};
  int repeats = 50;
  std::size_t batch = 32, max_len = 40, hidden = 64, heads = 4;
  app.add_option("--repeats", repeats, "timed repetitions per kernel");
  app.add_option("--batch", batch, "sequences per batch");
  app.add_option("--max-len", max_len, "longest sequence");
  app.add_option("--hidden", hidden, "model width");
  app.add_option("--heads", heads, "attention heads");
  CLI11_PARSE(app, argc, argv);

  std::mt19937_64 rng(7);
  const k::AttentionLayout layout = ragged_layout(batch, max_len, heads, rng);
  const std::size_t rows = layout.rows(), d = hidden, ffn = 4 * hidden;
  std::printf("threads %d  rows %zu  hidden %zu  heads %zu\n", omp_get_max_threads(), rows, d, heads);
  std::printf("%-20s %-22s %10s %10s %9s %10s\n", "kernel", "shape", "ref ms", "par ms", "speedup", "max diff");

  {
    const auto a = random_values(rows * d, rng), b = random_values(d * ffn, rng);
    std::vector<double> c_ref(rows * ffn), c_par(rows * ffn);
    const double r = time_ms([&] { k::reference::gemm(false, false, rows, ffn, d, 1.0, a.data(), b.data(), 0.0, c_ref.data()); }, repeats);
    const double p = time_ms([&] { k::gemm(false, false, rows, ffn, d, 1.0, a.data(), b.data(), 0.0, c_par.data()); }, repeats);
    row("gemm", std::to_string(rows) + "x" + std::to_string(d) + "*" + std::to_string(d) + "x" + std::to_string(ffn), r, p,
        max_abs_diff(c_ref, c_par));
  }
  {
    const auto a = random_values(rows * ffn, rng), b = random_values(rows * d, rng);
    std::vector<double> c_ref(ffn * d), c_par(ffn * d);
    const double r = time_ms([&] { k::reference::gemm(true, false, ffn, d, rows, 1.0, a.data(), b.data(), 0.0, c_ref.data()); }, repeats);
    const double p = time_ms([&] { k::gemm(true, false, ffn, d, rows, 1.0, a.data(), b.data(), 0.0, c_par.data()); }, repeats);
    row("gemm (A^T B)", std::to_string(ffn) + "x" + std::to_string(rows) + "*" + std::to_string(rows) + "x" + std::to_string(d), r, p,
        max_abs_diff(c_ref, c_par));
  }
  {
    const auto x = random_values(rows * 50, rng);
    std::vector<double> o_ref(x.size()), o_par(x.size());
    const double r = time_ms([&] { k::reference::softmax_rows(x.data(), o_ref.data(), rows, 50); }, repeats);
    const double p = time_ms([&] { k::softmax_rows(x.data(), o_par.data(), rows, 50); }, repeats);
    row("softmax_rows", std::to_string(rows) + "x50", r, p, max_abs_diff(o_ref, o_par));
  }
  {
    const auto x = random_values(rows * d, rng), gain = random_values(d, rng), bias = random_values(d, rng),
               dout = random_values(rows * d, rng);
    std::vector<double> o_ref(rows * d), o_par(rows * d), m_ref(rows), m_par(rows), s_ref(rows), s_par(rows);
    const double r = time_ms([&] { k::reference::layer_norm_forward(x.data(), gain.data(), bias.data(), rows, d, 1e-5, o_ref.data(), m_ref.data(), s_ref.data()); }, repeats);
    const double p = time_ms([&] { k::layer_norm_forward(x.data(), gain.data(), bias.data(), rows, d, 1e-5, o_par.data(), m_par.data(), s_par.data()); }, repeats);
    row("layer_norm fwd", std::to_string(rows) + "x" + std::to_string(d), r, p, max_abs_diff(o_ref, o_par));

    std::vector<double> dx_ref(rows * d), dx_par(rows * d), dg_ref(d), dg_par(d), db_ref(d), db_par(d);
    const double rb = time_ms([&] {
      std::fill(dx_ref.begin(), dx_ref.end(), 0.0);
      std::fill(dg_ref.begin(), dg_ref.end(), 0.0);
      std::fill(db_ref.begin(), db_ref.end(), 0.0);
      k::reference::layer_norm_backward(x.data(), gain.data(), m_ref.data(), s_ref.data(), dout.data(), rows, d, dx_ref.data(), dg_ref.data(), db_ref.data());
    }, repeats);
    const double pb = time_ms([&] {
      std::fill(dx_par.begin(), dx_par.end(), 0.0);
      std::fill(dg_par.begin(), dg_par.end(), 0.0);
      std::fill(db_par.begin(), db_par.end(), 0.0);
      k::layer_norm_backward(x.data(), gain.data(), m_par.data(), s_par.data(), dout.data(), rows, d, dx_par.data(), dg_par.data(), db_par.data());
    }, repeats);
    row("layer_norm bwd", std::to_string(rows) + "x" + std::to_string(d), rb, pb,
        std::max(max_abs_diff(dx_ref, dx_par), max_abs_diff(dg_ref, dg_par)));
  }
  {
    const auto q = random_values(rows * d, rng), kk = random_values(rows * d, rng), v = random_values(rows * d, rng),
               dout = random_values(rows * d, rng);
    std::vector<double> o_ref(rows * d), o_par(rows * d), p_ref(layout.prob_size()), p_par(layout.prob_size());
    const double r = time_ms([&] { k::reference::attention_forward(q.data(), kk.data(), v.data(), d, layout, o_ref.data(), p_ref.data()); }, repeats);
    const double p = time_ms([&] { k::attention_forward(q.data(), kk.data(), v.data(), d, layout, o_par.data(), p_par.data()); }, repeats);
    const std::string shape = std::to_string(batch) + " seqs, " + std::to_string(heads) + " heads";
    row("attention fwd", shape, r, p, max_abs_diff(o_ref, o_par));

    std::vector<double> dq_ref(rows * d), dk_ref(rows * d), dv_ref(rows * d), dq_par(rows * d), dk_par(rows * d), dv_par(rows * d);
    const double rb = time_ms([&] {
      std::fill(dq_ref.begin(), dq_ref.end(), 0.0);
      std::fill(dk_ref.begin(), dk_ref.end(), 0.0);
      std::fill(dv_ref.begin(), dv_ref.end(), 0.0);
      k::reference::attention_backward(q.data(), kk.data(), v.data(), p_ref.data(), dout.data(), d, layout, dq_ref.data(), dk_ref.data(), dv_ref.data());
    }, repeats);
    const double pb = time_ms([&] {
      std::fill(dq_par.begin(), dq_par.end(), 0.0);
      std::fill(dk_par.begin(), dk_par.end(), 0.0);
      std::fill(dv_par.begin(), dv_par.end(), 0.0);
      k::attention_backward(q.data(), kk.data(), v.data(), p_par.data(), dout.data(), d, layout, dq_par.data(), dk_par.data(), dv_par.data());
    }, repeats);
    row("attention bwd", shape, rb, pb,
        std::max({max_abs_diff(dq_ref, dq_par), max_abs_diff(dk_ref, dk_par), max_abs_diff(dv_ref, dv_par)}));
  }
  return 0;
}
