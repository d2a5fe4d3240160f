// Optimized kernels against the serial reference implementations.

#include <random>

#include "doctest.h"
#include "pngbert/nn/kernels.h"
#include "test_util.h"

namespace k = pngbert::nn::kernels;
using pngbert::Rng;
using pngbert::nn::max_abs_diff;
using pngbert::nn::Tensor;
using pngbert::testing::random_tensor;

TEST_CASE("gemm matches reference for every transpose combination") {
  Rng rng(3);
  for (int combo = 0; combo < 4; ++combo) {
    const bool ta = combo & 1, tb = combo & 2;
    const std::size_t m = 7, n = 5, kk = 9;
    Tensor a = ta ? random_tensor(kk, m, rng) : random_tensor(m, kk, rng);
    Tensor b = tb ? random_tensor(n, kk, rng) : random_tensor(kk, n, rng);
    Tensor c1 = random_tensor(m, n, rng);
    Tensor c2 = c1;
    k::gemm(ta, tb, m, n, kk, 0.7, a.data(), b.data(), 0.3, c1.data());
    k::reference::gemm(ta, tb, m, n, kk, 0.7, a.data(), b.data(), 0.3, c2.data());
    CHECK(max_abs_diff(c1, c2) < 1e-12);
  }
}

TEST_CASE("softmax and layer norm kernels match reference") {
  Rng rng(4);
  Tensor x = random_tensor(6, 11, rng, 3.0);
  Tensor y1(x.shape()), y2(x.shape());
  k::softmax_rows(x.data(), y1.data(), 6, 11);
  k::reference::softmax_rows(x.data(), y2.data(), 6, 11);
  CHECK(max_abs_diff(y1, y2) < 1e-14);

  Tensor gain = random_tensor(1, 11, rng), bias = random_tensor(1, 11, rng);
  std::vector<double> m1(6), r1(6), m2(6), r2(6);
  k::layer_norm_forward(x.data(), gain.data(), bias.data(), 6, 11, 1e-5, y1.data(), m1.data(), r1.data());
  k::reference::layer_norm_forward(x.data(), gain.data(), bias.data(), 6, 11, 1e-5, y2.data(), m2.data(), r2.data());
  CHECK(max_abs_diff(y1, y2) < 1e-12);

  Tensor dout = random_tensor(6, 11, rng);
  Tensor dx1(x.shape()), dx2(x.shape()), dg1({11}), dg2({11}), db1({11}), db2({11});
  k::layer_norm_backward(x.data(), gain.data(), m1.data(), r1.data(), dout.data(), 6, 11, dx1.data(), dg1.data(),
                         db1.data());
  k::reference::layer_norm_backward(x.data(), gain.data(), m2.data(), r2.data(), dout.data(), 6, 11, dx2.data(),
                                    dg2.data(), db2.data());
  CHECK(max_abs_diff(dx1, dx2) < 1e-12);
  CHECK(max_abs_diff(dg1, dg2) < 1e-12);
  CHECK(max_abs_diff(db1, db2) < 1e-12);
}

TEST_CASE("attention kernels match reference on a ragged padded batch") {
  Rng rng(5);
  k::AttentionLayout layout;
  layout.offsets = {0, 4, 11, 12};
  layout.key_valid = {1, 1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1};
  layout.heads = 2;
  const std::size_t d = 6, rows = 12;
  Tensor q = random_tensor(rows, d, rng), kk = random_tensor(rows, d, rng), v = random_tensor(rows, d, rng);
  Tensor o1(q.shape()), o2(q.shape());
  std::vector<double> p1(layout.prob_size()), p2(layout.prob_size());
  k::attention_forward(q.data(), kk.data(), v.data(), d, layout, o1.data(), p1.data());
  k::reference::attention_forward(q.data(), kk.data(), v.data(), d, layout, o2.data(), p2.data());
  CHECK(max_abs_diff(o1, o2) < 1e-12);
  for (std::size_t i = 0; i < p1.size(); ++i) REQUIRE(std::abs(p1[i] - p2[i]) < 1e-12);

  Tensor dout = random_tensor(rows, d, rng);
  Tensor dq1(q.shape()), dk1(q.shape()), dv1(q.shape()), dq2(q.shape()), dk2(q.shape()), dv2(q.shape());
  k::attention_backward(q.data(), kk.data(), v.data(), p1.data(), dout.data(), d, layout, dq1.data(), dk1.data(),
                        dv1.data());
  k::reference::attention_backward(q.data(), kk.data(), v.data(), p2.data(), dout.data(), d, layout, dq2.data(),
                                   dk2.data(), dv2.data());
  CHECK(max_abs_diff(dq1, dq2) < 1e-12);
  CHECK(max_abs_diff(dk1, dk2) < 1e-12);
  CHECK(max_abs_diff(dv1, dv2) < 1e-12);
}

TEST_CASE("padded keys receive zero attention probability") {
  k::AttentionLayout layout;
  layout.offsets = {0, 3};
  layout.key_valid = {1, 0, 1};
  layout.heads = 1;
  Rng rng(6);
  Tensor q = random_tensor(3, 4, rng), kk = random_tensor(3, 4, rng), v = random_tensor(3, 4, rng);
  Tensor o(q.shape());
  std::vector<double> p(layout.prob_size());
  k::attention_forward(q.data(), kk.data(), v.data(), 4, layout, o.data(), p.data());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p[i * 3 + 1] == 0.0);
    CHECK(p[i * 3] + p[i * 3 + 2] == doctest::Approx(1.0).epsilon(1e-12));
  }
}
