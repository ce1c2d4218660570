/* Copyright 2026 The ENOS Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <catch2/catch_amalgamated.hpp>

#include "enos/operators.hpp"
#include "helpers.hpp"

using namespace enos;
using testutil::gradcheck;
using testutil::random_vec;

namespace {

// Scalar reference implementations on plain doubles, sign(0) = +1.
double ref_typical(const std::vector<double>& x, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w[i];
  return s;
}
double ref_mulfree(const std::vector<double>& x, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += hard_sign(x[i]) * std::fabs(w[i]) + hard_sign(w[i]) * std::fabs(x[i]);
  return s;
}
double ref_binary(const std::vector<double>& x, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * hard_sign(w[i]);
  return s;
}

double ref_op(OperatorKind k, const std::vector<double>& x, const std::vector<double>& w) {
  switch (k) {
    case OperatorKind::Typical: return ref_typical(x, w);
    case OperatorKind::MultiplicationFree: return ref_mulfree(x, w);
    case OperatorKind::Binary: return ref_binary(x, w);
  }
  return 0.0;
}

// Brute-force sliding-window convolution oracle over [B, C, H, W].
std::vector<double> ref_conv(OperatorKind kind, const std::vector<double>& input, int b,
                             const ConvGeom& g, const std::vector<double>& weights,
                             const std::vector<double>& bias, int oc) {
  const int oh = g.out_h(), ow = g.out_w();
  std::vector<double> out(static_cast<std::size_t>(b) * oc * oh * ow);
  std::size_t o = 0;
  for (int n = 0; n < b; ++n)
    for (int f = 0; f < oc; ++f)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          std::vector<double> window, filt;
          for (int c = 0; c < g.in_ch; ++c)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                int iy = oy * g.stride + ky - g.pad;
                int ix = ox * g.stride + kx - g.pad;
                double v = 0.0;
                if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w)
                  v = input[((static_cast<std::size_t>(n) * g.in_ch + c) * g.in_h + iy) * g.in_w +
                            ix];
                window.push_back(v);
                filt.push_back(
                    weights[static_cast<std::size_t>(f) * g.patch_len() + window.size() - 1]);
              }
          out[o] = ref_op(kind, window, filt) + bias[f];
        }
  return out;
}

}  // namespace

TEST_CASE("operator worked examples") {
  Tensor x = make_tensor({3}, {1, 2, 3});
  Tensor w = make_tensor({3}, {4, 5, 6});
  REQUIRE(op_typical(x, w)->item() == 32.0);

  Tensor xm = make_tensor({2}, {1, -2});
  Tensor wm = make_tensor({2}, {3, 4});
  REQUIRE(op_mulfree(xm, wm)->item() == 2.0);  // (1*3+1*1) + (-1*4+1*2)

  Tensor xs = make_tensor({2}, {2, -3});
  REQUIRE(op_mulfree(xs, xs)->item() == -2.0);  // f_M(x,x) = 2*sum(x)

  Tensor xb = make_tensor({3}, {1, 2, 3});
  Tensor wb = make_tensor({3}, {0.5, -0.3, 2});
  REQUIRE(op_binary(xb, wb)->item() == 2.0);  // 1 - 2 + 3

  REQUIRE_THROWS_AS(op_typical(x, xm), std::invalid_argument);
}

TEST_CASE("operator algebra on 1000 random vectors") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 1000; ++rep) {
    std::size_t n = 1 + rng() % 8;
    auto xv = random_vec(rng, n);
    auto wv = random_vec(rng, n);
    Tensor x = make_tensor({static_cast<int>(n)}, xv);
    Tensor w = make_tensor({static_cast<int>(n)}, wv);
    // f_M symmetry.
    REQUIRE(op_mulfree(x, w)->item() == op_mulfree(w, x)->item());
    // f_M(x, x) = 2*sum(x).
    double sx = 0.0;
    for (double v : xv) sx += v;
    REQUIRE(op_mulfree(x, x)->item() == Catch::Approx(2.0 * sx).margin(1e-12));
    // f_B(x, w) = f_T(x, binarize(w)).
    REQUIRE(op_binary(x, w)->item() == op_typical(x, ste_binarize(w))->item());
    // And both match the scalar reference.
    REQUIRE(op_typical(x, w)->item() == Catch::Approx(ref_typical(xv, wv)).margin(1e-12));
    REQUIRE(op_mulfree(x, w)->item() == Catch::Approx(ref_mulfree(xv, wv)).margin(1e-12));
  }
}

TEST_CASE("operator gradchecks") {
  std::mt19937_64 rng(22);
  const double k = 10.0;
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = make_tensor({4}, random_vec(rng, 4, -2.0, 2.0, 0.05), true);
    Tensor w = make_tensor({4}, random_vec(rng, 4, -0.95, 0.95, 0.05), true);
    REQUIRE(gradcheck({x, w}, [&] { return op_typical(x, w); }) < 1e-4);

    // Surrogate paths against the smoothed oracle. The analytic grad treats
    // the non-perturbed factor as a hard value, so the oracle smooths only
    // the perturbed leaf's occurrences.
    for (const Tensor& leaf : {x, w}) {
      const Tensor& other = leaf == x ? w : x;
      auto oracle = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
          s += testutil::smooth_sign(leaf->value[i], k) * std::fabs(other->value[i]) +
               hard_sign(other->value[i]) * testutil::smooth_abs(leaf->value[i], k);
        return s;
      };
      leaf->zero_grad();
      other->zero_grad();
      Tensor loss = op_mulfree(x, w, k);
      backward(loss);
      for (std::size_t j = 0; j < leaf->size(); ++j) {
        double fd = testutil::fd_grad(leaf, j, oracle);
        REQUIRE(testutil::rel_err(leaf->grad[j], fd) < 1e-3);
      }
    }

    // Binary: the x gradient is exact (forward is linear in x); the w
    // gradient follows the clipped STE, matched by the clamp oracle.
    auto bin_oracle = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i)
        s += x->value[i] * testutil::smooth_binarize(w->value[i]);
      return s;
    };
    REQUIRE(gradcheck({x}, [&] { return op_binary(x, w); }) < 1e-4);
    REQUIRE(gradcheck({w}, [&] { return op_binary(x, w); }, bin_oracle) < 1e-3);
  }
}

TEST_CASE("dense binary layer example") {
  Tensor input = make_tensor({1, 2}, {1, 2});
  Tensor weights = make_tensor({1, 2}, {0.5, -0.3});
  Tensor bias = make_tensor({1}, {0.25});
  Tensor y = apply_operator(OperatorKind::Binary, LayerKind2::Dense, input, weights, bias);
  REQUIRE(y->shape == Shape{1, 1});
  REQUIRE(y->value[0] == Catch::Approx(-1.0 + 0.25));
}

TEST_CASE("conv2d equals brute-force sliding window") {
  std::mt19937_64 rng(23);
  struct Case {
    int c, h, w, oc, k, s, p;
  };
  for (const Case& cs : {Case{1, 6, 6, 3, 3, 1, 0}, Case{2, 6, 6, 4, 3, 1, 1},
                         Case{3, 6, 6, 2, 2, 2, 0}, Case{1, 6, 6, 1, 5, 1, 2}}) {
    ConvGeom g{cs.c, cs.h, cs.w, cs.k, cs.s, cs.p};
    const int b = 2;
    auto xv = random_vec(rng, static_cast<std::size_t>(b) * cs.c * cs.h * cs.w);
    auto wv = random_vec(rng, static_cast<std::size_t>(cs.oc) * g.patch_len());
    auto bv = random_vec(rng, cs.oc);
    Tensor x = make_tensor({b, cs.c, cs.h, cs.w}, xv);
    Tensor w = make_tensor({cs.oc, g.patch_len()}, wv);
    Tensor bias = make_tensor({cs.oc}, bv);
    for (OperatorKind kind :
         {OperatorKind::Typical, OperatorKind::MultiplicationFree, OperatorKind::Binary}) {
      Tensor y = apply_operator(kind, LayerKind2::Conv2d, x, w, bias, &g);
      auto ref = ref_conv(kind, xv, b, g, wv, bv, cs.oc);
      REQUIRE(y->shape == Shape{b, cs.oc, g.out_h(), g.out_w()});
      for (std::size_t i = 0; i < ref.size(); ++i)
        REQUIRE(y->value[i] == Catch::Approx(ref[i]).margin(1e-12));
    }
  }
}

TEST_CASE("3x3 valid conv reduces to the flat operator") {
  std::mt19937_64 rng(24);
  auto xv = random_vec(rng, 9);
  auto wv = random_vec(rng, 9);
  ConvGeom g{1, 3, 3, 3, 1, 0};
  Tensor x = make_tensor({1, 1, 3, 3}, xv);
  Tensor w = make_tensor({1, 9}, wv);
  Tensor y =
      apply_operator(OperatorKind::MultiplicationFree, LayerKind2::Conv2d, x, w, zeros({1}), &g);
  REQUIRE(y->size() == 1);
  Tensor flat_x = make_tensor({9}, xv);
  Tensor flat_w = make_tensor({9}, wv);
  REQUIRE(y->value[0] == Catch::Approx(op_mulfree(flat_x, flat_w)->item()).margin(1e-12));
}

TEST_CASE("conv2d gradcheck") {
  std::mt19937_64 rng(25);
  ConvGeom g{1, 4, 4, 3, 1, 1};
  Tensor x = make_tensor({1, 1, 4, 4}, random_vec(rng, 16), true);
  Tensor w = make_tensor({2, 9}, random_vec(rng, 18), true);
  Tensor bias = make_tensor({2}, random_vec(rng, 2), true);
  std::vector<double> coeff = random_vec(rng, 32);
  auto build = [&] {
    Tensor y = apply_operator(OperatorKind::Typical, LayerKind2::Conv2d, x, w, bias, &g);
    return dot_const(reshape(y, {32}), coeff);
  };
  REQUIRE(gradcheck({x, w, bias}, build) < 1e-4);
}

TEST_CASE("quantization worked example") {
  Quantized q = quantize({-1.0, 0.5, 1.0}, 8);
  REQUIRE(q.spec.scale == Catch::Approx(1.0 / 127.0).margin(1e-12));
  REQUIRE(q.ints == std::vector<std::int32_t>{-127, 64, 127});  // half away from zero
  auto d = dequantize(q);
  REQUIRE(d[0] == Catch::Approx(-1.0).margin(1e-6));
  REQUIRE(d[1] == Catch::Approx(0.503937).margin(1e-6));
  REQUIRE(d[2] == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("quantization error bound and edge cases") {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 1000; ++rep) {
    auto v = random_vec(rng, 1 + rng() % 16, -5.0, 5.0);
    for (int bits : {4, 8}) {
      Quantized q = quantize(v, bits);
      auto d = dequantize(q);
      for (std::size_t i = 0; i < v.size(); ++i)
        REQUIRE(std::fabs(v[i] - d[i]) <= q.spec.scale / 2.0 + 1e-12);
    }
  }
  Quantized zq = quantize({0.0, 0.0}, 8);
  REQUIRE(zq.spec.scale == 1.0);
  REQUIRE(zq.ints == std::vector<std::int32_t>{0, 0});
  REQUIRE_THROWS_AS(quantize({1.0}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(quantize({std::nan("")}, 8), std::invalid_argument);
}
