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

#include "enos/optim.hpp"
#include "enos/tensor.hpp"
#include "helpers.hpp"

using namespace enos;
using testutil::gradcheck;
using testutil::random_vec;

TEST_CASE("matmul forward") {
  Tensor a = make_tensor({1, 2}, {1, 2});
  Tensor b = make_tensor({2, 1}, {3, 4});
  Tensor c = matmul(a, b);
  REQUIRE(c->shape == Shape{1, 1});
  REQUIRE(c->value[0] == 11.0);
  REQUIRE_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("matmul gradcheck 4x3 * 3x2") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor a = make_tensor({4, 3}, random_vec(rng, 12), true);
    Tensor b = make_tensor({3, 2}, random_vec(rng, 6), true);
    std::vector<double> coeff = random_vec(rng, 8);
    auto build = [&] { return dot_const(reshape(matmul(a, b), {8}), coeff); };
    REQUIRE(gradcheck({a, b}, build) < 1e-4);
  }
}

TEST_CASE("elementwise ops gradcheck") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a = make_tensor({5}, random_vec(rng, 5, -2.0, 2.0, 0.05), true);
    Tensor b = make_tensor({5}, random_vec(rng, 5, -2.0, 2.0, 0.05), true);
    std::vector<double> coeff = random_vec(rng, 5);
    REQUIRE(gradcheck({a, b}, [&] { return dot_const(add(a, b), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a, b}, [&] { return dot_const(sub(a, b), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a, b}, [&] { return dot_const(mul(a, b), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return dot_const(negate(a), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return dot_const(relu(a), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return dot_const(exp_(a), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return dot_const(tanh_(a), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return dot_const(scale(a, 1.7), coeff); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return sum(a); }) < 1e-4);
    REQUIRE(gradcheck({a}, [&] { return pick(a, 2); }) < 1e-4);
  }
}

TEST_CASE("scalar broadcast") {
  Tensor a = make_tensor({3}, {1, 2, 3}, true);
  Tensor s = scalar(2.0, true);
  Tensor y = mul(a, s);
  REQUIRE(y->value == std::vector<double>{2, 4, 6});
  backward(sum(y));
  REQUIRE(s->grad[0] == 6.0);  // sum of a
  REQUIRE(a->grad == std::vector<double>{2, 2, 2});
}

TEST_CASE("softmax values and gradient") {
  Tensor v = make_tensor({3}, {1, 0, 0});
  Tensor p = softmax(v);
  REQUIRE(p->value[0] == Catch::Approx(0.576117).margin(1e-6));
  REQUIRE(p->value[1] == Catch::Approx(0.211942).margin(1e-6));
  REQUIRE(p->value[2] == Catch::Approx(0.211942).margin(1e-6));

  Tensor big = make_tensor({3}, {10, 0, 0});
  REQUIRE(softmax(big)->value[0] > 0.9999);

  REQUIRE_THROWS_AS(softmax(make_tensor({2}, {1.0, std::nan("")})), std::invalid_argument);

  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = make_tensor({4}, random_vec(rng, 4), true);
    std::vector<double> coeff = random_vec(rng, 4);
    REQUIRE(gradcheck({x}, [&] { return dot_const(softmax(x), coeff); }) < 1e-4);
  }
}

TEST_CASE("surrogate sign") {
  Tensor x = make_tensor({3}, {-2, 0, 3}, true);
  Tensor y = surrogate_sign(x, 10.0);
  REQUIRE(y->value == std::vector<double>{-1, 1, 1});  // sign(0) = +1
  backward(pick(y, 1));
  REQUIRE(x->grad[1] == Catch::Approx(2.0 * 10.0 / std::sqrt(M_PI)).margin(1e-6));  // 11.283792

  // Backward equals the derivative of the smoothed forward erf(kx).
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    const double k = 10.0;
    Tensor a = make_tensor({4}, random_vec(rng, 4, -1.0, 1.0, 0.02), true);
    std::vector<double> c = random_vec(rng, 4);
    auto oracle = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += c[i] * testutil::smooth_sign(a->value[i], k);
      return s;
    };
    REQUIRE(gradcheck({a}, [&] { return dot_const(surrogate_sign(a, k), c); }, oracle) < 1e-3);
  }
}

TEST_CASE("surrogate abs") {
  Tensor x = make_tensor({1}, {1.0}, true);
  backward(pick(surrogate_abs(x, 10.0), 0));
  REQUIRE(x->grad[0] == Catch::Approx(std::tanh(10.0)).margin(1e-8));

  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 20; ++rep) {
    const double k = 10.0;
    Tensor a = make_tensor({4}, random_vec(rng, 4, -2.0, 2.0, 0.02), true);
    std::vector<double> c = random_vec(rng, 4);
    auto oracle = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += c[i] * testutil::smooth_abs(a->value[i], k);
      return s;
    };
    REQUIRE(gradcheck({a}, [&] { return dot_const(surrogate_abs(a, k), c); }, oracle) < 1e-3);
  }
}

TEST_CASE("ste binarize") {
  Tensor w = make_tensor({3}, {0.5, -0.3, 0.0}, true);
  Tensor y = ste_binarize(w);
  REQUIRE(y->value == std::vector<double>{1, -1, 1});

  // Clipped STE: unit gradient inside [-1, 1], zero outside; the smoothed
  // oracle clamp(w) has exactly that derivative.
  std::mt19937_64 rng(16);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a = make_tensor({4}, random_vec(rng, 4, -3.0, 3.0, 0.02), true);
    std::vector<double> c = random_vec(rng, 4);
    auto oracle = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += c[i] * testutil::smooth_binarize(a->value[i]);
      return s;
    };
    REQUIRE(gradcheck({a}, [&] { return dot_const(ste_binarize(a), c); }, oracle) < 1e-3);
  }
}

TEST_CASE("reshape and add_rowvec gradcheck") {
  std::mt19937_64 rng(17);
  Tensor m = make_tensor({2, 3}, random_vec(rng, 6), true);
  Tensor v = make_tensor({3}, random_vec(rng, 3), true);
  std::vector<double> coeff = random_vec(rng, 6);
  REQUIRE(gradcheck({m, v}, [&] {
            return dot_const(reshape(add_rowvec(m, v), {6}), coeff);
          }) < 1e-4);
  REQUIRE_THROWS_AS(reshape(m, {4}), std::invalid_argument);
}

TEST_CASE("cross entropy loss") {
  // Uniform logits over c classes -> loss = log(c), gradient (p - y)/b.
  Tensor logits = zeros({2, 3}, true);
  std::vector<int> labels{0, 2};
  Tensor loss = cross_entropy_loss(logits, labels);
  REQUIRE(loss->item() == Catch::Approx(std::log(3.0)).margin(1e-12));

  std::mt19937_64 rng(18);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor lg = make_tensor({3, 4}, random_vec(rng, 12), true);
    std::vector<int> y{rep % 4, (rep + 1) % 4, (rep + 2) % 4};
    REQUIRE(gradcheck({lg}, [&] { return cross_entropy_loss(lg, y); }) < 1e-4);
  }
  REQUIRE_THROWS_AS(cross_entropy_loss(logits, {0, 3}), std::invalid_argument);
  REQUIRE_THROWS_AS(cross_entropy_loss(logits, {0}), std::invalid_argument);
}

TEST_CASE("backward accumulates through shared nodes") {
  Tensor x = make_tensor({1}, {3.0}, true);
  Tensor y = add(x, x);          // dy/dx = 2
  Tensor z = mul(y, y);          // z = (2x)^2, dz/dx = 8x = 24
  backward(pick(z, 0));
  REQUIRE(x->grad[0] == Catch::Approx(24.0));
  REQUIRE_THROWS_AS(backward(make_tensor({2}, {1, 2})), std::invalid_argument);
}

TEST_CASE("adam first step") {
  Tensor p = scalar(1.0, true);
  Adam opt({p}, {.lr = 1e-3});
  p->ensure_grad();
  p->grad[0] = 1.0;
  opt.step();
  REQUIRE(1.0 - p->value[0] == Catch::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("adam zero gradient leaves parameter unchanged") {
  Tensor p = scalar(0.7, true);
  Adam opt({p}, {.lr = 1e-3});
  p->ensure_grad();
  opt.step();
  REQUIRE(p->value[0] == 0.7);
}

TEST_CASE("adam groups update independently") {
  Tensor theta = scalar(1.0, true);
  Tensor alpha = scalar(1.0, true);
  Adam opt_t({theta}, {.lr = 1e-3});
  Adam opt_a({alpha}, {.lr = 3e-3});
  theta->ensure_grad();
  alpha->ensure_grad();
  theta->grad[0] = 1.0;
  alpha->grad[0] = 1.0;
  opt_t.step();
  REQUIRE(alpha->value[0] == 1.0);  // untouched by the theta group
  opt_a.step();
  REQUIRE(1.0 - alpha->value[0] == Catch::Approx(3e-3).epsilon(1e-4));
}

TEST_CASE("adam rejects NaN gradients naming the parameter") {
  Tensor p = scalar(1.0, true);
  Adam opt({p}, {.lr = 1e-3}, {"layer0.weight"});
  p->ensure_grad();
  p->grad[0] = std::nan("");
  REQUIRE_THROWS_WITH(opt.step(), Catch::Matchers::ContainsSubstring("layer0.weight"));
}
