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

#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "enos/network.hpp"
#include "helpers.hpp"

using namespace enos;

TEST_CASE("operation and weight counts") {
  LayerSpec conv;
  conv.kind = LayerKind::Conv2d;
  conv.out_channels = 4;
  conv.kernel = 3;
  conv.pad_same = true;
  REQUIRE(count_macs(conv, {1, 8, 8}) == 2304);  // 8*8*4*3*3*1
  REQUIRE(count_weights(conv, {1, 8, 8}) == 36);

  LayerSpec dense;
  dense.kind = LayerKind::Dense;
  dense.units = 10;
  REQUIRE(count_macs(dense, {16}) == 160);
  REQUIRE(count_weights(dense, {16}) == 160);

  LayerSpec one;
  one.kind = LayerKind::Conv2d;
  one.out_channels = 4;
  one.kernel = 1;
  REQUIRE(count_macs(one, {4, 4, 4}) == 256);  // 4*4*4*1*1*4
  REQUIRE(count_weights(one, {4, 4, 4}) == 16);

  LayerSpec relu;
  relu.kind = LayerKind::Relu;
  REQUIRE_THROWS_AS(count_macs(relu, {16}), std::invalid_argument);
}

TEST_CASE("presets plan cleanly") {
  NetworkPlan cnn = plan_network(preset_mini_cnn({1, 4, 4}, 3));
  REQUIRE(cnn.searchable_layers.size() == 3);
  REQUIRE(cnn.output_shape == Shape{3});

  NetworkPlan sq = plan_network(preset_mini_squeeze({1, 8, 8}, 10));
  REQUIRE(sq.searchable_layers.size() == 11);  // c1 + 3 fires x 3 convs + head
  REQUIRE(sq.output_shape == Shape{10});
  REQUIRE_THROWS_AS(make_preset("nope", {1, 4, 4}, 3), std::invalid_argument);
}

TEST_CASE("plan rejects inconsistent specs") {
  NetworkSpec s;
  s.input_shape = {1, 4, 4};
  s.num_classes = 3;
  LayerSpec r;
  r.kind = LayerKind::Relu;
  r.searchable = true;
  s.layers.push_back(r);
  REQUIRE_THROWS_AS(plan_network(s), std::invalid_argument);  // relu not searchable

  NetworkSpec t = preset_mini_cnn({1, 4, 4}, 3);
  t.num_classes = 5;  // head still emits 3
  REQUIRE_THROWS_AS(plan_network(t), std::invalid_argument);
}

TEST_CASE("spec parser round trip") {
  NetworkSpec orig = preset_mini_squeeze({1, 8, 8}, 10);
  std::string text = serialize_network_spec(orig);
  std::istringstream in(text);
  NetworkSpec back = parse_network_spec(in);
  REQUIRE(serialize_network_spec(back) == text);
  REQUIRE(plan_network(back).searchable_layers == plan_network(orig).searchable_layers);
}

TEST_CASE("spec parser rejects bad input with line numbers") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_network_spec(in);
  };
  REQUIRE_THROWS_WITH(parse("conv2d out=4\n"), Catch::Matchers::ContainsSubstring("input"));
  REQUIRE_THROWS_WITH(parse("input 1x4x4 classes=3\nconv2d out=4 wat=1\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
  REQUIRE_THROWS_WITH(parse("input 1x4x4 classes=3\nwarp out=4\n"),
                      Catch::Matchers::ContainsSubstring("unknown layer kind"));
  REQUIRE_THROWS_AS(parse("input 1x4x4\n"), std::invalid_argument);  // classes missing
  // Comments and the pin key parse.
  NetworkSpec s = parse(
      "# head pinned to typical\n"
      "input 16 classes=4\n"
      "dense units=4 pin=T\n");
  REQUIRE(s.layers[0].pin == OperatorKind::Typical);
  REQUIRE(s.layers[0].searchable);
}

namespace {

NetworkSpec tiny_dense_spec() {
  NetworkSpec s;
  s.input_shape = {2};
  s.num_classes = 2;
  LayerSpec d;
  d.kind = LayerKind::Dense;
  d.units = 2;
  d.searchable = true;
  s.layers.push_back(d);
  return s;
}

}  // namespace

TEST_CASE("mixture forward worked example") {
  // alpha = 0 -> uniform mixture (f_T + f_M + f_B)/3 with shared theta.
  Network net(tiny_dense_spec(), digital_choices(), 10.0, 0);
  auto& m = net.mixture(0);
  m.weight->value = {0.5, -0.3, 0.5, -0.3};
  m.bias->value = {0.0, 0.0};
  Tensor y = net.forward_mixture(make_tensor({1, 2}, {1, 2}));
  REQUIRE(y->value[0] == Catch::Approx(-0.433333).margin(1e-9));  // (-0.1 - 0.2 - 1)/3
  REQUIRE(y->value[1] == Catch::Approx(-0.433333).margin(1e-9));
}

TEST_CASE("mixture loss gradcheck in alpha") {
  // Operator outputs are constants w.r.t. alpha, so plain finite differences
  // of the hard forward are exact for the alpha gradient.
  Network net(tiny_dense_spec(), hybrid_choices(), 10.0, 3);
  auto& m = net.mixture(0);
  m.alpha->value = {0.3, -0.2, 0.1, 0.05, -0.4, 0.2};
  Tensor x = make_tensor({2, 2}, {1.0, 2.0, -0.5, 0.7});
  std::vector<int> labels{0, 1};
  auto build = [&] { return cross_entropy_loss(net.forward_mixture(x), labels); };
  REQUIRE(testutil::gradcheck({m.alpha}, build) < 1e-3);
}

TEST_CASE("argmax assignment with ties to the lowest index") {
  Network net(tiny_dense_spec(), digital_choices(), 10.0, 0);
  net.mixture(0).alpha->value = {1.0, 1.0, 0.5};
  REQUIRE(net.argmax_assignment().choice == std::vector<int>{0});
  net.mixture(0).alpha->value = {0.0, 2.0, 2.0};
  REQUIRE(net.argmax_assignment().choice == std::vector<int>{1});
}

TEST_CASE("sampling follows softmax(alpha)") {
  Network net(tiny_dense_spec(), digital_choices(), 10.0, 0);
  net.mixture(0).alpha->value = {10.0, 0.0, 0.0};
  std::mt19937_64 rng(99);
  int hits = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    if (net.sample_assignment(rng).choice[0] == 0) ++hits;
  REQUIRE(static_cast<double>(hits) / draws >= 0.9998 - 0.002);
}

TEST_CASE("freeze saturates and excludes from free alphas") {
  Network net(tiny_dense_spec(), digital_choices(), 10.0, 0);
  REQUIRE(net.alphas_free().size() == 1);
  net.freeze(0, 2);
  REQUIRE(net.alphas_free().empty());
  REQUIRE(net.mixture(0).alpha->value == std::vector<double>{-40, -40, 40});
  REQUIRE(net.argmax_assignment().choice == std::vector<int>{2});
  // Frozen mixture forward equals the single assigned operator.
  auto assignment = net.materialize(net.argmax_assignment());
  Tensor x = make_tensor({1, 2}, {1, 2});
  Tensor ym = net.forward_mixture(x);
  Tensor ya = net.forward_assigned(x, assignment);
  for (std::size_t i = 0; i < ym->size(); ++i)
    REQUIRE(ym->value[i] == Catch::Approx(ya->value[i]).margin(1e-12));
}

TEST_CASE("pinned layers are locked at construction") {
  NetworkSpec s = tiny_dense_spec();
  s.layers[0].pin = OperatorKind::Binary;
  Network net(s, digital_choices(), 10.0, 0);
  REQUIRE(net.alphas_free().empty());
  REQUIRE(net.materialize(net.argmax_assignment())[0] ==
          OperatorChoice{OperatorKind::Binary, Mode::Digital8});
}

TEST_CASE("assigned forward rejects wrong assignment length") {
  Network net(tiny_dense_spec(), digital_choices(), 10.0, 0);
  Tensor x = make_tensor({1, 2}, {1, 2});
  REQUIRE_THROWS_AS(net.forward_assigned(x, {}), std::invalid_argument);
}

TEST_CASE("quantized forward runs and differs only slightly") {
  Network net(preset_mini_cnn({1, 4, 4}, 3), hybrid_choices(), 10.0, 7);
  std::mt19937_64 rng(7);
  Tensor x = make_tensor({2, 1, 4, 4}, testutil::random_vec(rng, 32));
  std::vector<OperatorChoice> assignment{{OperatorKind::Typical, Mode::Digital8},
                                         {OperatorKind::Typical, Mode::CiM4},
                                         {OperatorKind::Typical, Mode::Digital8}};
  Tensor yf = net.forward_assigned(x, assignment, false);
  Tensor yq = net.forward_assigned(x, assignment, true);
  REQUIRE(yf->shape == yq->shape);
  for (std::size_t i = 0; i < yf->size(); ++i)
    REQUIRE(std::fabs(yf->value[i] - yq->value[i]) < 1.0);
}

TEST_CASE("same seed gives identical initialization") {
  Network a(preset_mini_cnn({1, 4, 4}, 3), digital_choices(), 10.0, 42);
  Network b(preset_mini_cnn({1, 4, 4}, 3), digital_choices(), 10.0, 42);
  for (std::size_t s = 0; s < a.num_searchable(); ++s)
    REQUIRE(a.mixture(s).weight->value == b.mixture(s).weight->value);
}

TEST_CASE("clone and adopt copy values without aliasing") {
  Network a(tiny_dense_spec(), digital_choices(), 10.0, 5);
  Network b = a.clone();
  REQUIRE(b.mixture(0).weight->value == a.mixture(0).weight->value);
  b.mixture(0).weight->value[0] += 1.0;
  REQUIRE(b.mixture(0).weight->value != a.mixture(0).weight->value);
  a.adopt_weights(b);
  REQUIRE(a.mixture(0).weight->value == b.mixture(0).weight->value);
}

TEST_CASE("fire module topology forwards") {
  Network net(preset_mini_squeeze({1, 8, 8}, 10), digital_choices(), 10.0, 1);
  std::mt19937_64 rng(2);
  Tensor x = make_tensor({2, 1, 8, 8}, testutil::random_vec(rng, 128));
  Tensor y = net.forward_mixture(x);
  REQUIRE(y->shape == Shape{2, 10});
}
