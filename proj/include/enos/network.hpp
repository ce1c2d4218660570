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

#ifndef ENOS_NETWORK_HPP
#define ENOS_NETWORK_HPP

#include <map>
#include <random>
#include <unordered_map>

#include "enos/energy.hpp"
#include "enos/nn.hpp"
#include "enos/operators.hpp"

namespace enos {

enum class LayerKind { Conv2d, Dense, Relu, MaxPool, AvgPool, GlobalAvgPool, Concat, Flatten };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::GlobalAvgPool: return "global-avgpool";
    case LayerKind::Concat: return "concat";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;                 // label usable in from=/inputs=
  std::string from;                 // input layer by name; empty = previous layer
  std::vector<std::string> inputs;  // concat only
  int out_channels = 0;             // conv2d
  int units = 0;                    // dense
  int kernel = 1, stride = 1;
  bool pad_same = false;
  int pad = 0;
  bool searchable = false;
  std::optional<OperatorKind> pin;  // searchable layer locked to one operator
};

struct NetworkSpec {
  Shape input_shape;  // {C,H,W} feature maps or {F} flat features
  int num_classes = 0;
  std::vector<LayerSpec> layers;
};

// --- shape inference and operation counts ------------------------------------

struct LayerInfo {
  Shape in, out;      // per-sample shapes
  ConvGeom geom;      // conv2d only
  long n_op = 0;      // MACs per sample (searchable layers)
  long n_w = 0;       // weight count, biases excluded
  int search_idx = -1;
};

namespace detail {
inline int resolve_pad(const LayerSpec& l) {
  if (!l.pad_same) return l.pad;
  if (l.stride != 1)
    throw std::invalid_argument("pad=same requires stride 1 on layer " + l.name);
  return (l.kernel - 1) / 2;
}
}  // namespace detail

struct NetworkPlan {
  std::vector<LayerInfo> info;          // one per layer
  std::vector<int> searchable_layers;   // layer indices, in order
  std::vector<long> n_ops, n_ws;        // per searchable layer
  long total_weights = 0;
  Shape output_shape;
};

inline long count_macs(const LayerSpec& l, const Shape& input_shape) {
  if (l.kind == LayerKind::Conv2d) {
    if (input_shape.size() != 3)
      throw std::invalid_argument("count_macs: conv2d expects [C,H,W] input, got " +
                                  shape_str(input_shape));
    ConvGeom g{input_shape[0], input_shape[1], input_shape[2], l.kernel, l.stride,
               detail::resolve_pad(l)};
    g.validate();
    return static_cast<long>(g.out_h()) * g.out_w() * l.out_channels * l.kernel * l.kernel *
           input_shape[0];
  }
  if (l.kind == LayerKind::Dense) {
    if (input_shape.size() != 1)
      throw std::invalid_argument("count_macs: dense expects flat input, got " +
                                  shape_str(input_shape));
    return static_cast<long>(input_shape[0]) * l.units;
  }
  throw std::invalid_argument(std::string("count_macs: layer kind '") + layer_kind_name(l.kind) +
                              "' is not searchable");
}

inline long count_weights(const LayerSpec& l, const Shape& input_shape) {
  if (l.kind == LayerKind::Conv2d) {
    if (input_shape.size() != 3)
      throw std::invalid_argument("count_weights: conv2d expects [C,H,W] input");
    return static_cast<long>(l.kernel) * l.kernel * input_shape[0] * l.out_channels;
  }
  if (l.kind == LayerKind::Dense) {
    if (input_shape.size() != 1)
      throw std::invalid_argument("count_weights: dense expects flat input");
    return static_cast<long>(input_shape[0]) * l.units;
  }
  throw std::invalid_argument(std::string("count_weights: layer kind '") +
                              layer_kind_name(l.kind) + "' is not searchable");
}

inline NetworkPlan plan_network(const NetworkSpec& spec) {
  if (spec.input_shape.empty() || spec.num_classes < 2)
    throw std::invalid_argument("plan_network: missing input shape or class count");
  NetworkPlan plan;
  std::unordered_map<std::string, Shape> named;
  Shape cur = spec.input_shape;
  auto lookup = [&](const std::string& ref, int layer_idx) -> Shape {
    auto it = named.find(ref);
    if (it == named.end())
      throw std::invalid_argument("layer " + std::to_string(layer_idx) +
                                  ": unknown input reference '" + ref + "'");
    return it->second;
  };
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    LayerInfo info;
    info.in = l.from.empty() ? cur : lookup(l.from, static_cast<int>(li));
    switch (l.kind) {
      case LayerKind::Conv2d: {
        if (info.in.size() != 3)
          throw std::invalid_argument("conv2d layer " + std::to_string(li) +
                                      ": expected [C,H,W] input, got " + shape_str(info.in));
        if (l.out_channels < 1) throw std::invalid_argument("conv2d: out channels required");
        info.geom = ConvGeom{info.in[0], info.in[1], info.in[2], l.kernel, l.stride,
                             detail::resolve_pad(l)};
        info.geom.validate();
        info.out = {l.out_channels, info.geom.out_h(), info.geom.out_w()};
        break;
      }
      case LayerKind::Dense: {
        if (info.in.size() != 1)
          throw std::invalid_argument("dense layer " + std::to_string(li) +
                                      ": expected flat input, got " + shape_str(info.in) +
                                      " (add a flatten layer)");
        if (l.units < 1) throw std::invalid_argument("dense: units required");
        info.out = {l.units};
        break;
      }
      case LayerKind::Relu:
        info.out = info.in;
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool: {
        if (info.in.size() != 3)
          throw std::invalid_argument("pool layer " + std::to_string(li) + ": expected [C,H,W]");
        int oh = (info.in[1] - l.kernel) / l.stride + 1;
        int ow = (info.in[2] - l.kernel) / l.stride + 1;
        if (l.kernel < 1 || l.stride < 1 || oh < 1 || ow < 1)
          throw std::invalid_argument("pool layer " + std::to_string(li) + ": bad geometry");
        info.out = {info.in[0], oh, ow};
        break;
      }
      case LayerKind::GlobalAvgPool:
        if (info.in.size() != 3)
          throw std::invalid_argument("global-avgpool: expected [C,H,W]");
        info.out = {info.in[0]};
        break;
      case LayerKind::Flatten:
        info.out = {static_cast<int>(numel(info.in))};
        break;
      case LayerKind::Concat: {
        if (l.inputs.size() < 2) throw std::invalid_argument("concat: needs >= 2 inputs");
        Shape first = lookup(l.inputs[0], static_cast<int>(li));
        if (first.size() != 3) throw std::invalid_argument("concat: inputs must be [C,H,W]");
        int ch = first[0];
        for (std::size_t k = 1; k < l.inputs.size(); ++k) {
          Shape s = lookup(l.inputs[k], static_cast<int>(li));
          if (s.size() != 3 || s[1] != first[1] || s[2] != first[2])
            throw std::invalid_argument("concat: spatial mismatch " + shape_str(first) + " vs " +
                                        shape_str(s));
          ch += s[0];
        }
        info.out = {ch, first[1], first[2]};
        break;
      }
    }
    if (l.searchable) {
      if (l.kind != LayerKind::Conv2d && l.kind != LayerKind::Dense)
        throw std::invalid_argument(std::string("layer kind '") + layer_kind_name(l.kind) +
                                    "' cannot be searchable");
      info.search_idx = static_cast<int>(plan.searchable_layers.size());
      info.n_op = count_macs(l, info.in);
      info.n_w = count_weights(l, info.in);
      plan.searchable_layers.push_back(static_cast<int>(li));
      plan.n_ops.push_back(info.n_op);
      plan.n_ws.push_back(info.n_w);
      plan.total_weights += info.n_w;
    }
    if (!l.name.empty()) named[l.name] = info.out;
    cur = info.out;
    plan.info.push_back(std::move(info));
  }
  plan.output_shape = cur;
  if (plan.output_shape != Shape{spec.num_classes})
    throw std::invalid_argument("network output " + shape_str(plan.output_shape) +
                                " does not match " + std::to_string(spec.num_classes) +
                                " classes");
  return plan;
}

// --- spec file parser ---------------------------------------------------------
//
// One layer per line: "<kind> key=value ...". The first non-comment line must
// be "input <dims> classes=<K>", dims like 1x8x8 or 16. Unknown keys are
// rejected. See README for the full key set.

namespace detail {

inline int parse_int(const std::string& v, const std::string& key, int lineno) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("line " + std::to_string(lineno) + ": bad integer for '" + key +
                                "': " + v);
  }
}

inline bool parse_bool(const std::string& v, const std::string& key, int lineno) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("line " + std::to_string(lineno) + ": bad boolean for '" + key +
                              "': " + v);
}

}  // namespace detail

inline NetworkSpec parse_network_spec(std::istream& in) {
  NetworkSpec spec;
  std::string line;
  int lineno = 0;
  bool have_input = false;
  static const std::map<std::string, LayerKind> kinds = {
      {"conv2d", LayerKind::Conv2d},       {"dense", LayerKind::Dense},
      {"relu", LayerKind::Relu},           {"maxpool", LayerKind::MaxPool},
      {"avgpool", LayerKind::AvgPool},     {"global-avgpool", LayerKind::GlobalAvgPool},
      {"concat", LayerKind::Concat},       {"flatten", LayerKind::Flatten}};
  static const std::map<LayerKind, std::vector<std::string>> allowed = {
      {LayerKind::Conv2d, {"name", "from", "out", "kernel", "stride", "pad", "searchable", "pin"}},
      {LayerKind::Dense, {"name", "from", "units", "searchable", "pin"}},
      {LayerKind::Relu, {"name", "from"}},
      {LayerKind::MaxPool, {"name", "from", "kernel", "stride"}},
      {LayerKind::AvgPool, {"name", "from", "kernel", "stride"}},
      {LayerKind::GlobalAvgPool, {"name", "from"}},
      {LayerKind::Concat, {"name", "inputs"}},
      {LayerKind::Flatten, {"name", "from"}}};
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
    auto toks = detail::split(line, ' ');
    if (toks.empty()) continue;
    if (!have_input) {
      if (toks[0] != "input")
        throw std::invalid_argument("line " + std::to_string(lineno) +
                                    ": spec must start with an 'input' line");
      if (toks.size() < 2)
        throw std::invalid_argument("line " + std::to_string(lineno) + ": input needs dims");
      for (const auto& d : detail::split(toks[1], 'x'))
        spec.input_shape.push_back(detail::parse_int(d, "input dims", lineno));
      for (std::size_t i = 2; i < toks.size(); ++i) {
        auto eq = toks[i].find('=');
        if (eq == std::string::npos || toks[i].substr(0, eq) != "classes")
          throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown input key '" +
                                      toks[i] + "'");
        spec.num_classes = detail::parse_int(toks[i].substr(eq + 1), "classes", lineno);
      }
      if (spec.num_classes < 2)
        throw std::invalid_argument("line " + std::to_string(lineno) + ": classes=<K> required");
      have_input = true;
      continue;
    }
    auto kit = kinds.find(toks[0]);
    if (kit == kinds.end())
      throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown layer kind '" +
                                  toks[0] + "'");
    LayerSpec l;
    l.kind = kit->second;
    const auto& keys = allowed.at(l.kind);
    for (std::size_t i = 1; i < toks.size(); ++i) {
      auto eq = toks[i].find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value, got '" +
                                    toks[i] + "'");
      std::string key = toks[i].substr(0, eq), val = toks[i].substr(eq + 1);
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown key '" + key +
                                    "' for " + toks[0]);
      if (key == "name") l.name = val;
      else if (key == "from") l.from = val;
      else if (key == "inputs") l.inputs = detail::split(val, ',');
      else if (key == "out") l.out_channels = detail::parse_int(val, key, lineno);
      else if (key == "units") l.units = detail::parse_int(val, key, lineno);
      else if (key == "kernel") l.kernel = detail::parse_int(val, key, lineno);
      else if (key == "stride") l.stride = detail::parse_int(val, key, lineno);
      else if (key == "pad") {
        if (val == "same") l.pad_same = true;
        else if (val == "valid") l.pad = 0;
        else l.pad = detail::parse_int(val, key, lineno);
      } else if (key == "searchable") l.searchable = detail::parse_bool(val, key, lineno);
      else if (key == "pin") {
        auto op = op_from_name(val);
        if (!op)
          throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown pin '" + val +
                                      "'");
        l.pin = *op;
        l.searchable = true;
      }
    }
    spec.layers.push_back(std::move(l));
  }
  if (!have_input) throw std::invalid_argument("empty network spec");
  return spec;
}

inline NetworkSpec parse_network_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open network spec '" + path + "'");
  return parse_network_spec(in);
}

inline std::string serialize_network_spec(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "input ";
  for (std::size_t i = 0; i < spec.input_shape.size(); ++i)
    os << (i ? "x" : "") << spec.input_shape[i];
  os << " classes=" << spec.num_classes << "\n";
  for (const auto& l : spec.layers) {
    os << layer_kind_name(l.kind);
    if (!l.name.empty()) os << " name=" << l.name;
    if (!l.from.empty()) os << " from=" << l.from;
    if (l.kind == LayerKind::Conv2d) {
      os << " out=" << l.out_channels << " kernel=" << l.kernel << " stride=" << l.stride;
      if (l.pad_same) os << " pad=same";
      else if (l.pad > 0) os << " pad=" << l.pad;
    }
    if (l.kind == LayerKind::Dense) os << " units=" << l.units;
    if (l.kind == LayerKind::MaxPool || l.kind == LayerKind::AvgPool)
      os << " kernel=" << l.kernel << " stride=" << l.stride;
    if (l.kind == LayerKind::Concat) {
      os << " inputs=";
      for (std::size_t i = 0; i < l.inputs.size(); ++i) os << (i ? "," : "") << l.inputs[i];
    }
    if (l.pin) os << " pin=" << op_name(*l.pin);
    else if (l.searchable) os << " searchable=true";
    os << "\n";
  }
  return os.str();
}

// --- presets ------------------------------------------------------------------

inline LayerSpec conv_layer(std::string name, int out, int kernel, bool same, bool searchable,
                            std::string from = "") {
  LayerSpec l;
  l.kind = LayerKind::Conv2d;
  l.name = std::move(name);
  l.from = std::move(from);
  l.out_channels = out;
  l.kernel = kernel;
  l.pad_same = same;
  l.searchable = searchable;
  return l;
}

// Two searchable convs + searchable classifier head.
inline NetworkSpec preset_mini_cnn(Shape input_shape, int classes) {
  NetworkSpec s;
  s.input_shape = std::move(input_shape);
  s.num_classes = classes;
  s.layers.push_back(conv_layer("c1", 4, 3, true, true));
  s.layers.push_back({.kind = LayerKind::Relu});
  s.layers.push_back(conv_layer("c2", 8, 3, true, true));
  s.layers.push_back({.kind = LayerKind::Relu});
  s.layers.push_back({.kind = LayerKind::Flatten});
  LayerSpec d;
  d.kind = LayerKind::Dense;
  d.units = classes;
  d.searchable = true;
  s.layers.push_back(d);
  return s;
}

// Three fire modules (1x1 squeeze + 1x1/3x3 expand concat), then
// global-avgpool + classifier.
inline NetworkSpec preset_mini_squeeze(Shape input_shape, int classes) {
  NetworkSpec s;
  s.input_shape = std::move(input_shape);
  s.num_classes = classes;
  s.layers.push_back(conv_layer("c1", 8, 3, true, true));
  LayerSpec r;
  r.kind = LayerKind::Relu;
  s.layers.push_back(r);
  LayerSpec mp;
  mp.kind = LayerKind::MaxPool;
  mp.kernel = 2;
  mp.stride = 2;
  s.layers.push_back(mp);
  for (int f = 1; f <= 3; ++f) {
    std::string p = "f" + std::to_string(f);
    s.layers.push_back(conv_layer(p + "s", 4, 1, false, true));
    LayerSpec sr;
    sr.kind = LayerKind::Relu;
    sr.name = p + "sr";
    s.layers.push_back(sr);
    s.layers.push_back(conv_layer(p + "e1", 4, 1, false, true, p + "sr"));
    s.layers.push_back(conv_layer(p + "e3", 4, 3, true, true, p + "sr"));
    LayerSpec cc;
    cc.kind = LayerKind::Concat;
    cc.inputs = {p + "e1", p + "e3"};
    s.layers.push_back(cc);
    s.layers.push_back(r);
  }
  LayerSpec g;
  g.kind = LayerKind::GlobalAvgPool;
  s.layers.push_back(g);
  LayerSpec d;
  d.kind = LayerKind::Dense;
  d.units = classes;
  d.searchable = true;
  s.layers.push_back(d);
  return s;
}

inline NetworkSpec make_preset(const std::string& name, Shape input_shape, int classes) {
  if (name == "mini-cnn") return preset_mini_cnn(std::move(input_shape), classes);
  if (name == "mini-squeeze") return preset_mini_squeeze(std::move(input_shape), classes);
  throw std::invalid_argument("unknown network preset '" + name + "'");
}

// --- runtime network ----------------------------------------------------------

// One searchable layer at runtime: shared weights theta reused by every
// operator path, plus the operator-weight logits alpha over the choice set.
struct MixtureLayer {
  Tensor weight;  // conv: [OC x C*K*K], dense: [OUT x IN]
  Tensor bias;    // [OC] / [OUT], full precision always
  Tensor alpha;   // logits, length == choice set size
  bool frozen = false;
  int frozen_choice = -1;
};

struct AssignmentIndex {
  std::vector<int> choice;  // per searchable layer, index into the choice set
};

class Network {
 public:
  Network(NetworkSpec spec, std::vector<OperatorChoice> choices, double steepness = 10.0,
          std::uint64_t seed = 0)
      : spec_(std::move(spec)), choices_(std::move(choices)), steepness_(steepness) {
    if (choices_.empty()) throw std::invalid_argument("Network: empty choice set");
    plan_ = plan_network(spec_);
    std::mt19937_64 rng(seed);
    mix_.resize(plan_.searchable_layers.size());
    for (std::size_t s = 0; s < plan_.searchable_layers.size(); ++s) {
      const int li = plan_.searchable_layers[s];
      const LayerSpec& l = spec_.layers[li];
      const LayerInfo& info = plan_.info[li];
      int fan_out, fan_in;
      if (l.kind == LayerKind::Conv2d) {
        fan_out = l.out_channels;
        fan_in = info.geom.patch_len();
      } else {
        fan_out = l.units;
        fan_in = info.in[0];
      }
      double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-bound, bound);
      std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
      for (double& x : w) x = u(rng);
      MixtureLayer& m = mix_[s];
      m.weight = make_tensor({fan_out, fan_in}, std::move(w), true);
      m.bias = zeros({fan_out}, true);
      m.alpha = zeros({static_cast<int>(choices_.size())}, true);
      if (l.pin) freeze(static_cast<int>(s), choice_index({*l.pin, Mode::Digital8}));
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  const NetworkPlan& plan() const { return plan_; }
  const std::vector<OperatorChoice>& choices() const { return choices_; }
  double steepness() const { return steepness_; }
  std::size_t num_searchable() const { return mix_.size(); }
  MixtureLayer& mixture(std::size_t s) { return mix_.at(s); }
  const MixtureLayer& mixture(std::size_t s) const { return mix_.at(s); }

  int choice_index(const OperatorChoice& c) const {
    for (std::size_t j = 0; j < choices_.size(); ++j)
      if (choices_[j] == c) return static_cast<int>(j);
    throw std::invalid_argument("choice " + choice_token(c) + " not in the choice set");
  }

  std::vector<Tensor> thetas() const {
    std::vector<Tensor> ps;
    for (const auto& m : mix_) {
      ps.push_back(m.weight);
      ps.push_back(m.bias);
    }
    return ps;
  }
  std::vector<Tensor> alphas_all() const {
    std::vector<Tensor> ps;
    for (const auto& m : mix_) ps.push_back(m.alpha);
    return ps;
  }
  std::vector<Tensor> alphas_free() const {
    std::vector<Tensor> ps;
    for (const auto& m : mix_)
      if (!m.frozen) ps.push_back(m.alpha);
    return ps;
  }

  // Saturate alpha to a one-hot at +-40 logits and exclude the layer from
  // further alpha optimization.
  void freeze(int search_idx, int choice_idx) {
    MixtureLayer& m = mix_.at(search_idx);
    for (std::size_t j = 0; j < m.alpha->value.size(); ++j)
      m.alpha->value[j] = static_cast<int>(j) == choice_idx ? 40.0 : -40.0;
    m.frozen = true;
    m.frozen_choice = choice_idx;
  }

  // Argmax per layer, ties to the lowest index. Frozen layers keep their choice.
  AssignmentIndex argmax_assignment() const {
    AssignmentIndex a;
    for (const auto& m : mix_) {
      if (m.frozen) {
        a.choice.push_back(m.frozen_choice);
        continue;
      }
      int best = 0;
      for (std::size_t j = 1; j < m.alpha->value.size(); ++j)
        if (m.alpha->value[j] > m.alpha->value[best]) best = static_cast<int>(j);
      a.choice.push_back(best);
    }
    return a;
  }

  // Layer-wise multinomial draw from softmax(alpha).
  AssignmentIndex sample_assignment(std::mt19937_64& rng) const {
    AssignmentIndex a;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& m : mix_) {
      if (m.frozen) {
        a.choice.push_back(m.frozen_choice);
        continue;
      }
      std::vector<double> p = softmax_values(m.alpha->value);
      double r = u(rng), acc = 0.0;
      int pick = static_cast<int>(p.size()) - 1;
      for (std::size_t j = 0; j < p.size(); ++j) {
        acc += p[j];
        if (r < acc) {
          pick = static_cast<int>(j);
          break;
        }
      }
      a.choice.push_back(pick);
    }
    return a;
  }

  std::vector<OperatorChoice> materialize(const AssignmentIndex& a) const {
    std::vector<OperatorChoice> out;
    for (int c : a.choice) out.push_back(choices_.at(c));
    return out;
  }

  static std::vector<double> softmax_values(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = std::exp(logits[i] - mx);
      z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
  }

  // Mixture forward: every searchable layer outputs
  // sum_j softmax(alpha)_j * f_{op(j)}(x, theta). Frozen layers take the
  // single-operator fast path (exact one-hot limit).
  Tensor forward_mixture(const Tensor& x) { return forward(x, nullptr, false); }

  // Single-operator forward under a fixed assignment. quantized=true simulates
  // inference precision: weights at 8 bits (digital) or 4 bits (CiM),
  // activations at 8 bits; biases stay full precision.
  Tensor forward_assigned(const Tensor& x, const std::vector<OperatorChoice>& assignment,
                          bool quantized = false) {
    if (assignment.size() != mix_.size())
      throw std::invalid_argument("forward_assigned: " + std::to_string(assignment.size()) +
                                  " assignments for " + std::to_string(mix_.size()) +
                                  " searchable layers");
    return forward(x, &assignment, quantized);
  }

  // Re-sample theta from the init distribution; alpha and freeze state stay.
  void reinit_weights(std::uint64_t seed) {
    Network fresh(spec_, choices_, steepness_, seed);
    for (std::size_t s = 0; s < mix_.size(); ++s) {
      mix_[s].weight->value = fresh.mix_[s].weight->value;
      mix_[s].bias->value = fresh.mix_[s].bias->value;
    }
  }

  // Copy another instance's parameter values into this one.
  void adopt_weights(const Network& other) {
    if (other.mix_.size() != mix_.size())
      throw std::invalid_argument("adopt_weights: mismatched networks");
    for (std::size_t s = 0; s < mix_.size(); ++s) {
      mix_[s].weight->value = other.mix_[s].weight->value;
      mix_[s].bias->value = other.mix_[s].bias->value;
      mix_[s].alpha->value = other.mix_[s].alpha->value;
      mix_[s].frozen = other.mix_[s].frozen;
      mix_[s].frozen_choice = other.mix_[s].frozen_choice;
    }
  }

  // Deep copy: fresh tensors, same values and freeze state.
  Network clone() const {
    Network n(spec_, choices_, steepness_, 0);
    for (std::size_t s = 0; s < mix_.size(); ++s) {
      n.mix_[s].weight->value = mix_[s].weight->value;
      n.mix_[s].bias->value = mix_[s].bias->value;
      n.mix_[s].alpha->value = mix_[s].alpha->value;
      n.mix_[s].frozen = mix_[s].frozen;
      n.mix_[s].frozen_choice = mix_[s].frozen_choice;
    }
    return n;
  }

 private:
  static Tensor maybe_quantize_values(const Tensor& t, bool quantized, int bits) {
    if (!quantized) return t;
    return make_tensor(t->shape, fake_quantize(t->value, bits));
  }

  Tensor forward(const Tensor& x0, const std::vector<OperatorChoice>* assignment,
                 bool quantized) {
    Tensor cur = quantized ? make_tensor(x0->shape, fake_quantize(x0->value, 8)) : x0;
    std::unordered_map<std::string, Tensor> named;
    const int batch = x0->shape[0];
    for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
      const LayerSpec& l = spec_.layers[li];
      const LayerInfo& info = plan_.info[li];
      Tensor in = l.from.empty() ? cur : named.at(l.from);
      Tensor out;
      switch (l.kind) {
        case LayerKind::Conv2d:
        case LayerKind::Dense: {
          const MixtureLayer& m = mix_.at(info.search_idx);
          const LayerKind2 lk =
              l.kind == LayerKind::Conv2d ? LayerKind2::Conv2d : LayerKind2::Dense;
          const ConvGeom* g = l.kind == LayerKind::Conv2d ? &info.geom : nullptr;
          if (assignment) {
            const OperatorChoice& c = (*assignment)[info.search_idx];
            int wbits = c.mode == Mode::CiM4 ? 4 : 8;
            Tensor w = maybe_quantize_values(m.weight, quantized, wbits);
            out = apply_operator(c.op, lk, in, w, m.bias, g, steepness_);
            if (quantized) out = make_tensor(out->shape, fake_quantize(out->value, 8));
          } else if (m.frozen) {
            out = apply_operator(choices_[m.frozen_choice].op, lk, in, m.weight, m.bias, g,
                                 steepness_);
          } else {
            Tensor probs = softmax(m.alpha);
            // One forward per distinct operator; choice probabilities of the
            // same operator under different modes share that output.
            std::map<OperatorKind, Tensor> path;
            std::map<OperatorKind, Tensor> coeff;
            for (std::size_t j = 0; j < choices_.size(); ++j) {
              OperatorKind k = choices_[j].op;
              Tensor pj = pick(probs, j);
              auto it = coeff.find(k);
              coeff[k] = it == coeff.end() ? pj : add(it->second, pj);
              if (!path.count(k))
                path[k] = apply_operator(k, lk, in, m.weight, m.bias, g, steepness_);
            }
            for (const auto& [k, y] : path) {
              Tensor term = mul(y, coeff.at(k));
              out = out ? add(out, term) : term;
            }
          }
          break;
        }
        case LayerKind::Relu:
          out = relu(in);
          break;
        case LayerKind::MaxPool:
          out = maxpool(in, l.kernel, l.stride);
          break;
        case LayerKind::AvgPool:
          out = avgpool(in, l.kernel, l.stride);
          break;
        case LayerKind::GlobalAvgPool:
          out = global_avgpool(in);
          break;
        case LayerKind::Flatten:
          out = flatten(in);
          break;
        case LayerKind::Concat: {
          std::vector<Tensor> xs;
          for (const auto& ref : l.inputs) xs.push_back(named.at(ref));
          out = concat_channels(xs);
          break;
        }
      }
      if (!l.name.empty()) named[l.name] = out;
      cur = out;
    }
    if (cur->shape != Shape{batch, spec_.num_classes})
      throw std::logic_error("forward: output " + shape_str(cur->shape) + " unexpected");
    return cur;
  }

  NetworkSpec spec_;
  std::vector<OperatorChoice> choices_;
  double steepness_;
  NetworkPlan plan_;
  std::vector<MixtureLayer> mix_;
};

}  // namespace enos

#endif  // ENOS_NETWORK_HPP
