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

#ifndef ENOS_TRAIN_HPP
#define ENOS_TRAIN_HPP

#include "enos/data.hpp"
#include "enos/network.hpp"
#include "enos/optim.hpp"

namespace enos {

// Assemble a normalized batch tensor [B, C, H, W] plus its labels.
struct Batch {
  Tensor x;
  std::vector<int> y;
};

inline Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                        std::size_t begin, std::size_t count) {
  count = std::min(count, indices.size() - begin);
  if (count == 0) throw std::invalid_argument("make_batch: empty batch");
  Shape shape{static_cast<int>(count)};
  for (int d : data.sample_shape) shape.push_back(d);
  std::vector<double> vals;
  vals.reserve(count * data.feature_len());
  Batch b;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t idx = indices[begin + i];
    auto v = data.normalized(idx);
    vals.insert(vals.end(), v.begin(), v.end());
    b.y.push_back(data.y[idx]);
  }
  b.x = make_tensor(std::move(shape), std::move(vals));
  return b;
}

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

namespace detail {

inline EvalResult eval_logits(const Tensor& logits, const std::vector<int>& labels) {
  EvalResult r;
  const int b = logits->shape[0], c = logits->shape[1];
  int correct = 0;
  for (int i = 0; i < b; ++i) {
    const double* row = logits->value.data() + static_cast<std::size_t>(i) * c;
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    if (best == labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / b;
  return r;
}

}  // namespace detail

// Accuracy and mean cross-entropy on a split. With an assignment the network
// runs single-operator per layer; quantized additionally simulates the 8-bit
// digital / 4-bit CiM inference precision.
inline EvalResult evaluate(Network& net, const Dataset& data, Split split,
                           const std::vector<OperatorChoice>* assignment = nullptr,
                           bool quantized = false, std::size_t batch_size = 64) {
  const auto& idx = data.split(split);
  if (idx.empty()) throw std::invalid_argument("evaluate: empty split");
  double loss_sum = 0.0;
  double correct = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    Batch batch = make_batch(data, idx, b, batch_size);
    Tensor logits = assignment ? net.forward_assigned(batch.x, *assignment, quantized)
                               : net.forward_mixture(batch.x);
    Tensor ce = cross_entropy_loss(logits, batch.y);
    loss_sum += ce->item() * static_cast<double>(batch.y.size());
    correct += detail::eval_logits(logits, batch.y).accuracy *
               static_cast<double>(batch.y.size());
  }
  return {correct / static_cast<double>(idx.size()),
          loss_sum / static_cast<double>(idx.size())};
}

// Validation-loss plateau detector: stop after `patience` epochs without an
// improvement of at least `min_delta`.
class EarlyStop {
 public:
  EarlyStop(int patience = 5, double min_delta = 1e-4)
      : patience_(patience), min_delta_(min_delta) {}
  bool update(double val_loss) {
    if (val_loss < best_ - min_delta_) {
      best_ = val_loss;
      stale_ = 0;
    } else {
      ++stale_;
    }
    return stale_ >= patience_;
  }

 private:
  int patience_, stale_ = 0;
  double min_delta_ = 1e-4;
  double best_ = std::numeric_limits<double>::infinity();
};

// splitmix64; derives per-candidate and per-epoch seeds from the base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& indices,
                                            std::uint64_t seed) {
  std::vector<std::size_t> order(indices);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace enos

#endif  // ENOS_TRAIN_HPP
