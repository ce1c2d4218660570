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

#ifndef ENOS_TESTS_HELPERS_HPP
#define ENOS_TESTS_HELPERS_HPP

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "enos/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  double scale = std::max(std::fabs(a), std::fabs(b));
  return scale > 1e-6 ? std::fabs(a - b) / scale : std::fabs(a - b);
}

// Central finite difference of a scalar forward around leaf->value[j].
// The forward lambda must rebuild its graph from the current leaf values.
inline double fd_grad(const enos::Tensor& leaf, std::size_t j,
                      const std::function<double()>& forward, double h = 1e-5) {
  double saved = leaf->value[j];
  leaf->value[j] = saved + h;
  double up = forward();
  leaf->value[j] = saved - h;
  double dn = forward();
  leaf->value[j] = saved;
  return (up - dn) / (2.0 * h);
}

// Analytic gradient of `build()` w.r.t. every element of `leaves`, compared
// against finite differences of `oracle` (defaults to the same forward).
// Returns the worst relative error seen.
inline double gradcheck(const std::vector<enos::Tensor>& leaves,
                        const std::function<enos::Tensor()>& build,
                        std::function<double()> oracle = {}, double h = 1e-5) {
  if (!oracle) oracle = [&build] { return build()->item(); };
  for (const auto& l : leaves) l->zero_grad();
  enos::Tensor loss = build();
  enos::backward(loss);
  double worst = 0.0;
  for (const auto& leaf : leaves) {
    leaf->ensure_grad();
    for (std::size_t j = 0; j < leaf->size(); ++j)
      worst = std::max(worst, rel_err(leaf->grad[j], fd_grad(leaf, j, oracle, h)));
  }
  return worst;
}

inline std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -2.0,
                                      double hi = 2.0, double avoid_zero = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) {
    do {
      x = u(rng);
    } while (std::fabs(x) < avoid_zero);
  }
  return v;
}

// Surrogate-smoothed stand-ins whose exact derivatives equal the surrogate
// backward rules: erf(kx) for sign, ln(cosh(kx))/k for abs, clamp for binarize.
inline double smooth_sign(double x, double k) { return std::erf(k * x); }
inline double smooth_abs(double x, double k) { return std::log(std::cosh(k * x)) / k; }
inline double smooth_binarize(double w) { return std::clamp(w, -1.0, 1.0); }

}  // namespace testutil

#endif  // ENOS_TESTS_HELPERS_HPP
