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

#ifndef ENOS_OPTIM_HPP
#define ENOS_OPTIM_HPP

#include "enos/tensor.hpp"

namespace enos {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over one parameter group. Separate groups (theta vs
// alpha) are separate instances with their own learning rates and moments.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg, std::vector<std::string> names = {})
      : params_(std::move(params)), cfg_(cfg), names_(std::move(names)) {
    for (const auto& p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  std::size_t size() const { return params_.size(); }
  long step_count() const { return t_; }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      TensorNode& p = *params_[i];
      p.ensure_grad();
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        double g = p.grad[j];
        if (std::isnan(g))
          throw std::runtime_error("adam: NaN gradient in parameter '" + name(i) + "'");
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
        double mhat = m_[i][j] / bc1;
        double vhat = v_[i][j] / bc2;
        p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  std::string name(std::size_t i) const {
    return i < names_.size() ? names_[i] : "param" + std::to_string(i);
  }
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace enos

#endif  // ENOS_OPTIM_HPP
