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

#ifndef ENOS_TENSOR_HPP
#define ENOS_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace enos {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("non-positive dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

struct TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

// One node of the reverse-mode tape. Values are row-major doubles.
// backward_fn reads this node's grad and accumulates into the parents' grads.
struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::size_t size() const { return value.size(); }
  bool is_scalar() const { return value.size() == 1; }
  double item() const {
    if (!is_scalar()) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape));
    return value[0];
  }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
  void zero_grad() { grad.assign(value.size(), 0.0); }
};

inline Tensor make_tensor(Shape shape, std::vector<double> value, bool requires_grad = false) {
  if (numel(shape) != value.size())
    throw std::invalid_argument("shape " + shape_str(shape) + " does not match " +
                                std::to_string(value.size()) + " values");
  auto t = std::make_shared<TensorNode>();
  t->shape = std::move(shape);
  t->value = std::move(value);
  t->requires_grad = requires_grad;
  return t;
}

inline Tensor zeros(Shape shape, bool requires_grad = false) {
  std::size_t n = numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

inline Tensor scalar(double v, bool requires_grad = false) {
  return make_tensor({1}, {v}, requires_grad);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

inline bool any_grad(std::initializer_list<Tensor> ts) {
  for (const auto& t : ts)
    if (t && (t->requires_grad || t->backward_fn)) return true;
  return false;
}

inline Tensor result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                     std::function<void(TensorNode&)> backward_fn) {
  auto t = make_tensor(std::move(shape), std::move(value));
  bool track = false;
  for (const auto& p : parents)
    if (p->requires_grad || p->backward_fn) track = true;
  if (track) {
    t->parents = std::move(parents);
    t->backward_fn = std::move(backward_fn);
  }
  return t;
}

inline void check_same_or_scalar(const Tensor& a, const Tensor& b, const char* op) {
  if (a->shape != b->shape && !a->is_scalar() && !b->is_scalar())
    throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a->shape) + " and " +
                                shape_str(b->shape) + " are not broadcastable");
}

}  // namespace detail

// --- binary elementwise with scalar broadcast --------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_or_scalar(a, b, "add");
  const bool as = a->is_scalar() && !b->is_scalar();
  const bool bs = b->is_scalar() && !a->is_scalar();
  const Shape& shape = as ? b->shape : a->shape;
  std::size_t n = as ? b->size() : a->size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a->value[as ? 0 : i] + b->value[bs ? 0 : i];
  return detail::result(shape, std::move(out), {a, b}, [a, b, as, bs, n](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      a->grad[as ? 0 : i] += o.grad[i];
      b->grad[bs ? 0 : i] += o.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_or_scalar(a, b, "sub");
  const bool as = a->is_scalar() && !b->is_scalar();
  const bool bs = b->is_scalar() && !a->is_scalar();
  const Shape& shape = as ? b->shape : a->shape;
  std::size_t n = as ? b->size() : a->size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a->value[as ? 0 : i] - b->value[bs ? 0 : i];
  return detail::result(shape, std::move(out), {a, b}, [a, b, as, bs, n](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      a->grad[as ? 0 : i] += o.grad[i];
      b->grad[bs ? 0 : i] -= o.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_or_scalar(a, b, "mul");
  const bool as = a->is_scalar() && !b->is_scalar();
  const bool bs = b->is_scalar() && !a->is_scalar();
  const Shape& shape = as ? b->shape : a->shape;
  std::size_t n = as ? b->size() : a->size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a->value[as ? 0 : i] * b->value[bs ? 0 : i];
  return detail::result(shape, std::move(out), {a, b}, [a, b, as, bs, n](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      a->grad[as ? 0 : i] += o.grad[i] * b->value[bs ? 0 : i];
      b->grad[bs ? 0 : i] += o.grad[i] * a->value[as ? 0 : i];
    }
  });
}

// --- unary elementwise -------------------------------------------------------

inline Tensor negate(const Tensor& a) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -a->value[i];
  return detail::result(a->shape, std::move(out), {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] -= o.grad[i];
  });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  return detail::result(a->shape, std::move(out), {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (a->value[i] > 0.0) a->grad[i] += o.grad[i];
  });
}

inline Tensor exp_(const Tensor& a) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a->value[i]);
  return detail::result(a->shape, std::move(out), {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i] * o.value[i];
  });
}

inline Tensor tanh_(const Tensor& a) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a->value[i]);
  return detail::result(a->shape, std::move(out), {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      a->grad[i] += o.grad[i] * (1.0 - o.value[i] * o.value[i]);
  });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a->value[i];
  return detail::result(a->shape, std::move(out), {a}, [a, c](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += c * o.grad[i];
  });
}

// --- surrogate-gradient primitives -------------------------------------------

// sign(0) = +1 throughout; backward is a steep Gaussian (2k/sqrt(pi)) exp(-(kx)^2).
inline double hard_sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

inline Tensor surrogate_sign(const Tensor& a, double k = 10.0) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hard_sign(a->value[i]);
  const double c = 2.0 * k / std::sqrt(M_PI);
  return detail::result(a->shape, std::move(out), {a}, [a, k, c](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      double kx = k * a->value[i];
      a->grad[i] += o.grad[i] * c * std::exp(-kx * kx);
    }
  });
}

// Forward |x|; backward tanh(kx).
inline Tensor surrogate_abs(const Tensor& a, double k = 10.0) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a->value[i]);
  return detail::result(a->shape, std::move(out), {a}, [a, k](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      a->grad[i] += o.grad[i] * std::tanh(k * a->value[i]);
  });
}

// Forward sign(w); backward passes the upstream gradient where |w| <= 1 (clipped STE).
inline Tensor ste_binarize(const Tensor& a) {
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hard_sign(a->value[i]);
  return detail::result(a->shape, std::move(out), {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (std::fabs(a->value[i]) <= 1.0) a->grad[i] += o.grad[i];
  });
}

// --- reductions and indexing -------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double s = std::accumulate(a->value.begin(), a->value.end(), 0.0);
  return detail::result({1}, {s}, {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += o.grad[0];
  });
}

inline Tensor pick(const Tensor& a, std::size_t idx) {
  if (idx >= a->size())
    throw std::invalid_argument("pick: index " + std::to_string(idx) + " out of range for " +
                                shape_str(a->shape));
  return detail::result({1}, {a->value[idx]}, {a}, [a, idx](TensorNode& o) {
    a->ensure_grad();
    a->grad[idx] += o.grad[0];
  });
}

// Dot product with a constant coefficient vector; used by the energy regularizer.
inline Tensor dot_const(const Tensor& a, std::vector<double> coeff) {
  if (a->size() != coeff.size())
    throw std::invalid_argument("dot_const: tensor " + shape_str(a->shape) + " vs " +
                                std::to_string(coeff.size()) + " coefficients");
  double s = 0.0;
  for (std::size_t i = 0; i < coeff.size(); ++i) s += a->value[i] * coeff[i];
  return detail::result({1}, {s}, {a}, [a, coeff = std::move(coeff)](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < coeff.size(); ++i) a->grad[i] += o.grad[0] * coeff[i];
  });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a->size())
    throw std::invalid_argument("reshape: " + shape_str(a->shape) + " -> " + shape_str(shape) +
                                " changes element count");
  return detail::result(std::move(shape), a->value, {a}, [a](TensorNode& o) {
    a->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i];
  });
}

// --- linear algebra ----------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->shape) + " x " +
                                shape_str(b->shape));
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* A = a->value.data();
  const double* B = b->value.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + static_cast<std::size_t>(p) * n;
      double* orow = out.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return detail::result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorNode& o) {
    a->ensure_grad();
    b->ensure_grad();
    const double* G = o.grad.data();
    const double* A = a->value.data();
    const double* B = b->value.data();
    // dA = G * B^T
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        double s = 0.0;
        const double* grow = G + static_cast<std::size_t>(i) * n;
        const double* brow = B + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
        a->grad[static_cast<std::size_t>(i) * k + p] += s;
      }
    // dB = A^T * G
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        double av = A[static_cast<std::size_t>(i) * k + p];
        if (av == 0.0) continue;
        const double* grow = G + static_cast<std::size_t>(i) * n;
        double* brow = b->grad.data() + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
      }
  });
}

// mat [R x C] + row vector [C], broadcast over rows.
inline Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
  if (mat->shape.size() != 2 || static_cast<std::size_t>(mat->shape[1]) != vec->size())
    throw std::invalid_argument("add_rowvec: " + shape_str(mat->shape) + " + " +
                                shape_str(vec->shape));
  const int r = mat->shape[0], c = mat->shape[1];
  std::vector<double> out(mat->value);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * c + j] += vec->value[j];
  return detail::result(mat->shape, std::move(out), {mat, vec}, [mat, vec, r, c](TensorNode& o) {
    mat->ensure_grad();
    vec->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        double g = o.grad[static_cast<std::size_t>(i) * c + j];
        mat->grad[static_cast<std::size_t>(i) * c + j] += g;
        vec->grad[j] += g;
      }
  });
}

// --- softmax and loss --------------------------------------------------------

// 1-D softmax, max-subtracted. Rejects non-finite logits.
inline Tensor softmax(const Tensor& v) {
  for (double x : v->value)
    if (!std::isfinite(x)) throw std::invalid_argument("softmax: non-finite logit");
  double mx = *std::max_element(v->value.begin(), v->value.end());
  std::vector<double> out(v->size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(v->value[i] - mx);
    z += out[i];
  }
  for (double& x : out) x /= z;
  return detail::result(v->shape, std::move(out), {v}, [v](TensorNode& o) {
    v->ensure_grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < o.grad.size(); ++i) dot += o.grad[i] * o.value[i];
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      v->grad[i] += o.value[i] * (o.grad[i] - dot);
  });
}

// Mean negative log softmax probability of the true class over the batch.
inline Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits->shape.size() != 2)
    throw std::invalid_argument("cross_entropy_loss: logits must be [batch x classes], got " +
                                shape_str(logits->shape));
  const int b = logits->shape[0], c = logits->shape[1];
  if (static_cast<std::size_t>(b) != labels.size())
    throw std::invalid_argument("cross_entropy_loss: batch " + std::to_string(b) + " vs " +
                                std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y < 0 || y >= c)
      throw std::invalid_argument("cross_entropy_loss: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(c) + ")");
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* row = logits->value.data() + static_cast<std::size_t>(i) * c;
    double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    loss += std::log(z) + mx - row[labels[i]];
  }
  loss /= b;
  return detail::result({1}, {loss}, {logits}, [logits, labels, b, c](TensorNode& o) {
    logits->ensure_grad();
    for (int i = 0; i < b; ++i) {
      const double* row = logits->value.data() + static_cast<std::size_t>(i) * c;
      double mx = *std::max_element(row, row + c);
      double z = 0.0;
      for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
      for (int j = 0; j < c; ++j) {
        double p = std::exp(row[j] - mx) / z;
        double g = (p - (labels[i] == j ? 1.0 : 0.0)) / b;
        logits->grad[static_cast<std::size_t>(i) * c + j] += o.grad[0] * g;
      }
    }
  });
}

// --- backward ----------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Grads accumulate into every reachable
// node; leaves the caller never zeroed start from zero via ensure_grad.
inline void backward(const Tensor& loss) {
  if (!loss->is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
  // Iterative post-order topological sort.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (TensorNode* n : order) n->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

}  // namespace enos

#endif  // ENOS_TENSOR_HPP
