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

#ifndef ENOS_OPERATORS_HPP
#define ENOS_OPERATORS_HPP

#include <cstdint>
#include <optional>

#include "enos/nn.hpp"
#include "enos/tensor.hpp"

namespace enos {

// The three correlation operators: full-precision dot product, multiplication-free
// sign/abs form, and binary-weight accumulation.
enum class OperatorKind { Typical, MultiplicationFree, Binary };

inline const char* op_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::Typical: return "T";
    case OperatorKind::MultiplicationFree: return "MF";
    case OperatorKind::Binary: return "B";
  }
  return "?";
}

inline std::optional<OperatorKind> op_from_name(const std::string& s) {
  if (s == "T" || s == "Typical") return OperatorKind::Typical;
  if (s == "MF" || s == "MultiplicationFree" || s == "Multiplication-Free")
    return OperatorKind::MultiplicationFree;
  if (s == "B" || s == "Binary") return OperatorKind::Binary;
  return std::nullopt;
}

namespace detail {
inline void check_equal_len(const Tensor& x, const Tensor& w, const char* op) {
  if (x->size() != w->size())
    throw std::invalid_argument(std::string(op) + ": length mismatch " +
                                std::to_string(x->size()) + " vs " + std::to_string(w->size()));
}
}  // namespace detail

// f_T(x, w) = sum x_i * w_i
inline Tensor op_typical(const Tensor& x, const Tensor& w) {
  detail::check_equal_len(x, w, "op_typical");
  return sum(mul(x, w));
}

// f_M(x, w) = sum sign(x_i)*abs(w_i) + sign(w_i)*abs(x_i), surrogate gradients.
inline Tensor op_mulfree(const Tensor& x, const Tensor& w, double k = 10.0) {
  detail::check_equal_len(x, w, "op_mulfree");
  Tensor a = mul(surrogate_sign(x, k), surrogate_abs(w, k));
  Tensor b = mul(surrogate_sign(w, k), surrogate_abs(x, k));
  return sum(add(a, b));
}

// f_B(x, w) = sum x_i * binarize(w_i), STE through binarize.
inline Tensor op_binary(const Tensor& x, const Tensor& w) {
  detail::check_equal_len(x, w, "op_binary");
  return sum(mul(x, ste_binarize(w)));
}

// Batched form over a row matrix of input windows [R x K] against filter rows
// [OC x K]; returns [R x OC]. This is what the dense/conv paths run on.
inline Tensor correlate_rows(OperatorKind kind, const Tensor& rows, const Tensor& filters,
                             double steepness = 10.0) {
  if (rows->shape.size() != 2 || filters->shape.size() != 2 ||
      rows->shape[1] != filters->shape[1])
    throw std::invalid_argument("correlate_rows: " + shape_str(rows->shape) + " vs filters " +
                                shape_str(filters->shape));
  // matmul wants [K x OC]; build the transpose as a grad-tracking op.
  auto transpose = [](const Tensor& m) {
    const int r = m->shape[0], c = m->shape[1];
    std::vector<double> out(m->size());
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        out[static_cast<std::size_t>(j) * r + i] = m->value[static_cast<std::size_t>(i) * c + j];
    return detail::result({c, r}, std::move(out), {m}, [m, r, c](TensorNode& o) {
      m->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          m->grad[static_cast<std::size_t>(i) * c + j] +=
              o.grad[static_cast<std::size_t>(j) * r + i];
    });
  };
  switch (kind) {
    case OperatorKind::Typical:
      return matmul(rows, transpose(filters));
    case OperatorKind::MultiplicationFree: {
      Tensor a = matmul(surrogate_sign(rows, steepness), transpose(surrogate_abs(filters, steepness)));
      Tensor b = matmul(surrogate_abs(rows, steepness), transpose(surrogate_sign(filters, steepness)));
      return add(a, b);
    }
    case OperatorKind::Binary:
      return matmul(rows, transpose(ste_binarize(filters)));
  }
  throw std::logic_error("correlate_rows: unknown operator");
}

enum class LayerKind2 { Dense, Conv2d };

// Apply one correlation operator as a full layer. Dense: input [B x F_in],
// weights [F_out x F_in]. Conv2d: input [B, C, H, W], weights [OC x C*K*K].
// Bias stays full precision and is added after the correlation.
inline Tensor apply_operator(OperatorKind kind, LayerKind2 layer, const Tensor& input,
                             const Tensor& weights, const Tensor& bias,
                             const ConvGeom* geom = nullptr, double steepness = 10.0) {
  if (layer == LayerKind2::Dense) {
    if (input->shape.size() != 2 || weights->shape.size() != 2 ||
        input->shape[1] != weights->shape[1])
      throw std::invalid_argument("apply_operator dense: input " + shape_str(input->shape) +
                                  " vs weights " + shape_str(weights->shape));
    Tensor y = correlate_rows(kind, input, weights, steepness);
    return bias ? add_rowvec(y, bias) : y;
  }
  if (!geom) throw std::invalid_argument("apply_operator conv2d: missing geometry");
  if (weights->shape.size() != 2 || weights->shape[1] != geom->patch_len())
    throw std::invalid_argument("apply_operator conv2d: weights " + shape_str(weights->shape) +
                                " vs patch length " + std::to_string(geom->patch_len()));
  const int b = input->shape[0], oc = weights->shape[0];
  Tensor patches = im2col(input, *geom);
  Tensor y = correlate_rows(kind, patches, weights, steepness);
  if (bias) y = add_rowvec(y, bias);
  return rows_to_maps(y, b, oc, geom->out_h(), geom->out_w());
}

// --- fixed-point quantization -------------------------------------------------

// Symmetric per-tensor quantization: scale = max|t| / (2^(bits-1) - 1),
// integers rounded half away from zero and clamped.
struct QuantSpec {
  int bits = 8;
  double scale = 1.0;
};

struct Quantized {
  std::vector<std::int32_t> ints;
  QuantSpec spec;
};

inline Quantized quantize(const std::vector<double>& v, int bits) {
  if (bits < 2 || bits > 31) throw std::invalid_argument("quantize: bits out of range");
  const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
  double amax = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("quantize: non-finite value");
    amax = std::max(amax, std::fabs(x));
  }
  QuantSpec spec{bits, amax > 0.0 ? amax / qmax : 1.0};
  Quantized q{std::vector<std::int32_t>(v.size()), spec};
  for (std::size_t i = 0; i < v.size(); ++i) {
    double r = v[i] / spec.scale;
    double rounded = r >= 0.0 ? std::floor(r + 0.5) : std::ceil(r - 0.5);
    rounded = std::clamp(rounded, -qmax, qmax);
    q.ints[i] = static_cast<std::int32_t>(rounded);
  }
  return q;
}

inline std::vector<double> dequantize(const Quantized& q) {
  std::vector<double> v(q.ints.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = q.ints[i] * q.spec.scale;
  return v;
}

// Quantize-then-dequantize round trip on raw values (inference simulation).
inline std::vector<double> fake_quantize(const std::vector<double>& v, int bits) {
  return dequantize(quantize(v, bits));
}

}  // namespace enos

#endif  // ENOS_OPERATORS_HPP
