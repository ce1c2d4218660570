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

#ifndef ENOS_NN_HPP
#define ENOS_NN_HPP

#include "enos/tensor.hpp"

namespace enos {

// Geometry of a 2-D sliding window over [B, C, H, W] feature maps.
struct ConvGeom {
  int in_ch = 0, in_h = 0, in_w = 0;
  int kernel = 1, stride = 1, pad = 0;  // square kernel, symmetric zero padding
  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  int patch_len() const { return in_ch * kernel * kernel; }
  void validate() const {
    if (kernel < 1 || stride < 1 || pad < 0 || in_ch < 1 || in_h < 1 || in_w < 1 ||
        in_h + 2 * pad < kernel || in_w + 2 * pad < kernel)
      throw std::invalid_argument("invalid conv geometry: k=" + std::to_string(kernel) +
                                  " s=" + std::to_string(stride) + " p=" + std::to_string(pad) +
                                  " on " + std::to_string(in_ch) + "x" + std::to_string(in_h) +
                                  "x" + std::to_string(in_w));
  }
};

// [B, C, H, W] -> [B*OH*OW, C*K*K] patch matrix (zero padded). Backward scatters.
inline Tensor im2col(const Tensor& x, const ConvGeom& g) {
  g.validate();
  if (x->shape.size() != 4 || x->shape[1] != g.in_ch || x->shape[2] != g.in_h ||
      x->shape[3] != g.in_w)
    throw std::invalid_argument("im2col: input " + shape_str(x->shape) + " does not match geometry");
  const int b = x->shape[0], oh = g.out_h(), ow = g.out_w(), pl = g.patch_len();
  const std::size_t chw = static_cast<std::size_t>(g.in_ch) * g.in_h * g.in_w;
  std::vector<double> out(static_cast<std::size_t>(b) * oh * ow * pl, 0.0);
  // Map each patch element to its source index (-1 when in the zero pad).
  std::vector<std::vector<long>> src(static_cast<std::size_t>(oh) * ow,
                                     std::vector<long>(pl, -1));
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      auto& row = src[static_cast<std::size_t>(oy) * ow + ox];
      int p = 0;
      for (int c = 0; c < g.in_ch; ++c)
        for (int ky = 0; ky < g.kernel; ++ky)
          for (int kx = 0; kx < g.kernel; ++kx, ++p) {
            int iy = oy * g.stride + ky - g.pad;
            int ix = ox * g.stride + kx - g.pad;
            if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w)
              row[p] = (static_cast<long>(c) * g.in_h + iy) * g.in_w + ix;
          }
    }
  for (int n = 0; n < b; ++n) {
    const double* in = x->value.data() + n * chw;
    double* orow = out.data() + static_cast<std::size_t>(n) * oh * ow * pl;
    for (std::size_t w = 0; w < src.size(); ++w)
      for (int p = 0; p < pl; ++p)
        if (src[w][p] >= 0) orow[w * pl + p] = in[src[w][p]];
  }
  return detail::result({b * oh * ow, pl}, std::move(out), {x},
                        [x, src = std::move(src), b, pl, chw](TensorNode& o) {
                          x->ensure_grad();
                          for (int n = 0; n < b; ++n) {
                            double* gin = x->grad.data() + n * chw;
                            const double* go =
                                o.grad.data() + static_cast<std::size_t>(n) * src.size() * pl;
                            for (std::size_t w = 0; w < src.size(); ++w)
                              for (int p = 0; p < pl; ++p)
                                if (src[w][p] >= 0) gin[src[w][p]] += go[w * pl + p];
                          }
                        });
}

// [B*OH*OW, OC] -> [B, OC, OH, OW]
inline Tensor rows_to_maps(const Tensor& rows, int b, int oc, int oh, int ow) {
  if (rows->shape.size() != 2 || rows->shape[0] != b * oh * ow || rows->shape[1] != oc)
    throw std::invalid_argument("rows_to_maps: bad input " + shape_str(rows->shape));
  std::vector<double> out(rows->size());
  auto src_index = [=](std::size_t dst) {
    int n = static_cast<int>(dst / (static_cast<std::size_t>(oc) * oh * ow));
    std::size_t r = dst % (static_cast<std::size_t>(oc) * oh * ow);
    int c = static_cast<int>(r / (static_cast<std::size_t>(oh) * ow));
    int w = static_cast<int>(r % (static_cast<std::size_t>(oh) * ow));
    return (static_cast<std::size_t>(n) * oh * ow + w) * oc + c;
  };
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rows->value[src_index(i)];
  return detail::result({b, oc, oh, ow}, std::move(out), {rows}, [rows, src_index](TensorNode& o) {
    rows->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) rows->grad[src_index(i)] += o.grad[i];
  });
}

inline Tensor maxpool(const Tensor& x, int kernel, int stride) {
  if (x->shape.size() != 4) throw std::invalid_argument("maxpool: expected [B,C,H,W]");
  const int b = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  if (kernel < 1 || stride < 1 || h < kernel || w < kernel)
    throw std::invalid_argument("maxpool: bad geometry on " + shape_str(x->shape));
  const int oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(b) * c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  std::size_t o = 0;
  for (int n = 0; n < b; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(n) * c + ch) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          std::size_t best = base + static_cast<std::size_t>(oy * stride) * w + ox * stride;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
              std::size_t idx = base + static_cast<std::size_t>(oy * stride + ky) * w +
                                (ox * stride + kx);
              if (x->value[idx] > x->value[best]) best = idx;
            }
          out[o] = x->value[best];
          (*argmax)[o] = best;
        }
    }
  return detail::result({b, c, oh, ow}, std::move(out), {x}, [x, argmax](TensorNode& o) {
    x->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) x->grad[(*argmax)[i]] += o.grad[i];
  });
}

inline Tensor avgpool(const Tensor& x, int kernel, int stride) {
  if (x->shape.size() != 4) throw std::invalid_argument("avgpool: expected [B,C,H,W]");
  const int b = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  if (kernel < 1 || stride < 1 || h < kernel || w < kernel)
    throw std::invalid_argument("avgpool: bad geometry on " + shape_str(x->shape));
  const int oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
  const double inv = 1.0 / (kernel * kernel);
  std::vector<double> out(static_cast<std::size_t>(b) * c * oh * ow, 0.0);
  std::size_t o = 0;
  for (int n = 0; n < b; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(n) * c + ch) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++o) {
          double s = 0.0;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx)
              s += x->value[base + static_cast<std::size_t>(oy * stride + ky) * w +
                            (ox * stride + kx)];
          out[o] = s * inv;
        }
    }
  return detail::result({b, c, oh, ow}, std::move(out), {x},
                        [x, b, c, h, w, oh, ow, kernel, stride, inv](TensorNode& o) {
                          x->ensure_grad();
                          std::size_t i = 0;
                          for (int n = 0; n < b; ++n)
                            for (int ch = 0; ch < c; ++ch) {
                              const std::size_t base = (static_cast<std::size_t>(n) * c + ch) * h * w;
                              for (int oy = 0; oy < oh; ++oy)
                                for (int ox = 0; ox < ow; ++ox, ++i)
                                  for (int ky = 0; ky < kernel; ++ky)
                                    for (int kx = 0; kx < kernel; ++kx)
                                      x->grad[base + static_cast<std::size_t>(oy * stride + ky) * w +
                                              (ox * stride + kx)] += o.grad[i] * inv;
                            }
                        });
}

// [B, C, H, W] -> [B, C], mean over spatial positions.
inline Tensor global_avgpool(const Tensor& x) {
  if (x->shape.size() != 4) throw std::invalid_argument("global_avgpool: expected [B,C,H,W]");
  const int b = x->shape[0], c = x->shape[1];
  const std::size_t hw = static_cast<std::size_t>(x->shape[2]) * x->shape[3];
  const double inv = 1.0 / static_cast<double>(hw);
  std::vector<double> out(static_cast<std::size_t>(b) * c, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* p = x->value.data() + i * hw;
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += p[j];
    out[i] = s * inv;
  }
  return detail::result({b, c}, std::move(out), {x}, [x, hw, inv](TensorNode& o) {
    x->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      double g = o.grad[i] * inv;
      double* p = x->grad.data() + i * hw;
      for (std::size_t j = 0; j < hw; ++j) p[j] += g;
    }
  });
}

// Concatenate along the channel axis; all inputs [B, Ci, H, W] with equal B/H/W.
inline Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int b = xs[0]->shape[0], h = xs[0]->shape[2], w = xs[0]->shape[3];
  int ctot = 0;
  for (const auto& x : xs) {
    if (x->shape.size() != 4 || x->shape[0] != b || x->shape[2] != h || x->shape[3] != w)
      throw std::invalid_argument("concat_channels: mismatched input " + shape_str(x->shape));
    ctot += x->shape[1];
  }
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<double> out(static_cast<std::size_t>(b) * ctot * hw);
  std::size_t coff = 0;
  for (const auto& x : xs) {
    const std::size_t xc = static_cast<std::size_t>(x->shape[1]);
    for (int n = 0; n < b; ++n)
      std::copy_n(x->value.data() + n * xc * hw, xc * hw,
                  out.data() + (static_cast<std::size_t>(n) * ctot + coff) * hw);
    coff += xc;
  }
  return detail::result({b, ctot, h, w}, std::move(out),
                        std::vector<Tensor>(xs.begin(), xs.end()), [xs, b, ctot, hw](TensorNode& o) {
                          std::size_t coff = 0;
                          for (const auto& x : xs) {
                            x->ensure_grad();
                            const std::size_t xc = static_cast<std::size_t>(x->shape[1]);
                            for (int n = 0; n < b; ++n) {
                              const double* g =
                                  o.grad.data() + (static_cast<std::size_t>(n) * ctot + coff) * hw;
                              double* xg = x->grad.data() + n * xc * hw;
                              for (std::size_t i = 0; i < xc * hw; ++i) xg[i] += g[i];
                            }
                            coff += xc;
                          }
                        });
}

inline Tensor flatten(const Tensor& x) {
  if (x->shape.empty()) throw std::invalid_argument("flatten: scalar input");
  int b = x->shape[0];
  int rest = static_cast<int>(x->size()) / b;
  return reshape(x, {b, rest});
}

}  // namespace enos

#endif  // ENOS_NN_HPP
