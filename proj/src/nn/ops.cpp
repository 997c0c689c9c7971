/* Copyright 2026 The CIDA Authors. All Rights Reserved.

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
#include "cida/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cida::nn {

namespace {

using Node = detail::Node;
using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using VecMap = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>;

Tensor make_op(Shape shape, std::vector<Real> value, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of input i, or nullptr if it does not take gradients.
std::vector<Real>* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

template <class Fwd, class Dfdx>
Tensor unary(const Tensor& x, Fwd fwd, Dfdx dfdx) {
  auto xs = x.values();
  std::vector<Real> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  return make_op(x.shape(), std::move(out), {x}, [dfdx](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += self.grad[i] * dfdx(xv[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& x, Real factor) {
  return unary(x, [factor](Real v) { return v * factor; },
               [factor](Real, Real) { return factor; });
}

Tensor add_scalar(const Tensor& x, Real offset) {
  return unary(x, [offset](Real v) { return v + offset; }, [](Real, Real) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](Real v) { return v * v; }, [](Real v, Real) { return 2.0 * v; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](Real v) { return v > 0.0 ? v : 0.0; },
               [](Real v, Real) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](Real v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        Real e = std::exp(v);
        return e / (1.0 + e);
      },
      [](Real, Real y) { return y * (1.0 - y); });
}

Tensor smooth_l1(const Tensor& x, Real beta) {
  return unary(
      x,
      [beta](Real v) {
        Real a = std::abs(v);
        return a < beta ? 0.5 * v * v / beta : a - 0.5 * beta;
      },
      [beta](Real v, Real) {
        if (std::abs(v) < beta) return v / beta;
        return v > 0.0 ? 1.0 : -1.0;
      });
}

Tensor mul_channels(const Tensor& x, const Tensor& mask) {
  require_rank(x, 3, "mul_channels");
  require_rank(mask, 2, "mul_channels");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (mask.dim(0) != x.dim(1) || mask.dim(1) != x.dim(2)) {
    throw ShapeError("mul_channels: spatial extents " + shape_str(mask.shape()) +
                     " do not match " + shape_str(x.shape()));
  }
  std::vector<Real> out(x.numel());
  auto xv = x.values();
  auto mv = mask.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] = xv[ch * hw + i] * mv[i];
  }
  return make_op(x.shape(), std::move(out), {x, mask}, [c, hw](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& mv = self.inputs[1]->value;
    auto* gx = grad_of(self, 0);
    auto* gm = grad_of(self, 1);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < hw; ++i) {
        Real g = self.grad[ch * hw + i];
        if (gx) (*gx)[ch * hw + i] += g * mv[i];
        if (gm) (*gm)[i] += g * xv[ch * hw + i];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  Real s = 0.0;
  for (Real v : x.values()) s += v;
  return make_op({1}, {s}, {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (auto& v : *g) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<Real>(x.numel())); }

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  std::vector<Real> out(c, 0.0);
  auto xv = x.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    Real s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += xv[ch * hw + i];
    out[ch] = s / static_cast<Real>(hw);
  }
  return make_op({c}, std::move(out), {x}, [c, hw](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        Real gv = self.grad[ch] / static_cast<Real>(hw);
        for (std::size_t i = 0; i < hw; ++i) (*g)[ch * hw + i] += gv;
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<Real> out(x.values().begin(), x.values().end());
  return make_op(std::move(shape), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor gather(const Tensor& x, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ShapeError("gather: empty index list");
  std::vector<Real> out(indices.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.size()) throw ShapeError("gather: index out of range");
    out[i] = xv[indices[i]];
  }
  return make_op({indices.size()}, std::move(out), {x}, [indices](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < indices.size(); ++i) (*g)[indices[i]] += self.grad[i];
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  require_rank(x, 2, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t d = x.dim(1);
  std::vector<Real> out(rows.size() * d);
  auto xv = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw ShapeError("gather_rows: row out of range");
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return make_op({rows.size(), d}, std::move(out), {x}, [rows, d](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) (*g)[rows[i] * d + j] += self.grad[i * d + j];
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != ref.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) {
        throw ShapeError("concat: extent mismatch " + shape_str(s) + " vs " + shape_str(ref));
      }
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  std::vector<Real> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    const std::size_t block = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  out.begin() + static_cast<std::ptrdiff_t>(o * total * inner + offset * inner));
    }
    offset += extents[k];
  }
  return make_op(std::move(out_shape), std::move(out), parts,
                 [extents, outer, inner, total](Node& self) {
                   std::size_t offset = 0;
                   for (std::size_t k = 0; k < extents.size(); ++k) {
                     const std::size_t block = extents[k] * inner;
                     if (auto* g = grad_of(self, k)) {
                       for (std::size_t o = 0; o < outer; ++o) {
                         const Real* src = self.grad.data() + o * total * inner + offset * inner;
                         Real* dst = g->data() + o * block;
                         for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                       }
                     }
                     offset += extents[k];
                   }
                 });
}

Tensor repeat_rows(const Tensor& v, std::size_t n) {
  require_rank(v, 1, "repeat_rows");
  if (n == 0) throw ShapeError("repeat_rows: zero rows");
  const std::size_t d = v.dim(0);
  std::vector<Real> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy(v.values().begin(), v.values().end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  return make_op({n, d}, std::move(out), {v}, [n, d](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) (*g)[j] += self.grad[i * d + j];
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != cin) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  if (stride == 0 || h + 2 * padding < kh || w + 2 * padding < kw) {
    throw ShapeError("conv2d: kernel does not fit input " + shape_str(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()));
  }
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kw) / stride + 1;
  const std::size_t k = cin * kh * kw, p = ho * wo;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && padding == 0;

  auto cols = std::make_shared<std::vector<Real>>();
  const Real* col_data = x.values().data();
  if (!pointwise) {
    cols->assign(k * p, 0.0);
    auto xv = x.values();
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          Real* row = cols->data() + ((c * kh + i) * kw + j) * p;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + i) -
                            static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * stride + j) -
                              static_cast<std::ptrdiff_t>(padding);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              row[oy * wo + ox] = xv[(c * h + static_cast<std::size_t>(iy)) * w +
                                     static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
    col_data = cols->data();
  }

  std::vector<Real> out(cout * p);
  MapR y(out.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(p));
  CMapR wm(weight.values().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(k));
  CMapR cm(col_data, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  y.noalias() = wm * cm;
  if (bias.defined()) {
    for (std::size_t o = 0; o < cout; ++o) y.row(static_cast<Eigen::Index>(o)).array() += bias[o];
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_op(
      {cout, ho, wo}, std::move(out), std::move(inputs),
      [=](Node& self) {
        const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
        CMapR gy(self.grad.data(), ei(cout), ei(p));
        const Real* cd = pointwise ? self.inputs[0]->value.data() : cols->data();
        CMapR cmat(cd, ei(k), ei(p));
        if (auto* gw = grad_of(self, 1)) {
          MapR gwm(gw->data(), ei(cout), ei(k));
          gwm.noalias() += gy * cmat.transpose();
        }
        if (self.inputs.size() > 2) {
          if (auto* gb = grad_of(self, 2)) {
            for (std::size_t o = 0; o < cout; ++o) (*gb)[o] += gy.row(ei(o)).sum();
          }
        }
        if (auto* gx = grad_of(self, 0)) {
          CMapR wmat(self.inputs[1]->value.data(), ei(cout), ei(k));
          if (pointwise) {
            MapR gxm(gx->data(), ei(k), ei(p));
            gxm.noalias() += wmat.transpose() * gy;
            return;
          }
          MatR gcols = wmat.transpose() * gy;
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t i = 0; i < kh; ++i) {
              for (std::size_t j = 0; j < kw; ++j) {
                const Real* row = gcols.data() + ((c * kh + i) * kw + j) * p;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const auto iy = static_cast<std::ptrdiff_t>(oy * stride + i) -
                                  static_cast<std::ptrdiff_t>(padding);
                  if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * stride + j) -
                                    static_cast<std::ptrdiff_t>(padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                    (*gx)[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                        row[oy * wo + ox];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t n = x.dim(0), in = x.dim(1), outd = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outd)) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()));
  }
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  std::vector<Real> out(n * outd);
  MapR y(out.data(), ei(n), ei(outd));
  CMapR xm(x.values().data(), ei(n), ei(in));
  CMapR wm(weight.values().data(), ei(outd), ei(in));
  y.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < outd; ++o) out[r * outd + o] += bias[o];
    }
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_op({n, outd}, std::move(out), std::move(inputs), [=](Node& self) {
    CMapR gy(self.grad.data(), ei(n), ei(outd));
    if (auto* gx = grad_of(self, 0)) {
      CMapR wmat(self.inputs[1]->value.data(), ei(outd), ei(in));
      MapR(gx->data(), ei(n), ei(in)).noalias() += gy * wmat;
    }
    if (auto* gw = grad_of(self, 1)) {
      CMapR xmat(self.inputs[0]->value.data(), ei(n), ei(in));
      MapR(gw->data(), ei(outd), ei(in)).noalias() += gy.transpose() * xmat;
    }
    if (self.inputs.size() > 2) {
      if (auto* gb = grad_of(self, 2)) {
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t o = 0; o < outd; ++o) (*gb)[o] += self.grad[r * outd + o];
        }
      }
    }
  });
}

namespace {

struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<Real> frac;
};

AxisTaps resize_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  const Real ratio = static_cast<Real>(in) / static_cast<Real>(out);
  for (std::size_t o = 0; o < out; ++o) {
    Real src = (static_cast<Real>(o) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    t.lo.push_back(lo);
    t.hi.push_back(hi);
    t.frac.push_back(hi == lo ? 0.0 : src - static_cast<Real>(lo));
  }
  return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: zero output extent");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto ty = std::make_shared<AxisTaps>(resize_taps(h, out_h));
  auto tx = std::make_shared<AxisTaps>(resize_taps(w, out_w));
  std::vector<Real> out(c * out_h * out_w);
  auto xv = x.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Real* src = xv.data() + ch * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Real fy = ty->frac[oy];
      const Real* r0 = src + ty->lo[oy] * w;
      const Real* r1 = src + ty->hi[oy] * w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Real fx = tx->frac[ox];
        const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
        const Real top = r0[x0] * (1.0 - fx) + r0[x1] * fx;
        const Real bot = r1[x0] * (1.0 - fx) + r1[x1] * fx;
        out[(ch * out_h + oy) * out_w + ox] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return make_op({c, out_h, out_w}, std::move(out), {x}, [=](Node& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t ch = 0; ch < c; ++ch) {
      Real* dst = gx->data() + ch * h * w;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const Real fy = ty->frac[oy];
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const Real fx = tx->frac[ox];
          const Real g = self.grad[(ch * out_h + oy) * out_w + ox];
          dst[ty->lo[oy] * w + tx->lo[ox]] += g * (1.0 - fy) * (1.0 - fx);
          dst[ty->lo[oy] * w + tx->hi[ox]] += g * (1.0 - fy) * fx;
          dst[ty->hi[oy] * w + tx->lo[ox]] += g * fy * (1.0 - fx);
          dst[ty->hi[oy] * w + tx->hi[ox]] += g * fy * fx;
        }
      }
    }
  });
}

Tensor gradient_reversal(const Tensor& x, const GrlConfig& cfg) {
  if (!(cfg.coefficient >= 0.0)) throw ContractError("GRL coefficient must be nonnegative");
  const Real coeff = cfg.coefficient;
  std::vector<Real> out(x.values().begin(), x.values().end());
  return make_op(x.shape(), std::move(out), {x}, [coeff](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= coeff * self.grad[i];
    }
  });
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<Real> out(n * k);
  auto lv = logits.values();
  for (std::size_t r = 0; r < n; ++r) {
    const Real* z = lv.data() + r * k;
    const Real m = *std::max_element(z, z + k);
    Real s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (out[r * k + j] = std::exp(z[j] - m));
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] /= s;
  }
  return make_op({n, k}, std::move(out), {logits}, [n, k](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < n; ++r) {
      const Real* y = self.value.data() + r * k;
      const Real* gy = self.grad.data() + r * k;
      Real dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < k; ++j) (*g)[r * k + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ShapeError("cross_entropy: label count mismatch");
  auto probs = std::make_shared<std::vector<Real>>(n * k);
  auto lv = logits.values();
  Real loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw ContractError("cross_entropy: label out of range");
    }
    const Real* z = lv.data() + r * k;
    const Real m = *std::max_element(z, z + k);
    Real s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - m);
    const Real lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(z[j] - lse);
    loss += lse - z[static_cast<std::size_t>(labels[r])];
  }
  loss /= static_cast<Real>(n);
  return make_op({1}, {loss}, {logits}, [=](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    const Real gs = self.grad[0] / static_cast<Real>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < k; ++j) {
        Real d = (*probs)[r * k + j] - (static_cast<int>(j) == labels[r] ? 1.0 : 0.0);
        (*g)[r * k + j] += gs * d;
      }
    }
  });
}

Tensor binary_cross_entropy(const Tensor& prob, const std::vector<Real>& targets, Real eps) {
  const std::size_t n = prob.numel();
  if (targets.size() != n) throw ShapeError("binary_cross_entropy: target count mismatch");
  auto pv = prob.values();
  Real loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real p = pv[i];
    if (!(p >= -eps && p <= 1.0 + eps)) {
      throw NumericError("binary_cross_entropy: probability outside [0,1]");
    }
    const Real pc = std::clamp(p, eps, 1.0 - eps);
    loss -= targets[i] * std::log(pc) + (1.0 - targets[i]) * std::log(1.0 - pc);
  }
  loss /= static_cast<Real>(n);
  return make_op({1}, {loss}, {prob}, [targets, eps, n](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    const auto& pv = self.inputs[0]->value;
    const Real gs = self.grad[0] / static_cast<Real>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Real p = pv[i];
      if (p < eps || p > 1.0 - eps) continue;
      (*g)[i] += gs * (-targets[i] / p + (1.0 - targets[i]) / (1.0 - p));
    }
  });
}

Tensor binary_cross_entropy(const Tensor& prob, Real target, Real eps) {
  return binary_cross_entropy(prob, std::vector<Real>(prob.numel(), target), eps);
}

Tensor pixel_entropy(const Tensor& prob, Real eps, bool full_binary) {
  for (Real p : prob.values()) {
    if (!(p >= -eps && p <= 1.0 + eps)) {
      throw std::domain_error("pixel_entropy: probability outside [0,1]");
    }
  }
  return unary(
      prob,
      [eps, full_binary](Real p) {
        const Real pc = std::clamp(p, eps, 1.0);
        Real h = -pc * std::log(pc);
        if (full_binary) {
          const Real q = std::clamp(1.0 - p, eps, 1.0);
          h -= q * std::log(q);
        }
        return h;
      },
      [eps, full_binary](Real p, Real) {
        Real d = 0.0;
        if (p >= eps && p <= 1.0) d -= std::log(p) + 1.0;
        if (full_binary) {
          const Real q = 1.0 - p;
          if (q >= eps && q <= 1.0) d += std::log(q) + 1.0;
        }
        return d;
      });
}

Tensor roi_align(const Tensor& feature, const std::vector<std::array<Real, 4>>& boxes,
                 const RoiAlignConfig& cfg) {
  require_rank(feature, 3, "roi_align");
  if (boxes.empty()) throw ShapeError("roi_align: no boxes");
  if (cfg.output_size == 0 || cfg.sampling_ratio == 0) {
    throw ShapeError("roi_align: zero output or sampling size");
  }
  const std::size_t c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  const std::size_t s = cfg.output_size, sr = cfg.sampling_ratio;
  const std::size_t bins = s * s;
  const std::size_t taps_per_bin = 4 * sr * sr;

  // Taps shared by all channels: (flat spatial index, weight) per bin.
  struct Tap {
    std::size_t pos;
    Real weight;
  };
  auto taps = std::make_shared<std::vector<Tap>>(boxes.size() * bins * taps_per_bin,
                                                 Tap{0, 0.0});
  const Real inv_count = 1.0 / static_cast<Real>(sr * sr);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const auto& box = boxes[b];
    const Real x0 = box[0] * cfg.spatial_scale - 0.5;
    const Real y0 = box[1] * cfg.spatial_scale - 0.5;
    const Real bw = (box[2] - box[0]) * cfg.spatial_scale / static_cast<Real>(s);
    const Real bh = (box[3] - box[1]) * cfg.spatial_scale / static_cast<Real>(s);
    for (std::size_t by = 0; by < s; ++by) {
      for (std::size_t bx = 0; bx < s; ++bx) {
        Tap* t = taps->data() + ((b * bins) + by * s + bx) * taps_per_bin;
        for (std::size_t iy = 0; iy < sr; ++iy) {
          for (std::size_t ix = 0; ix < sr; ++ix, t += 4) {
            Real y = y0 + bh * (static_cast<Real>(by) + (static_cast<Real>(iy) + 0.5) / static_cast<Real>(sr));
            Real x = x0 + bw * (static_cast<Real>(bx) + (static_cast<Real>(ix) + 0.5) / static_cast<Real>(sr));
            if (y < -1.0 || y > static_cast<Real>(h) || x < -1.0 || x > static_cast<Real>(w)) continue;
            y = std::max(y, 0.0);
            x = std::max(x, 0.0);
            auto ylo = static_cast<std::size_t>(y);
            auto xlo = static_cast<std::size_t>(x);
            std::size_t yhi = ylo + 1, xhi = xlo + 1;
            if (ylo >= h - 1) {
              ylo = yhi = h - 1;
              y = static_cast<Real>(ylo);
            }
            if (xlo >= w - 1) {
              xlo = xhi = w - 1;
              x = static_cast<Real>(xlo);
            }
            const Real ly = y - static_cast<Real>(ylo), lx = x - static_cast<Real>(xlo);
            const Real hy = 1.0 - ly, hx = 1.0 - lx;
            t[0] = {ylo * w + xlo, hy * hx * inv_count};
            t[1] = {ylo * w + xhi, hy * lx * inv_count};
            t[2] = {yhi * w + xlo, ly * hx * inv_count};
            t[3] = {yhi * w + xhi, ly * lx * inv_count};
          }
        }
      }
    }
  }

  const std::size_t n = boxes.size();
  std::vector<Real> out(n * c * bins, 0.0);
  auto fv = feature.values();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Real* plane = fv.data() + ch * h * w;
      Real* dst = out.data() + (b * c + ch) * bins;
      for (std::size_t k = 0; k < bins; ++k) {
        const Tap* t = taps->data() + (b * bins + k) * taps_per_bin;
        Real acc = 0.0;
        for (std::size_t q = 0; q < taps_per_bin; ++q) acc += plane[t[q].pos] * t[q].weight;
        dst[k] = acc;
      }
    }
  }
  return make_op({n, c, s, s}, std::move(out), {feature}, [=](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        Real* plane = g->data() + ch * h * w;
        const Real* src = self.grad.data() + (b * c + ch) * bins;
        for (std::size_t k = 0; k < bins; ++k) {
          const Tap* t = taps->data() + (b * bins + k) * taps_per_bin;
          for (std::size_t q = 0; q < taps_per_bin; ++q) plane[t[q].pos] += src[k] * t[q].weight;
        }
      }
    }
  });
}

}  // namespace cida::nn
