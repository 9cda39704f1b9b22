// Copyright 2026 The gsp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gsp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gsp/kernels.hpp"

namespace gsp {

namespace {

using Index = std::ptrdiff_t;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Gradient slot of `t` when it participates in differentiation, else nullptr.
template <typename T>
T* grad_of(const Tensor<T>& t) {
  if (!t.defined() || !t.requires_grad()) return nullptr;
  Tensor<T> handle = t;
  return handle.grad_mut().data();
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

// Offsets into a broadcast operand for every linear index of the full shape.
std::vector<std::size_t> broadcast_offsets(const Shape& full, const Shape& part) {
  const std::size_t r = full.size();
  auto pstride = strides_of(part);
  for (std::size_t i = 0; i < r; ++i) {
    if (part[i] == 1 && full[i] != 1) pstride[i] = 0;
  }
  std::vector<std::size_t> offsets(shape_numel(full));
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    offsets[i] = off;
    for (std::size_t ax = r; ax-- > 0;) {
      if (++idx[ax] < full[ax]) {
        off += pstride[ax];
        break;
      }
      off -= pstride[ax] * (full[ax] - 1);
      idx[ax] = 0;
    }
  }
  return offsets;
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------- structural

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, out, [a, b, out]() mutable {
      const T* g = out.grad().data();
      if (T* ga = grad_of(a)) {
        for (std::size_t i = 0; i < out.numel(); ++i) ga[i] += g[i];
      }
      if (T* gb = grad_of(b)) {
        for (std::size_t i = 0; i < out.numel(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, out, [a, b, out]() mutable {
      const T* g = out.grad().data();
      if (T* ga = grad_of(a)) {
        for (std::size_t i = 0; i < out.numel(); ++i) ga[i] += g[i];
      }
      if (T* gb = grad_of(b)) {
        for (std::size_t i = 0; i < out.numel(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != b.ndim()) {
    throw ShapeError("mul: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  for (std::size_t i = 0; i < a.ndim(); ++i) {
    if (b.dim(i) != 1 && b.dim(i) != a.dim(i)) {
      throw ShapeError("mul: axis " + std::to_string(i) + " of " + shape_str(b.shape()) +
                       " cannot broadcast to " + shape_str(a.shape()));
    }
  }
  Tensor<T> out(a.shape());
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  const bool same = a.shape() == b.shape();
  std::vector<std::size_t> offsets;
  if (same) {
    for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  } else {
    offsets = broadcast_offsets(a.shape(), b.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[offsets[i]];
  }
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, out, [a, b, out, offsets = std::move(offsets), same]() mutable {
      const T* g = out.grad().data();
      const T* va = a.ptr();
      const T* vb = b.ptr();
      const std::size_t n = out.numel();
      if (T* ga = grad_of(a)) {
        if (same) {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * vb[offsets[i]];
        }
      }
      if (T* gb = grad_of(b)) {
        if (same) {
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) gb[offsets[i]] += g[i] * va[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * factor;
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, factor]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < out.numel(); ++i) gx[i] += g[i] * factor;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  Tensor<T> out = Tensor<T>::scalar(s);
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out]() mutable {
      const T g = out.grad()[0];
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.data()) s += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  Tensor<T> out = Tensor<T>::scalar(s * inv);
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, inv]() mutable {
      const T g = out.grad()[0] * inv;
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> permute(Tape<T>& tape, const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.ndim();
  if (axes.size() != r) throw ShapeError("permute: axis list rank mismatch for " + shape_str(x.shape()));
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) throw ShapeError("permute: axes are not a permutation");
    seen[axes[i]] = true;
    out_shape[i] = x.dim(axes[i]);
  }
  const auto in_strides = strides_of(x.shape());
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_strides[axes[i]];

  // Source offset for every output element.
  std::vector<std::size_t> src(x.numel());
  {
    std::vector<std::size_t> idx(r, 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      src[i] = off;
      for (std::size_t ax = r; ax-- > 0;) {
        if (++idx[ax] < out_shape[ax]) {
          off += src_stride[ax];
          break;
        }
        off -= src_stride[ax] * (out_shape[ax] - 1);
        idx[ax] = 0;
      }
    }
  }
  Tensor<T> out(out_shape);
  const T* px = x.ptr();
  T* po = out.ptr();
  for (std::size_t i = 0; i < src.size(); ++i) po[i] = px[src[i]];
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, src = std::move(src)]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.ndim()) throw ShapeError("slice: axis out of range for " + shape_str(x.shape()));
  if (begin >= end || end > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for axis " +
                     std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  Tensor<T> out(out_shape);
  const std::size_t chunk = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.ptr() + (o * s.len + begin) * s.inner, chunk, out.ptr() + o * chunk);
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, s, begin, chunk]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          T* dst = gx + (o * s.len + begin) * s.inner;
          const T* src = g + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != ref.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i != axis && p.dim(i) != ref[i]) {
        throw ShapeError("concat: shapes " + shape_str(ref) + " and " + shape_str(p.shape()) + " differ off axis " +
                         std::to_string(axis));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  Tensor<T> out(out_shape);
  const AxisSplit so = split_at(out_shape, axis);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(p.ptr() + o * chunk, chunk, out.ptr() + (o * so.len + offset) * so.inner);
    }
    offset += p.dim(axis);
  }
  bool any = false;
  for (const auto& p : parts) any = any || tape.should_record({&p});
  if (any) {
    tape.record(parts, out, [parts, out, so, offsets, axis]() mutable {
      const T* g = out.grad().data();
      for (std::size_t k = 0; k < parts.size(); ++k) {
        T* gp = grad_of(parts[k]);
        if (!gp) continue;
        const std::size_t chunk = parts[k].dim(axis) * so.inner;
        for (std::size_t o = 0; o < so.outer; ++o) {
          const T* src = g + (o * so.len + offsets[k]) * so.inner;
          T* dst = gp + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean_axis(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.ndim()) throw ShapeError("mean_axis: axis out of range for " + shape_str(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.ndim(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor<T> out(out_shape);
  const T inv = T(1) / static_cast<T>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      T acc = T(0);
      for (std::size_t l = 0; l < s.len; ++l) acc += x[(o * s.len + l) * s.inner + i];
      out[o * s.inner + i] = acc * inv;
    }
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, s, inv]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t l = 0; l < s.len; ++l) {
            for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.len + l) * s.inner + i] += g[o * s.inner + i] * inv;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- activations

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const T* px = x.ptr();
  T* po = out.ptr();
  for (std::size_t i = 0; i < x.numel(); ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
  if (BranchRecorder::active()) {
    for (std::size_t i = 0; i < x.numel(); ++i) BranchRecorder::note(px[i] > T(0));
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out]() mutable {
      const T* g = out.grad().data();
      const T* px = x.ptr();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < x.numel(); ++i) {
          if (px[i] > T(0)) gx[i] += g[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::tanh(x[i]);
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out]() mutable {
      const T* g = out.grad().data();
      const T* y = out.ptr();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> activation(Tape<T>& tape, const Tensor<T>& x, ActivationKind kind) {
  return kind == ActivationKind::Relu ? relu(tape, x) : tanh(tape, x);
}

template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x) {
  const std::size_t k = x.dim(x.ndim() - 1);
  const std::size_t rows = x.numel() / k;
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.ptr() + r * k;
    T* o = out.ptr() + r * k;
    const T mx = *std::max_element(in, in + k);
    T s = T(0);
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= s;
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, k, rows]() mutable {
      const T* g = out.grad().data();
      const T* y = out.ptr();
      if (T* gx = grad_of(x)) {
        for (std::size_t r = 0; r < rows; ++r) {
          T d = T(0);
          for (std::size_t j = 0; j < k; ++j) d += g[r * k + j] * y[r * k + j];
          for (std::size_t j = 0; j < k; ++j) gx[r * k + j] += y[r * k + j] * (g[r * k + j] - d);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- linear algebra

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.ndim() != 2 || weight.ndim() != 2) {
    throw ShapeError("linear: expected x [N,din] and W [dout,din], got " + shape_str(x.shape()) + " and " +
                     shape_str(weight.shape()));
  }
  const std::size_t n = x.dim(0), din = x.dim(1), dout = weight.dim(0);
  if (weight.dim(1) != din) {
    throw ShapeError("linear: input width " + std::to_string(din) + " does not match weight in-features " +
                     std::to_string(weight.dim(1)));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != dout)) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()) + " does not match out-features " +
                     std::to_string(dout));
  }
  Tensor<T> out(Shape{n, dout});
  kernels::gemm_nt(n, dout, din, x.ptr(), weight.ptr(), out.ptr(), false);
  if (bias.defined()) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < dout; ++j) out[i * dout + j] += bias[j];
    }
  }
  if (tape.should_record({&x, &weight, &bias})) {
    tape.record({x, weight, bias}, out, [x, weight, bias, out, n, din, dout]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) kernels::gemm_nn(n, din, dout, g, weight.ptr(), gx, true);
      if (T* gw = grad_of(weight)) kernels::gemm_tn(dout, din, n, g, x.ptr(), gw, true);
      if (T* gb = grad_of(bias)) {
        for (std::size_t j = 0; j < dout; ++j) {
          T s = T(0);
          for (std::size_t i = 0; i < n; ++i) s += g[i * dout + j];
          gb[j] += s;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul: expected batched [B,M,K] operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t kb = transpose_b ? b.dim(2) : b.dim(1);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  if (kb != k) {
    throw ShapeError("matmul: inner dimensions differ in " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor<T> out(Shape{batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    const T* pa = a.ptr() + i * m * k;
    const T* pb = b.ptr() + i * k * n;
    T* po = out.ptr() + i * m * n;
    if (transpose_b) {
      kernels::gemm_nt(m, n, k, pa, pb, po, false);
    } else {
      kernels::gemm_nn(m, n, k, pa, pb, po, false);
    }
  }
  if (tape.should_record({&a, &b})) {
    tape.record({a, b}, out, [a, b, out, batch, m, k, n, transpose_b]() mutable {
      T* ga = grad_of(a);
      T* gb = grad_of(b);
      for (std::size_t i = 0; i < batch; ++i) {
        const T* g = out.grad().data() + i * m * n;
        const T* pa = a.ptr() + i * m * k;
        const T* pb = b.ptr() + i * k * n;
        if (transpose_b) {
          if (ga) kernels::gemm_nn(m, k, n, g, pb, ga + i * m * k, true);
          if (gb) kernels::gemm_tn(n, k, m, g, pa, gb + i * k * n, true);
        } else {
          if (ga) kernels::gemm_nt(m, k, n, g, pb, ga + i * m * k, true);
          if (gb) kernels::gemm_tn(k, n, m, pa, g, gb + i * k * n, true);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- convolution

namespace {

template <typename T>
Tensor<T> conv_impl(Tape<T>& tape, const Tensor<T>& x, const ConvParams<T>& p, std::size_t spatial_axes,
                    const char* name) {
  const std::size_t rank = spatial_axes + 2;
  const char* layout = spatial_axes == 2 ? "[N,C,H,W]" : "[N,C,T,H,W]";
  if (x.ndim() != rank) {
    throw ShapeError(std::string(name) + ": input must be " + layout + ", got " + shape_str(x.shape()));
  }
  const Tensor<T>& w = p.weight;
  if (!w.defined() || w.ndim() != rank) {
    throw ShapeError(std::string(name) + ": kernel must have rank " + std::to_string(rank));
  }
  if (w.dim(1) != x.dim(1)) {
    throw ShapeError(std::string(name) + ": input channels (axis 1) = " + std::to_string(x.dim(1)) +
                     " do not match kernel in-channels (axis 1) = " + std::to_string(w.dim(1)));
  }
  if (p.bias.defined() && (p.bias.ndim() != 1 || p.bias.dim(0) != w.dim(0))) {
    throw ShapeError(std::string(name) + ": bias must be [outC]");
  }
  auto pick = [&](const std::vector<std::size_t>& v, std::size_t i, std::size_t def) {
    if (v.empty()) return def;
    if (v.size() == 1) return v[0];
    if (v.size() != spatial_axes) throw ShapeError(std::string(name) + ": stride/padding rank mismatch");
    return v[i];
  };
  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.out_channels = w.dim(0);
  if (spatial_axes == 3) {
    g.in_t = x.dim(2);
    g.k_t = w.dim(2);
    g.stride_t = pick(p.stride, 0, 1);
    g.pad_t = pick(p.padding, 0, 0);
  }
  const std::size_t o = spatial_axes == 3 ? 1 : 0;
  g.in_h = x.dim(2 + o);
  g.in_w = x.dim(3 + o);
  g.k_h = w.dim(2 + o);
  g.k_w = w.dim(3 + o);
  g.stride_h = pick(p.stride, o, 1);
  g.stride_w = pick(p.stride, o + 1, 1);
  g.pad_h = pick(p.padding, o, 0);
  g.pad_w = pick(p.padding, o + 1, 0);
  g.validate();

  Shape out_shape{g.batch, g.out_channels};
  if (spatial_axes == 3) out_shape.push_back(g.out_t());
  out_shape.push_back(g.out_h());
  out_shape.push_back(g.out_w());
  Tensor<T> out(out_shape);
  kernels::conv_forward(g, x.ptr(), w.ptr(), p.bias.defined() ? p.bias.ptr() : nullptr, out.ptr());

  Tensor<T> bias = p.bias;
  Tensor<T> weight = w;
  if (tape.should_record({&x, &weight, &bias})) {
    tape.record({x, weight, bias}, out, [x, weight, bias, out, g]() mutable {
      kernels::conv_backward(g, x.ptr(), weight.ptr(), out.grad().data(), grad_of(x), grad_of(weight),
                             grad_of(bias));
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const ConvParams<T>& p) {
  return conv_impl(tape, x, p, 2, "conv2d");
}

template <typename T>
Tensor<T> conv3d(Tape<T>& tape, const Tensor<T>& x, const ConvParams<T>& p) {
  return conv_impl(tape, x, p, 3, "conv3d");
}

// ---------------------------------------------------------------- normalization & regularization

template <typename T>
BatchNormState<T> BatchNormState<T>::make(std::size_t channels) {
  BatchNormState s;
  s.gamma = Tensor<T>::ones({channels});
  s.beta = Tensor<T>::zeros({channels});
  s.running_mean = Tensor<T>::zeros({channels});
  s.running_var = Tensor<T>::ones({channels});
  return s;
}

template <typename T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, BatchNormState<T>& s) {
  if (x.ndim() < 2) throw ShapeError("batch_norm: input must be [N,C,...], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (s.gamma.numel() != c || s.beta.numel() != c) {
    throw ShapeError("batch_norm: state has " + std::to_string(s.gamma.numel()) + " channels, input has " +
                     std::to_string(c));
  }
  const std::size_t inner = x.numel() / (n * c);
  const std::size_t count = n * inner;
  const bool train = s.mode == Mode::Train;
  if (train && count < 2) {
    throw ShapeError("batch_norm: degenerate batch (one value per channel) in train mode");
  }
  const T eps = static_cast<T>(s.eps);
  Tensor<T> out(x.shape());
  // Normalized activations and per-channel inverse std are kept for backward.
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(c);

  const Index channels = static_cast<Index>(c);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < channels; ++ci) {
    const std::size_t ch = static_cast<std::size_t>(ci);
    T mu, var;
    if (train) {
      T acc = T(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.ptr() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) acc += p[i];
      }
      mu = acc / static_cast<T>(count);
      T sq = T(0);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.ptr() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      var = sq / static_cast<T>(count);
      const T m = static_cast<T>(s.momentum);
      s.running_mean[ch] = (T(1) - m) * s.running_mean[ch] + m * mu;
      s.running_var[ch] = (T(1) - m) * s.running_var[ch] + m * (sq / static_cast<T>(count - 1));
    } else {
      mu = s.running_mean[ch];
      var = s.running_var[ch];
    }
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[ch] = is;
    const T gm = s.gamma[ch], bt = s.beta[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T h = (x[base + i] - mu) * is;
        xhat[base + i] = h;
        out[base + i] = gm * h + bt;
      }
    }
  }

  Tensor<T> gamma = s.gamma;
  Tensor<T> beta = s.beta;
  if (tape.should_record({&x, &gamma, &beta})) {
    tape.record({x, gamma, beta}, out,
                [x, gamma, beta, out, xhat, inv_std = std::move(inv_std), n, c, inner, count, train]() mutable {
                  const T* g = out.grad().data();
                  T* gx = grad_of(x);
                  T* gg = grad_of(gamma);
                  T* gb = grad_of(beta);
                  const Index channels = static_cast<Index>(c);
#pragma omp parallel for schedule(static)
                  for (Index ci = 0; ci < channels; ++ci) {
                    const std::size_t ch = static_cast<std::size_t>(ci);
                    T sum_g = T(0), sum_gh = T(0);
                    for (std::size_t b = 0; b < n; ++b) {
                      const std::size_t base = (b * c + ch) * inner;
                      for (std::size_t i = 0; i < inner; ++i) {
                        sum_g += g[base + i];
                        sum_gh += g[base + i] * xhat[base + i];
                      }
                    }
                    if (gg) gg[ch] += sum_gh;
                    if (gb) gb[ch] += sum_g;
                    if (!gx) continue;
                    const T scale_ = gamma[ch] * inv_std[ch];
                    const T mean_g = sum_g / static_cast<T>(count);
                    const T mean_gh = sum_gh / static_cast<T>(count);
                    for (std::size_t b = 0; b < n; ++b) {
                      const std::size_t base = (b * c + ch) * inner;
                      for (std::size_t i = 0; i < inner; ++i) {
                        gx[base + i] += train ? scale_ * (g[base + i] - mean_g - xhat[base + i] * mean_gh)
                                              : scale_ * g[base + i];
                      }
                    }
                  }
                });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  if (mode == Mode::Eval || rate == 0.0) return x;
  Rng rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep_scale;
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * mask[i];
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, mask = std::move(mask)]() mutable {
      const T* g = out.grad().data();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += g[i] * mask[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l2_normalize(Tape<T>& tape, const Tensor<T>& x, double eps) {
  if (x.ndim() != 2) throw ShapeError("l2_normalize: expected [N,d], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor<T> out(x.shape());
  std::vector<T> norms(n);
  std::vector<char> clamped(n);
  for (std::size_t i = 0; i < n; ++i) {
    T sq = T(0);
    for (std::size_t j = 0; j < d; ++j) sq += x[i * d + j] * x[i * d + j];
    const T nr = std::sqrt(sq);
    clamped[i] = !(nr >= static_cast<T>(eps));
    norms[i] = clamped[i] ? static_cast<T>(eps) : nr;
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x[i * d + j] / norms[i];
    if (BranchRecorder::active()) BranchRecorder::note(clamped[i] != 0);
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, norms = std::move(norms), clamped = std::move(clamped), n, d]() mutable {
      const T* g = out.grad().data();
      const T* y = out.ptr();
      if (T* gx = grad_of(x)) {
        for (std::size_t i = 0; i < n; ++i) {
          const T inv = T(1) / norms[i];
          if (clamped[i]) {
            for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * inv;
            continue;
          }
          T proj = T(0);
          for (std::size_t j = 0; j < d; ++j) proj += y[i * d + j] * g[i * d + j];
          for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += (g[i * d + j] - y[i * d + j] * proj) * inv;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- temporal & pooling

template <typename T>
Tensor<T> temporal_shift(Tape<T>& tape, const Tensor<T>& x, std::size_t channel_begin, std::size_t channel_end,
                         int direction) {
  if (x.ndim() != 5) throw ShapeError("temporal_shift: expected [N,T,C,H,W], got " + shape_str(x.shape()));
  if (direction != 1 && direction != -1) throw ConfigError("temporal_shift: direction must be +1 or -1");
  const std::size_t n = x.dim(0), t = x.dim(1), c = x.dim(2), hw = x.dim(3) * x.dim(4);
  channel_end = std::min(channel_end, c);
  if (channel_begin >= channel_end) return x;  // empty range: identity

  Tensor<T> out = x.clone();
  const std::size_t frame = c * hw;
  const std::size_t c0 = channel_begin * hw;
  const std::size_t len = (channel_end - channel_begin) * hw;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ti = 0; ti < t; ++ti) {
      const Index src_t = static_cast<Index>(ti) - direction;
      T* dst = out.ptr() + (b * t + ti) * frame + c0;
      if (src_t < 0 || src_t >= static_cast<Index>(t)) {
        std::fill(dst, dst + len, T(0));
      } else {
        std::copy_n(x.ptr() + (b * t + static_cast<std::size_t>(src_t)) * frame + c0, len, dst);
      }
    }
  }
  if (tape.should_record({&x})) {
    tape.record({x}, out, [x, out, n, t, frame, c0, len, direction]() mutable {
      const T* g = out.grad().data();
      T* gx = grad_of(x);
      if (!gx) return;
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ti = 0; ti < t; ++ti) {
          const std::size_t base = (b * t + ti) * frame;
          // Unshifted channels pass straight through.
          for (std::size_t i = 0; i < c0; ++i) gx[base + i] += g[base + i];
          for (std::size_t i = c0 + len; i < frame; ++i) gx[base + i] += g[base + i];
          const Index src_t = static_cast<Index>(ti) - direction;
          if (src_t < 0 || src_t >= static_cast<Index>(t)) continue;
          T* dst = gx + (b * t + static_cast<std::size_t>(src_t)) * frame + c0;
          const T* src = g + base + c0;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> pool(Tape<T>& tape, const Tensor<T>& x, PoolKind kind) {
  if (kind == PoolKind::SegmentMean) {
    if (x.ndim() < 2) throw ShapeError("pool: segment-mean needs [N,T,...], got " + shape_str(x.shape()));
    return mean_axis(tape, x, 1);
  }
  if (x.ndim() < 3) throw ShapeError("pool: spatial-mean needs [...,H,W], got " + shape_str(x.shape()));
  Shape flat(x.shape().begin(), x.shape().end() - 2);
  flat.push_back(x.dim(x.ndim() - 2) * x.dim(x.ndim() - 1));
  return mean_axis(tape, reshape(tape, x, flat), flat.size() - 1);
}

// ---------------------------------------------------------------- attention

template <typename T>
AttentionParams<T> AttentionParams<T>::make(std::size_t model_dim, std::size_t num_heads, Rng& rng) {
  if (num_heads == 0 || model_dim == 0 || model_dim % num_heads != 0) {
    throw ConfigError("attention: model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  AttentionParams p;
  p.num_heads = num_heads;
  p.model_dim = model_dim;
  p.wq = fan_in_uniform<T>({model_dim, model_dim}, model_dim, rng);
  p.wk = fan_in_uniform<T>({model_dim, model_dim}, model_dim, rng);
  p.wv = fan_in_uniform<T>({model_dim, model_dim}, model_dim, rng);
  p.wo = fan_in_uniform<T>({model_dim, model_dim}, model_dim, rng);
  p.bq = Tensor<T>::zeros({model_dim});
  p.bk = Tensor<T>::zeros({model_dim});
  p.bv = Tensor<T>::zeros({model_dim});
  p.bo = Tensor<T>::zeros({model_dim});
  return p;
}

template <typename T>
Tensor<T> multi_head_attention(Tape<T>& tape, const Tensor<T>& tokens, const AttentionParams<T>& p,
                               Tensor<T>* weights_out) {
  if (p.num_heads == 0 || p.model_dim % p.num_heads != 0) {
    throw ConfigError("attention: model_dim " + std::to_string(p.model_dim) + " is not divisible by num_heads " +
                      std::to_string(p.num_heads));
  }
  if (tokens.ndim() != 3 || tokens.dim(2) != p.model_dim) {
    throw ShapeError("attention: tokens must be [N,L," + std::to_string(p.model_dim) + "], got " +
                     shape_str(tokens.shape()));
  }
  const std::size_t n = tokens.dim(0), l = tokens.dim(1), d = p.model_dim, h = p.num_heads, hd = p.head_dim();
  const Tensor<T> flat = reshape(tape, tokens, {n * l, d});
  auto heads = [&](const Tensor<T>& w, const Tensor<T>& b) {
    Tensor<T> proj = reshape(tape, linear(tape, flat, w, b), {n, l, h, hd});
    return reshape(tape, permute(tape, proj, {0, 2, 1, 3}), {n * h, l, hd});
  };
  const Tensor<T> q = heads(p.wq, p.bq);
  const Tensor<T> k = heads(p.wk, p.bk);
  const Tensor<T> v = heads(p.wv, p.bv);
  const Tensor<T> scores = scale(tape, matmul(tape, q, k, true), static_cast<T>(1.0 / std::sqrt(double(hd))));
  const Tensor<T> weights = softmax(tape, scores);
  if (weights_out) *weights_out = Tensor<T>({n, h, l, l}, std::vector<T>(weights.data().begin(), weights.data().end()));
  const Tensor<T> ctx = matmul(tape, weights, v);
  const Tensor<T> merged = reshape(tape, permute(tape, reshape(tape, ctx, {n, h, l, hd}), {0, 2, 1, 3}), {n * l, d});
  return reshape(tape, linear(tape, merged, p.wo, p.bo), {n, l, d});
}

// ---------------------------------------------------------------- loss

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) throw ShapeError("softmax_cross_entropy: logits must be [N,K]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw RangeError("softmax_cross_entropy: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " outside [0," + std::to_string(k) + ")");
    }
  }
  std::vector<T> probs(n * k);
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * k;
    const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    const T mx = row[arg];
    // log-sum-exp as log1p over the non-maximal terms keeps tiny losses accurate.
    T rest = T(0);
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = j == arg ? T(1) : std::exp(row[j] - mx);
      if (j != arg) rest += probs[i * k + j];
    }
    const T s = T(1) + rest;
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= s;
    total += std::log1p(rest) + (mx - row[labels[i]]);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
  if (tape.should_record({&logits})) {
    tape.record({logits}, out, [logits, out, probs = std::move(probs), labels, n, k]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      if (T* gl = grad_of(logits)) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const T onehot = static_cast<int>(j) == labels[i] ? T(1) : T(0);
            gl[i * k + j] += g * (probs[i * k + j] - onehot);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  return Tensor<T>::uniform(std::move(shape), -bound, bound, rng);
}

#define GSP_INSTANTIATE_OPS(T)                                                                                \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                                    \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                                         \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                                        \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                              \
  template Tensor<T> permute(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);                    \
  template Tensor<T> slice(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t, std::size_t);                \
  template Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>&, std::size_t);                            \
  template Tensor<T> mean_axis(Tape<T>&, const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                                        \
  template Tensor<T> tanh(Tape<T>&, const Tensor<T>&);                                                        \
  template Tensor<T> activation(Tape<T>&, const Tensor<T>&, ActivationKind);                                  \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&, bool);                              \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const ConvParams<T>&);                                \
  template Tensor<T> conv3d(Tape<T>&, const Tensor<T>&, const ConvParams<T>&);                                \
  template struct BatchNormState<T>;                                                                          \
  template Tensor<T> batch_norm(Tape<T>&, const Tensor<T>&, BatchNormState<T>&);                              \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, Mode, std::uint64_t);                        \
  template Tensor<T> l2_normalize(Tape<T>&, const Tensor<T>&, double);                                        \
  template Tensor<T> temporal_shift(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t, int);               \
  template Tensor<T> pool(Tape<T>&, const Tensor<T>&, PoolKind);                                              \
  template struct AttentionParams<T>;                                                                         \
  template Tensor<T> multi_head_attention(Tape<T>&, const Tensor<T>&, const AttentionParams<T>&, Tensor<T>*); \
  template Tensor<T> softmax_cross_entropy(Tape<T>&, const Tensor<T>&, const std::vector<int>&);              \
  template Tensor<T> fan_in_uniform<T>(Shape, std::size_t, Rng&);

GSP_INSTANTIATE_OPS(float)
GSP_INSTANTIATE_OPS(double)

#undef GSP_INSTANTIATE_OPS

}  // namespace gsp
