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

#include "gsp/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gsp/error.hpp"

namespace gsp::kernels {

namespace {

using Index = std::ptrdiff_t;

// Column tile for the axpy-form GEMMs; keeps a tile of B resident in L1/L2.
constexpr std::size_t kColumnTile = 512;

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad, const char* axis) {
  if (stride == 0) throw ShapeError(std::string("convolution stride along ") + axis + " must be positive");
  const std::size_t padded = in + 2 * pad;
  if (padded < k) {
    throw ShapeError(std::string("convolution kernel extent ") + std::to_string(k) + " exceeds padded input " +
                     std::to_string(padded) + " along " + axis);
  }
  return (padded - k) / stride + 1;
}

// Output positions w in [first, last) whose input index w * stride + offset - pad
// lands inside [0, extent).
std::pair<std::size_t, std::size_t> valid_span(std::size_t out, std::size_t stride, std::size_t offset,
                                               std::size_t pad, std::size_t extent) {
  std::size_t first = 0;
  if (offset < pad) first = (pad - offset + stride - 1) / stride;
  // w * stride + offset - pad <= extent - 1
  std::size_t last = 0;
  if (extent + pad > offset) last = (extent + pad - offset - 1) / stride + 1;
  last = std::min(last, out);
  first = std::min(first, last);
  return {first, last};
}

template <typename T>
void vol2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const std::size_t ov = ot * oh * ow;
  const std::size_t p = g.col_cols();
  const std::size_t kv = g.kernel_volume();
  const std::size_t khw = g.k_h * g.k_w;
  const Index rows = static_cast<Index>(g.col_rows());

#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    const std::size_t ci = static_cast<std::size_t>(r) / kv;
    const std::size_t rem = static_cast<std::size_t>(r) % kv;
    const std::size_t a = rem / khw;
    const std::size_t b = (rem / g.k_w) % g.k_h;
    const std::size_t c = rem % g.k_w;
    const auto [w0, w1] = valid_span(ow, g.stride_w, c, g.pad_w, g.in_w);
    T* dst = col + static_cast<std::size_t>(r) * p;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* src = x + (n * g.in_channels + ci) * g.in_volume();
      T* out = dst + n * ov;
      for (std::size_t t = 0; t < ot; ++t) {
        const Index it = static_cast<Index>(t * g.stride_t + a) - static_cast<Index>(g.pad_t);
        if (it < 0 || it >= static_cast<Index>(g.in_t)) {
          std::fill(out, out + oh * ow, T(0));
          out += oh * ow;
          continue;
        }
        for (std::size_t h = 0; h < oh; ++h) {
          const Index ih = static_cast<Index>(h * g.stride_h + b) - static_cast<Index>(g.pad_h);
          if (ih < 0 || ih >= static_cast<Index>(g.in_h)) {
            std::fill(out, out + ow, T(0));
            out += ow;
            continue;
          }
          const T* row = src + (static_cast<std::size_t>(it) * g.in_h + static_cast<std::size_t>(ih)) * g.in_w;
          std::fill(out, out + w0, T(0));
          if (g.stride_w == 1) {
            std::copy_n(row + (w0 + c - g.pad_w), w1 - w0, out + w0);
          } else {
            for (std::size_t w = w0; w < w1; ++w) out[w] = row[w * g.stride_w + c - g.pad_w];
          }
          std::fill(out + w1, out + ow, T(0));
          out += ow;
        }
      }
    }
  }
}

// Accumulates unfolded columns back into dx. Each (n, ci) plane is owned by
// one thread and visits kernel offsets in a fixed order.
template <typename T>
void col2vol(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const std::size_t ov = ot * oh * ow;
  const std::size_t p = g.col_cols();
  const std::size_t kv = g.kernel_volume();
  const Index planes = static_cast<Index>(g.batch * g.in_channels);

#pragma omp parallel for schedule(static)
  for (Index plane = 0; plane < planes; ++plane) {
    const std::size_t n = static_cast<std::size_t>(plane) / g.in_channels;
    const std::size_t ci = static_cast<std::size_t>(plane) % g.in_channels;
    T* dst = dx + static_cast<std::size_t>(plane) * g.in_volume();
    for (std::size_t a = 0; a < g.k_t; ++a) {
      for (std::size_t b = 0; b < g.k_h; ++b) {
        for (std::size_t c = 0; c < g.k_w; ++c) {
          const std::size_t r = ci * kv + (a * g.k_h + b) * g.k_w + c;
          const auto [w0, w1] = valid_span(ow, g.stride_w, c, g.pad_w, g.in_w);
          const T* src = col + r * p + n * ov;
          for (std::size_t t = 0; t < ot; ++t) {
            const Index it = static_cast<Index>(t * g.stride_t + a) - static_cast<Index>(g.pad_t);
            if (it < 0 || it >= static_cast<Index>(g.in_t)) continue;
            for (std::size_t h = 0; h < oh; ++h) {
              const Index ih = static_cast<Index>(h * g.stride_h + b) - static_cast<Index>(g.pad_h);
              if (ih < 0 || ih >= static_cast<Index>(g.in_h)) continue;
              T* row = dst + (static_cast<std::size_t>(it) * g.in_h + static_cast<std::size_t>(ih)) * g.in_w;
              const T* s = src + (t * oh + h) * ow;
              for (std::size_t w = w0; w < w1; ++w) row[w * g.stride_w + c - g.pad_w] += s[w];
            }
          }
        }
      }
    }
  }
}

// Direct convolution for stride-1 kernels with few output channels (the GSF
// gates), where unfolding would multiply memory traffic by the kernel volume.
bool use_direct(const ConvGeometry& g) {
  return g.out_channels <= 4 && g.stride_t == 1 && g.stride_h == 1 && g.stride_w == 1;
}

template <typename T>
void direct_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const std::size_t kv = g.kernel_volume();
  const Index slices = static_cast<Index>(g.batch * g.out_channels * ot);
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < slices; ++job) {
    const std::size_t t = static_cast<std::size_t>(job) % ot;
    const std::size_t plane = static_cast<std::size_t>(job) / ot;
    const std::size_t n = plane / g.out_channels, co = plane % g.out_channels;
    T* dst = y + static_cast<std::size_t>(job) * oh * ow;
    std::fill(dst, dst + oh * ow, bias ? bias[co] : T(0));
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const T* src = x + (n * g.in_channels + ci) * g.in_volume();
      const T* wk = weight + (co * g.in_channels + ci) * kv;
      for (std::size_t a = 0; a < g.k_t; ++a) {
        const Index it = static_cast<Index>(t + a) - static_cast<Index>(g.pad_t);
        if (it < 0 || it >= static_cast<Index>(g.in_t)) continue;
        for (std::size_t b = 0; b < g.k_h; ++b) {
          for (std::size_t c = 0; c < g.k_w; ++c) {
            const T wv = wk[(a * g.k_h + b) * g.k_w + c];
            const auto [w0, w1] = valid_span(ow, 1, c, g.pad_w, g.in_w);
            const auto [h0, h1] = valid_span(oh, 1, b, g.pad_h, g.in_h);
            for (std::size_t h = h0; h < h1; ++h) {
              const T* row = src + (static_cast<std::size_t>(it) * g.in_h + h + b - g.pad_h) * g.in_w + c - g.pad_w;
              T* out = dst + h * ow;
              for (std::size_t w = w0; w < w1; ++w) out[w] += wv * row[w];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void direct_backward_input(const ConvGeometry& g, const T* weight, const T* dy, T* dx) {
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const std::size_t ov = ot * oh * ow;
  const std::size_t kv = g.kernel_volume();
  const Index slices = static_cast<Index>(g.batch * g.in_channels * g.in_t);
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < slices; ++job) {
    const std::size_t it = static_cast<std::size_t>(job) % g.in_t;
    const std::size_t plane = static_cast<std::size_t>(job) / g.in_t;
    const std::size_t n = plane / g.in_channels, ci = plane % g.in_channels;
    T* dst = dx + static_cast<std::size_t>(job) * g.in_h * g.in_w;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const T* wk = weight + (co * g.in_channels + ci) * kv;
      for (std::size_t a = 0; a < g.k_t; ++a) {
        const Index t = static_cast<Index>(it + g.pad_t) - static_cast<Index>(a);
        if (t < 0 || t >= static_cast<Index>(ot)) continue;
        const T* src = dy + (n * g.out_channels + co) * ov + static_cast<std::size_t>(t) * oh * ow;
        for (std::size_t b = 0; b < g.k_h; ++b) {
          for (std::size_t c = 0; c < g.k_w; ++c) {
            const T wv = wk[(a * g.k_h + b) * g.k_w + c];
            const auto [w0, w1] = valid_span(ow, 1, c, g.pad_w, g.in_w);
            const auto [h0, h1] = valid_span(oh, 1, b, g.pad_h, g.in_h);
            for (std::size_t h = h0; h < h1; ++h) {
              T* row = dst + (h + b - g.pad_h) * g.in_w + c - g.pad_w;
              const T* d = src + h * ow;
              for (std::size_t w = w0; w < w1; ++w) row[w] += wv * d[w];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void direct_backward_weight(const ConvGeometry& g, const T* x, const T* dy, T* dweight) {
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  const std::size_t ov = ot * oh * ow;
  const std::size_t kv = g.kernel_volume();
  const Index entries = static_cast<Index>(g.out_channels * g.in_channels * kv);
#pragma omp parallel for schedule(static)
  for (Index e = 0; e < entries; ++e) {
    const std::size_t k = static_cast<std::size_t>(e) % kv;
    const std::size_t ci = (static_cast<std::size_t>(e) / kv) % g.in_channels;
    const std::size_t co = static_cast<std::size_t>(e) / kv / g.in_channels;
    const std::size_t a = k / (g.k_h * g.k_w), b = (k / g.k_w) % g.k_h, c = k % g.k_w;
    const auto [w0, w1] = valid_span(ow, 1, c, g.pad_w, g.in_w);
    const auto [h0, h1] = valid_span(oh, 1, b, g.pad_h, g.in_h);
    const auto [t0, t1] = valid_span(ot, 1, a, g.pad_t, g.in_t);
    // One partial sum per output column, reduced once at the end.
    std::vector<T> lanes(ow, T(0));
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* src = x + (n * g.in_channels + ci) * g.in_volume();
      const T* d = dy + (n * g.out_channels + co) * ov;
      for (std::size_t t = t0; t < t1; ++t) {
        for (std::size_t h = h0; h < h1; ++h) {
          const T* row = src + ((t + a - g.pad_t) * g.in_h + h + b - g.pad_h) * g.in_w + c - g.pad_w;
          const T* drow = d + (t * oh + h) * ow;
          for (std::size_t w = w0; w < w1; ++w) lanes[w] += drow[w] * row[w];
        }
      }
    }
    T acc = T(0);
    for (std::size_t w = w0; w < w1; ++w) acc += lanes[w];
    dweight[e] += acc;
  }
}

}  // namespace

std::size_t ConvGeometry::out_t() const { return out_extent(in_t, k_t, stride_t, pad_t, "T"); }
std::size_t ConvGeometry::out_h() const { return out_extent(in_h, k_h, stride_h, pad_h, "H"); }
std::size_t ConvGeometry::out_w() const { return out_extent(in_w, k_w, stride_w, pad_w, "W"); }

void ConvGeometry::validate() const {
  if (batch == 0 || in_channels == 0 || out_channels == 0 || k_t == 0 || k_h == 0 || k_w == 0) {
    throw ShapeError("convolution dimensions must be positive");
  }
  (void)out_t();
  (void)out_h();
  (void)out_w();
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t kLanes = 32;
  T acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  }
  for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += a[i] * b[i];
  for (std::size_t width = kLanes / 2; width > 0; width /= 2) {
    for (std::size_t l = 0; l < width; ++l) acc[l] += acc[l + width];
  }
  return acc[0];
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const std::size_t tiles = (n + kColumnTile - 1) / kColumnTile;
  const Index work = static_cast<Index>(tiles * m);
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < work; ++job) {
    const std::size_t tile = static_cast<std::size_t>(job) / m;
    const std::size_t i = static_cast<std::size_t>(job) % m;
    const std::size_t j0 = tile * kColumnTile;
    const std::size_t len = std::min(kColumnTile, n - j0);
    T* crow = c + i * n + j0;
    if (!accumulate) std::fill(crow, crow + len, T(0));
    std::size_t kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const T a0 = a[i * k + kk], a1 = a[i * k + kk + 1], a2 = a[i * k + kk + 2], a3 = a[i * k + kk + 3];
      const T* b0 = b + kk * n + j0;
      const T* b1 = b0 + n;
      const T* b2 = b1 + n;
      const T* b3 = b2 + n;
      for (std::size_t j = 0; j < len; ++j) crow[j] += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
    }
    for (; kk < k; ++kk) {
      const T av = a[i * k + kk];
      const T* brow = b + kk * n + j0;
      for (std::size_t j = 0; j < len; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const Index work = static_cast<Index>(m * n);
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < work; ++job) {
    const std::size_t i = static_cast<std::size_t>(job) / n;
    const std::size_t j = static_cast<std::size_t>(job) % n;
    const T v = dot(a + i * k, b + j * k, k);
    c[i * n + j] = accumulate ? c[i * n + j] + v : v;
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const std::size_t tiles = (n + kColumnTile - 1) / kColumnTile;
  const Index work = static_cast<Index>(tiles * m);
#pragma omp parallel for schedule(static)
  for (Index job = 0; job < work; ++job) {
    const std::size_t tile = static_cast<std::size_t>(job) / m;
    const std::size_t i = static_cast<std::size_t>(job) % m;
    const std::size_t j0 = tile * kColumnTile;
    const std::size_t len = std::min(kColumnTile, n - j0);
    T* crow = c + i * n + j0;
    if (!accumulate) std::fill(crow, crow + len, T(0));
    std::size_t kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const T a0 = a[kk * m + i], a1 = a[(kk + 1) * m + i], a2 = a[(kk + 2) * m + i], a3 = a[(kk + 3) * m + i];
      const T* b0 = b + kk * n + j0;
      const T* b1 = b0 + n;
      const T* b2 = b1 + n;
      const T* b3 = b2 + n;
      for (std::size_t j = 0; j < len; ++j) crow[j] += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
    }
    for (; kk < k; ++kk) {
      const T av = a[kk * m + i];
      const T* brow = b + kk * n + j0;
      for (std::size_t j = 0; j < len; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
  g.validate();
  if (use_direct(g)) {
    direct_forward(g, x, weight, bias, y);
    return;
  }
  const std::size_t rows = g.col_rows();
  const std::size_t p = g.col_cols();
  const std::size_t ov = g.out_volume();
  const auto col = std::make_unique_for_overwrite<T[]>(rows * p);
  vol2col(g, x, col.get());
  const auto out = std::make_unique_for_overwrite<T[]>(g.out_channels * p);
  gemm_nn(g.out_channels, p, rows, weight, col.get(), out.get(), false);

  const Index planes = static_cast<Index>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index plane = 0; plane < planes; ++plane) {
    const std::size_t n = static_cast<std::size_t>(plane) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(plane) % g.out_channels;
    const T bv = bias ? bias[co] : T(0);
    const T* src = out.get() + co * p + n * ov;
    T* dst = y + static_cast<std::size_t>(plane) * ov;
    for (std::size_t s = 0; s < ov; ++s) dst[s] = src[s] + bv;
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx, T* dweight,
                   T* dbias) {
  g.validate();
  const std::size_t rows = g.col_rows();
  const std::size_t p = g.col_cols();
  const std::size_t ov = g.out_volume();

  if (use_direct(g)) {
    if (dbias != nullptr) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        T s = T(0);
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* d = dy + (n * g.out_channels + co) * ov;
          for (std::size_t j = 0; j < ov; ++j) s += d[j];
        }
        dbias[co] += s;
      }
    }
    if (dweight != nullptr) direct_backward_weight(g, x, dy, dweight);
    if (dx != nullptr) direct_backward_input(g, weight, dy, dx);
    return;
  }

  // dy as a [Cout, N*OV] matrix matching the unfolded column order.
  const auto dmat = std::make_unique_for_overwrite<T[]>(g.out_channels * p);
  const Index planes = static_cast<Index>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index plane = 0; plane < planes; ++plane) {
    const std::size_t n = static_cast<std::size_t>(plane) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(plane) % g.out_channels;
    std::copy_n(dy + static_cast<std::size_t>(plane) * ov, ov, dmat.get() + co * p + n * ov);
  }

  if (dbias != nullptr) {
    const Index oc = static_cast<Index>(g.out_channels);
#pragma omp parallel for schedule(static)
    for (Index co = 0; co < oc; ++co) {
      const T* row = dmat.get() + static_cast<std::size_t>(co) * p;
      T s = T(0);
      for (std::size_t j = 0; j < p; ++j) s += row[j];
      dbias[co] += s;
    }
  }
  if (dweight != nullptr) {
    const auto col = std::make_unique_for_overwrite<T[]>(rows * p);
    vol2col(g, x, col.get());
    gemm_nt(g.out_channels, rows, p, dmat.get(), col.get(), dweight, true);
  }
  if (dx != nullptr) {
    const auto dcol = std::make_unique_for_overwrite<T[]>(rows * p);
    gemm_tn(rows, p, g.out_channels, weight, dmat.get(), dcol.get(), false);
    col2vol(g, dcol.get(), dx);
  }
}

namespace reference {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s = accumulate ? c[i * n + j] : T(0);
      for (std::size_t kk = 0; kk < k; ++kk) s += a[i * k + kk] * b[kk * n + j];
      c[i * n + j] = s;
    }
  }
}

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
  g.validate();
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t t = 0; t < ot; ++t) {
        for (std::size_t h = 0; h < oh; ++h) {
          for (std::size_t w = 0; w < ow; ++w) {
            T s = bias ? bias[co] : T(0);
            for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
              for (std::size_t a = 0; a < g.k_t; ++a) {
                const Index it = static_cast<Index>(t * g.stride_t + a) - static_cast<Index>(g.pad_t);
                if (it < 0 || it >= static_cast<Index>(g.in_t)) continue;
                for (std::size_t b = 0; b < g.k_h; ++b) {
                  const Index ih = static_cast<Index>(h * g.stride_h + b) - static_cast<Index>(g.pad_h);
                  if (ih < 0 || ih >= static_cast<Index>(g.in_h)) continue;
                  for (std::size_t c = 0; c < g.k_w; ++c) {
                    const Index iw = static_cast<Index>(w * g.stride_w + c) - static_cast<Index>(g.pad_w);
                    if (iw < 0 || iw >= static_cast<Index>(g.in_w)) continue;
                    const T xv = x[(((n * g.in_channels + ci) * g.in_t + it) * g.in_h + ih) * g.in_w + iw];
                    const T wv = weight[(((co * g.in_channels + ci) * g.k_t + a) * g.k_h + b) * g.k_w + c];
                    s += xv * wv;
                  }
                }
              }
            }
            y[(((n * g.out_channels + co) * ot + t) * oh + h) * ow + w] = s;
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx, T* dweight,
                   T* dbias) {
  g.validate();
  const std::size_t ot = g.out_t(), oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t t = 0; t < ot; ++t) {
        for (std::size_t h = 0; h < oh; ++h) {
          for (std::size_t w = 0; w < ow; ++w) {
            const T gy = dy[(((n * g.out_channels + co) * ot + t) * oh + h) * ow + w];
            if (dbias) dbias[co] += gy;
            for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
              for (std::size_t a = 0; a < g.k_t; ++a) {
                const Index it = static_cast<Index>(t * g.stride_t + a) - static_cast<Index>(g.pad_t);
                if (it < 0 || it >= static_cast<Index>(g.in_t)) continue;
                for (std::size_t b = 0; b < g.k_h; ++b) {
                  const Index ih = static_cast<Index>(h * g.stride_h + b) - static_cast<Index>(g.pad_h);
                  if (ih < 0 || ih >= static_cast<Index>(g.in_h)) continue;
                  for (std::size_t c = 0; c < g.k_w; ++c) {
                    const Index iw = static_cast<Index>(w * g.stride_w + c) - static_cast<Index>(g.pad_w);
                    if (iw < 0 || iw >= static_cast<Index>(g.in_w)) continue;
                    const std::size_t xi = (((n * g.in_channels + ci) * g.in_t + it) * g.in_h + ih) * g.in_w + iw;
                    const std::size_t wi = (((co * g.in_channels + ci) * g.k_t + a) * g.k_h + b) * g.k_w + c;
                    if (dx) dx[xi] += weight[wi] * gy;
                    if (dweight) dweight[wi] += x[xi] * gy;
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace reference

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

#define GSP_INSTANTIATE_KERNELS(T)                                                                          \
  template T dot<T>(const T*, const T*, std::size_t);                                                       \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);            \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);            \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);            \
  template void conv_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);                     \
  template void conv_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*);            \
  template void reference::gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool); \
  template void reference::conv_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);          \
  template void reference::conv_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*);

GSP_INSTANTIATE_KERNELS(float)
GSP_INSTANTIATE_KERNELS(double)

#undef GSP_INSTANTIATE_KERNELS

}  // namespace gsp::kernels
