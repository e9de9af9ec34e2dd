#pragma once

#include <cmath>

#include "aeromatch/kernels.hpp"

// Backend implementations. Both share the helpers below so that the
// per-element arithmetic is identical; only the outer loop scheduling
// differs between the serial and the OpenMP variants.

namespace aeromatch::kernels {

// ceil(a/b) and floor(a/b) for b > 0 and any sign of a.
inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : a / b; }
inline int floor_div(int a, int b) { return a >= 0 ? a / b : (a - b + 1) / b; }

// Normalized coordinate -> fractional pixel index. Values that land within
// 1e-9 of a pixel centre snap onto it, which keeps sampling at lattice
// points (identity warps, integer-pitch translations) exact.
inline double unnormalize_coord(double coord, int extent) {
  double f = (coord + 1.0) * 0.5 * static_cast<double>(extent - 1);
  const double r = std::round(f);
  if (std::fabs(f - r) < 1e-9) f = r;
  return f;
}

struct BilinearTaps {
  int x0 = 0, y0 = 0;   // top-left tap
  double wx = 0.0, wy = 0.0;
  bool inside = false;  // at least potentially touching the image
};

inline BilinearTaps bilinear_taps(double gx, double gy, int h, int w) {
  BilinearTaps t;
  const double fx = unnormalize_coord(gx, w);
  const double fy = unnormalize_coord(gy, h);
  // Far outside: nothing to tap and floor() casts would overflow.
  if (!(fx > -2.0 && fx < static_cast<double>(w) + 1.0 && fy > -2.0 &&
        fy < static_cast<double>(h) + 1.0))
    return t;
  t.x0 = static_cast<int>(std::floor(fx));
  t.y0 = static_cast<int>(std::floor(fy));
  t.wx = fx - static_cast<double>(t.x0);
  t.wy = fy - static_cast<double>(t.y0);
  t.inside = true;
  return t;
}

inline double tap(const double* plane, int h, int w, int y, int x) {
  if (x < 0 || x >= w || y < 0 || y >= h) return 0.0;
  return plane[static_cast<size_t>(y) * w + x];
}

namespace serial_impl {
void conv2d_forward(const ConvDims&, const double*, const double*, const double*, double*);
void conv2d_backward_input(const ConvDims&, const double*, const double*, double*);
void conv2d_backward_kernel(const ConvDims&, const double*, const double*, double*);
void conv2d_backward_bias(const ConvDims&, const double*, double*);
void correlation_forward(int, int, int, int, const double*, const double*, double*);
void correlation_backward(int, int, int, int, const double*, const double*, const double*, double*, double*);
void bilinear_forward(const SampleDims&, const double*, const double*, double*);
void bilinear_backward(const SampleDims&, const double*, const double*, const double*, double*, double*);
}  // namespace serial_impl

namespace parallel_impl {
void conv2d_forward(const ConvDims&, const double*, const double*, const double*, double*);
void conv2d_backward_input(const ConvDims&, const double*, const double*, double*);
void conv2d_backward_kernel(const ConvDims&, const double*, const double*, double*);
void conv2d_backward_bias(const ConvDims&, const double*, double*);
void correlation_forward(int, int, int, int, const double*, const double*, double*);
void correlation_backward(int, int, int, int, const double*, const double*, const double*, double*, double*);
void bilinear_forward(const SampleDims&, const double*, const double*, double*);
void bilinear_backward(const SampleDims&, const double*, const double*, const double*, double*, double*);
}  // namespace parallel_impl

// One output row of a convolution: accumulation order (c_in, kh, kw) with a
// branch-free inner width loop. Shared by both backends.
inline void conv_row(const ConvDims& d, const double* in, const double* kern,
                     const double* bias, double* out_row, int n, int co, int oh) {
  const double b = bias ? bias[co] : 0.0;
  for (int ow = 0; ow < d.w_out; ++ow) out_row[ow] = b;
  for (int ci = 0; ci < d.c_in; ++ci) {
    for (int ki = 0; ki < d.kh; ++ki) {
      const int ih = oh * d.stride + ki - d.pad;
      if (ih < 0 || ih >= d.h) continue;
      const double* in_row =
          in + ((static_cast<size_t>(n) * d.c_in + ci) * d.h + ih) * d.w;
      const double* k_row =
          kern + ((static_cast<size_t>(co) * d.c_in + ci) * d.kh + ki) * d.kw;
      for (int kj = 0; kj < d.kw; ++kj) {
        const double kv = k_row[kj];
        const int off = kj - d.pad;
        const int lo = off < 0 ? ceil_div(-off, d.stride) : 0;
        const int hi_ok = floor_div(d.w - 1 - off, d.stride);
        const int hi = hi_ok < d.w_out - 1 ? hi_ok : d.w_out - 1;
        for (int ow = lo; ow <= hi; ++ow)
          out_row[ow] += kv * in_row[ow * d.stride + off];
      }
    }
  }
}

// One gradient row w.r.t. the input; each element is owned by exactly one
// iteration. Accumulation order per element: (co, kh, kw). For stride 1 the
// gather is a correlation with the flipped kernel and runs branch-free; the
// general-stride path keeps the same per-element order, so both produce
// identical sums.
inline void conv_grad_input_row(const ConvDims& d, const double* g_out,
                                const double* kern, double* g_in_row, int n,
                                int ci, int ih) {
  if (d.stride == 1) {
    for (int co = 0; co < d.c_out; ++co) {
      for (int ki = 0; ki < d.kh; ++ki) {
        const int oh = ih + d.pad - ki;
        if (oh < 0 || oh >= d.h_out) continue;
        const double* g_row =
            g_out +
            ((static_cast<size_t>(n) * d.c_out + co) * d.h_out + oh) * d.w_out;
        const double* k_row =
            kern + ((static_cast<size_t>(co) * d.c_in + ci) * d.kh + ki) * d.kw;
        for (int kj = 0; kj < d.kw; ++kj) {
          const double kv = k_row[kj];
          const int off = d.pad - kj;  // ow = iw + off
          const int lo = off < 0 ? -off : 0;
          const int hi_ok = d.w_out - 1 - off;
          const int hi = hi_ok < d.w - 1 ? hi_ok : d.w - 1;
          for (int iw = lo; iw <= hi; ++iw) g_in_row[iw] += kv * g_row[iw + off];
        }
      }
    }
    return;
  }
  for (int iw = 0; iw < d.w; ++iw) {
    double acc = g_in_row[iw];
    for (int co = 0; co < d.c_out; ++co) {
      for (int ki = 0; ki < d.kh; ++ki) {
        const int th = ih + d.pad - ki;
        if (th < 0 || th % d.stride != 0) continue;
        const int oh = th / d.stride;
        if (oh >= d.h_out) continue;
        const double* g_row =
            g_out + ((static_cast<size_t>(n) * d.c_out + co) * d.h_out + oh) * d.w_out;
        const double* k_row =
            kern + ((static_cast<size_t>(co) * d.c_in + ci) * d.kh + ki) * d.kw;
        for (int kj = 0; kj < d.kw; ++kj) {
          const int tw = iw + d.pad - kj;
          if (tw < 0 || tw % d.stride != 0) continue;
          const int ow = tw / d.stride;
          if (ow >= d.w_out) continue;
          acc += g_row[ow] * k_row[kj];
        }
      }
    }
    g_in_row[iw] = acc;
  }
}

// One kernel-gradient element; accumulation order (n, oh, ow).
inline double conv_grad_kernel_elem(const ConvDims& d, const double* g_out,
                                    const double* in, int co, int ci, int ki,
                                    int kj) {
  double acc = 0.0;
  const int off_w = kj - d.pad;
  const int lo = off_w < 0 ? ceil_div(-off_w, d.stride) : 0;
  const int hi_ok = floor_div(d.w - 1 - off_w, d.stride);
  const int hi = hi_ok < d.w_out - 1 ? hi_ok : d.w_out - 1;
  for (int n = 0; n < d.n; ++n) {
    for (int oh = 0; oh < d.h_out; ++oh) {
      const int ih = oh * d.stride + ki - d.pad;
      if (ih < 0 || ih >= d.h) continue;
      const double* g_row =
          g_out + ((static_cast<size_t>(n) * d.c_out + co) * d.h_out + oh) * d.w_out;
      const double* in_row =
          in + ((static_cast<size_t>(n) * d.c_in + ci) * d.h + ih) * d.w;
      for (int ow = lo; ow <= hi; ++ow)
        acc += g_row[ow] * in_row[ow * d.stride + off_w];
    }
  }
  return acc;
}

}  // namespace aeromatch::kernels
