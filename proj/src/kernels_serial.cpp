#include "kernels_internal.hpp"

// Reference implementations. Straight loops, no threading; the parallel
// backend is required to reproduce these bitwise.

namespace aeromatch::kernels::serial_impl {

void conv2d_forward(const ConvDims& d, const double* in, const double* kern,
                    const double* bias, double* out) {
  for (int n = 0; n < d.n; ++n)
    for (int co = 0; co < d.c_out; ++co)
      for (int oh = 0; oh < d.h_out; ++oh) {
        double* row =
            out + ((static_cast<size_t>(n) * d.c_out + co) * d.h_out + oh) * d.w_out;
        conv_row(d, in, kern, bias, row, n, co, oh);
      }
}

void conv2d_backward_input(const ConvDims& d, const double* g_out,
                           const double* kern, double* g_in) {
  for (int n = 0; n < d.n; ++n)
    for (int ci = 0; ci < d.c_in; ++ci)
      for (int ih = 0; ih < d.h; ++ih) {
        double* row =
            g_in + ((static_cast<size_t>(n) * d.c_in + ci) * d.h + ih) * d.w;
        conv_grad_input_row(d, g_out, kern, row, n, ci, ih);
      }
}

void conv2d_backward_kernel(const ConvDims& d, const double* g_out,
                            const double* in, double* g_kern) {
  for (int co = 0; co < d.c_out; ++co)
    for (int ci = 0; ci < d.c_in; ++ci)
      for (int ki = 0; ki < d.kh; ++ki)
        for (int kj = 0; kj < d.kw; ++kj) {
          const size_t idx =
              ((static_cast<size_t>(co) * d.c_in + ci) * d.kh + ki) * d.kw + kj;
          g_kern[idx] += conv_grad_kernel_elem(d, g_out, in, co, ci, ki, kj);
        }
}

void conv2d_backward_bias(const ConvDims& d, const double* g_out, double* g_bias) {
  for (int co = 0; co < d.c_out; ++co) {
    double acc = 0.0;
    for (int n = 0; n < d.n; ++n) {
      const double* plane =
          g_out + (static_cast<size_t>(n) * d.c_out + co) * d.h_out * d.w_out;
      for (int i = 0; i < d.h_out * d.w_out; ++i) acc += plane[i];
    }
    g_bias[co] += acc;
  }
}

void correlation_forward(int n, int c, int h, int w, const double* fsrc,
                         const double* ftgt, double* out) {
  const int hw = h * w;
  for (int b = 0; b < n; ++b) {
    const double* src = fsrc + static_cast<size_t>(b) * c * hw;
    const double* tgt = ftgt + static_cast<size_t>(b) * c * hw;
    double* o = out + static_cast<size_t>(b) * hw * hw;
    for (int ij = 0; ij < hw; ++ij)
      for (int q = 0; q < hw; ++q) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch)
          acc += tgt[static_cast<size_t>(ch) * hw + ij] *
                 src[static_cast<size_t>(ch) * hw + q];
        o[static_cast<size_t>(q) * hw + ij] = acc;
      }
  }
}

void correlation_backward(int n, int c, int h, int w, const double* fsrc,
                          const double* ftgt, const double* g_out,
                          double* g_fsrc, double* g_ftgt) {
  const int hw = h * w;
  if (g_ftgt) {
    for (int b = 0; b < n; ++b) {
      const double* src = fsrc + static_cast<size_t>(b) * c * hw;
      const double* g = g_out + static_cast<size_t>(b) * hw * hw;
      double* gt = g_ftgt + static_cast<size_t>(b) * c * hw;
      for (int ch = 0; ch < c; ++ch)
        for (int ij = 0; ij < hw; ++ij) {
          double acc = 0.0;
          for (int q = 0; q < hw; ++q)
            acc += g[static_cast<size_t>(q) * hw + ij] *
                   src[static_cast<size_t>(ch) * hw + q];
          gt[static_cast<size_t>(ch) * hw + ij] += acc;
        }
    }
  }
  if (g_fsrc) {
    for (int b = 0; b < n; ++b) {
      const double* tgt = ftgt + static_cast<size_t>(b) * c * hw;
      const double* g = g_out + static_cast<size_t>(b) * hw * hw;
      double* gs = g_fsrc + static_cast<size_t>(b) * c * hw;
      for (int ch = 0; ch < c; ++ch)
        for (int q = 0; q < hw; ++q) {
          double acc = 0.0;
          for (int ij = 0; ij < hw; ++ij)
            acc += g[static_cast<size_t>(q) * hw + ij] *
                   tgt[static_cast<size_t>(ch) * hw + ij];
          gs[static_cast<size_t>(ch) * hw + q] += acc;
        }
    }
  }
}

void bilinear_forward(const SampleDims& d, const double* src, const double* grid,
                      double* out) {
  for (int oy = 0; oy < d.h_out; ++oy)
    for (int ox = 0; ox < d.w_out; ++ox) {
      const size_t gi = (static_cast<size_t>(oy) * d.w_out + ox) * 2;
      const BilinearTaps t = bilinear_taps(grid[gi], grid[gi + 1], d.h, d.w);
      for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
          const double* plane =
              src + (static_cast<size_t>(n) * d.c + c) * d.h * d.w;
          double v = 0.0;
          if (t.inside) {
            const double v00 = tap(plane, d.h, d.w, t.y0, t.x0);
            const double v01 = tap(plane, d.h, d.w, t.y0, t.x0 + 1);
            const double v10 = tap(plane, d.h, d.w, t.y0 + 1, t.x0);
            const double v11 = tap(plane, d.h, d.w, t.y0 + 1, t.x0 + 1);
            v = (1.0 - t.wy) * ((1.0 - t.wx) * v00 + t.wx * v01) +
                t.wy * ((1.0 - t.wx) * v10 + t.wx * v11);
          }
          out[((static_cast<size_t>(n) * d.c + c) * d.h_out + oy) * d.w_out + ox] = v;
        }
    }
}

void bilinear_backward(const SampleDims& d, const double* src, const double* grid,
                       const double* g_out, double* g_src, double* g_grid) {
  if (g_src) {
    // Scatter, one (n,c) plane at a time; planes are disjoint.
    for (int n = 0; n < d.n; ++n)
      for (int c = 0; c < d.c; ++c) {
        double* gplane = g_src + (static_cast<size_t>(n) * d.c + c) * d.h * d.w;
        const double* gout_plane =
            g_out + (static_cast<size_t>(n) * d.c + c) * d.h_out * d.w_out;
        for (int oy = 0; oy < d.h_out; ++oy)
          for (int ox = 0; ox < d.w_out; ++ox) {
            const size_t gi = (static_cast<size_t>(oy) * d.w_out + ox) * 2;
            const BilinearTaps t = bilinear_taps(grid[gi], grid[gi + 1], d.h, d.w);
            if (!t.inside) continue;
            const double g = gout_plane[static_cast<size_t>(oy) * d.w_out + ox];
            const double w00 = (1.0 - t.wy) * (1.0 - t.wx);
            const double w01 = (1.0 - t.wy) * t.wx;
            const double w10 = t.wy * (1.0 - t.wx);
            const double w11 = t.wy * t.wx;
            auto add = [&](int y, int x, double wgt) {
              if (x >= 0 && x < d.w && y >= 0 && y < d.h)
                gplane[static_cast<size_t>(y) * d.w + x] += wgt * g;
            };
            add(t.y0, t.x0, w00);
            add(t.y0, t.x0 + 1, w01);
            add(t.y0 + 1, t.x0, w10);
            add(t.y0 + 1, t.x0 + 1, w11);
          }
      }
  }
  if (g_grid) {
    const double sx = 0.5 * static_cast<double>(d.w - 1);
    const double sy = 0.5 * static_cast<double>(d.h - 1);
    for (int oy = 0; oy < d.h_out; ++oy)
      for (int ox = 0; ox < d.w_out; ++ox) {
        const size_t gi = (static_cast<size_t>(oy) * d.w_out + ox) * 2;
        const BilinearTaps t = bilinear_taps(grid[gi], grid[gi + 1], d.h, d.w);
        if (!t.inside) continue;
        double acc_x = 0.0, acc_y = 0.0;
        for (int n = 0; n < d.n; ++n)
          for (int c = 0; c < d.c; ++c) {
            const double* plane =
                src + (static_cast<size_t>(n) * d.c + c) * d.h * d.w;
            const double g =
                g_out[((static_cast<size_t>(n) * d.c + c) * d.h_out + oy) * d.w_out + ox];
            const double v00 = tap(plane, d.h, d.w, t.y0, t.x0);
            const double v01 = tap(plane, d.h, d.w, t.y0, t.x0 + 1);
            const double v10 = tap(plane, d.h, d.w, t.y0 + 1, t.x0);
            const double v11 = tap(plane, d.h, d.w, t.y0 + 1, t.x0 + 1);
            acc_x += g * ((1.0 - t.wy) * (v01 - v00) + t.wy * (v11 - v10));
            acc_y += g * ((1.0 - t.wx) * (v10 - v00) + t.wx * (v11 - v01));
          }
        g_grid[gi] += acc_x * sx;
        g_grid[gi + 1] += acc_y * sy;
      }
  }
}

}  // namespace aeromatch::kernels::serial_impl
