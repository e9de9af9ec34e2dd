#pragma once

namespace aeromatch::kernels {

/// Kernel backend. `parallel` uses OpenMP across output elements; the serial
/// implementation is the reference the parallel one is tested against.
///
/// Every kernel accumulates per output element in one fixed order and the
/// parallel variants only split work across output elements, so both
/// backends produce bitwise-identical results for any thread count.
enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);
bool parallel_available();

struct ConvDims {
  int n, c_in, h, w;
  int c_out, kh, kw;
  int stride, pad;
  int h_out, w_out;
};

// input [n,c_in,h,w], kernel [c_out,c_in,kh,kw], bias [c_out] (may be null).
void conv2d_forward(const ConvDims& d, const double* in, const double* kern,
                    const double* bias, double* out);
// Backward kernels accumulate (+=) into the gradient buffers.
void conv2d_backward_input(const ConvDims& d, const double* g_out,
                           const double* kern, double* g_in);
void conv2d_backward_kernel(const ConvDims& d, const double* g_out,
                            const double* in, double* g_kern);
void conv2d_backward_bias(const ConvDims& d, const double* g_out, double* g_bias);

// fsrc/ftgt [n,c,h,w]; out [n,h*w,h,w] with
//   out(q,i,j) = sum_c ftgt(c,i,j) * fsrc(c, q/w, q%w).
void correlation_forward(int n, int c, int h, int w, const double* fsrc,
                         const double* ftgt, double* out);
// Null gradient pointers skip that side.
void correlation_backward(int n, int c, int h, int w, const double* fsrc,
                          const double* ftgt, const double* g_out,
                          double* g_fsrc, double* g_ftgt);

struct SampleDims {
  int n, c, h, w;
  int h_out, w_out;
};

// Bilinear sampling on the normalized [-1,1] frame: grid [h_out,w_out,2]
// holds (x, y) source coordinates, pixel centres at -1 + 2j/(extent-1),
// coordinates outside [-1,1] tap zero padding.
void bilinear_forward(const SampleDims& d, const double* src, const double* grid,
                      double* out);
void bilinear_backward(const SampleDims& d, const double* src, const double* grid,
                       const double* g_out, double* g_src, double* g_grid);

}  // namespace aeromatch::kernels
