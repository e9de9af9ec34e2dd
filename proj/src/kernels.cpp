#include "aeromatch/kernels.hpp"

#include <atomic>

#include "kernels_internal.hpp"

namespace aeromatch::kernels {

namespace {
std::atomic<Backend> g_backend{
#if AEROMATCH_HAVE_OPENMP
    Backend::parallel
#else
    Backend::serial
#endif
};
}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

bool parallel_available() {
#if AEROMATCH_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

#define AEROMATCH_DISPATCH(fn, ...)                  \
  do {                                               \
    if (backend() == Backend::parallel)              \
      parallel_impl::fn(__VA_ARGS__);                \
    else                                             \
      serial_impl::fn(__VA_ARGS__);                  \
  } while (0)

void conv2d_forward(const ConvDims& d, const double* in, const double* kern,
                    const double* bias, double* out) {
  AEROMATCH_DISPATCH(conv2d_forward, d, in, kern, bias, out);
}

void conv2d_backward_input(const ConvDims& d, const double* g_out,
                           const double* kern, double* g_in) {
  AEROMATCH_DISPATCH(conv2d_backward_input, d, g_out, kern, g_in);
}

void conv2d_backward_kernel(const ConvDims& d, const double* g_out,
                            const double* in, double* g_kern) {
  AEROMATCH_DISPATCH(conv2d_backward_kernel, d, g_out, in, g_kern);
}

void conv2d_backward_bias(const ConvDims& d, const double* g_out, double* g_bias) {
  AEROMATCH_DISPATCH(conv2d_backward_bias, d, g_out, g_bias);
}

void correlation_forward(int n, int c, int h, int w, const double* fsrc,
                         const double* ftgt, double* out) {
  AEROMATCH_DISPATCH(correlation_forward, n, c, h, w, fsrc, ftgt, out);
}

void correlation_backward(int n, int c, int h, int w, const double* fsrc,
                          const double* ftgt, const double* g_out,
                          double* g_fsrc, double* g_ftgt) {
  AEROMATCH_DISPATCH(correlation_backward, n, c, h, w, fsrc, ftgt, g_out, g_fsrc,
                     g_ftgt);
}

void bilinear_forward(const SampleDims& d, const double* src, const double* grid,
                      double* out) {
  AEROMATCH_DISPATCH(bilinear_forward, d, src, grid, out);
}

void bilinear_backward(const SampleDims& d, const double* src, const double* grid,
                       const double* g_out, double* g_src, double* g_grid) {
  AEROMATCH_DISPATCH(bilinear_backward, d, src, grid, g_out, g_src, g_grid);
}

#undef AEROMATCH_DISPATCH

}  // namespace aeromatch::kernels
