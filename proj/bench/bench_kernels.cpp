// Timing comparison of the serial reference kernels against the OpenMP
// backend. Build target: aeromatch_bench.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "aeromatch/kernels.hpp"
#include "aeromatch/rng.hpp"

namespace k = aeromatch::kernels;

namespace {

std::vector<double> random_buffer(size_t n, aeromatch::SeededRng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt < best) best = dt;
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s) {
  std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s);
}

void run_both(const char* name, const std::function<void()>& fn) {
  k::set_backend(k::Backend::serial);
  const double s = time_best_of(3, fn);
  k::set_backend(k::Backend::parallel);
  const double p = time_best_of(3, fn);
  report(name, s, p);
}

}  // namespace

int main() {
  aeromatch::SeededRng rng(7);
  if (!k::parallel_available())
    std::printf("note: built without OpenMP; 'parallel' runs the same loops\n");

  {
    const k::ConvDims d{4, 16, 64, 64, 32, 3, 3, 1, 1, 64, 64};
    const auto in = random_buffer(static_cast<size_t>(d.n) * d.c_in * d.h * d.w, rng);
    const auto kern =
        random_buffer(static_cast<size_t>(d.c_out) * d.c_in * d.kh * d.kw, rng);
    const auto bias = random_buffer(static_cast<size_t>(d.c_out), rng);
    std::vector<double> out(static_cast<size_t>(d.n) * d.c_out * d.h_out * d.w_out);
    run_both("conv2d forward 4x16x64x64", [&]() {
      k::conv2d_forward(d, in.data(), kern.data(), bias.data(), out.data());
    });

    std::vector<double> g_in(in.size());
    run_both("conv2d backward input", [&]() {
      std::fill(g_in.begin(), g_in.end(), 0.0);
      k::conv2d_backward_input(d, out.data(), kern.data(), g_in.data());
    });

    std::vector<double> g_k(kern.size());
    run_both("conv2d backward kernel", [&]() {
      std::fill(g_k.begin(), g_k.end(), 0.0);
      k::conv2d_backward_kernel(d, out.data(), in.data(), g_k.data());
    });
  }

  {
    const int n = 4, c = 64, h = 12, w = 12;
    const auto fs = random_buffer(static_cast<size_t>(n) * c * h * w, rng);
    const auto ft = random_buffer(static_cast<size_t>(n) * c * h * w, rng);
    std::vector<double> out(static_cast<size_t>(n) * h * w * h * w);
    run_both("correlation forward 12x12", [&]() {
      k::correlation_forward(n, c, h, w, fs.data(), ft.data(), out.data());
    });
    std::vector<double> gs(fs.size()), gt(ft.size());
    run_both("correlation backward", [&]() {
      std::fill(gs.begin(), gs.end(), 0.0);
      std::fill(gt.begin(), gt.end(), 0.0);
      k::correlation_backward(n, c, h, w, fs.data(), ft.data(), out.data(),
                              gs.data(), gt.data());
    });
  }

  {
    const k::SampleDims d{2, 3, 256, 256, 256, 256};
    const auto src = random_buffer(static_cast<size_t>(d.n) * d.c * d.h * d.w, rng);
    std::vector<double> grid(static_cast<size_t>(d.h_out) * d.w_out * 2);
    for (double& g : grid) g = rng.uniform(-1.0, 1.0);
    std::vector<double> out(static_cast<size_t>(d.n) * d.c * d.h_out * d.w_out);
    run_both("bilinear forward 256x256", [&]() {
      k::bilinear_forward(d, src.data(), grid.data(), out.data());
    });
    std::vector<double> g_src(src.size()), g_grid(grid.size());
    run_both("bilinear backward", [&]() {
      std::fill(g_src.begin(), g_src.end(), 0.0);
      std::fill(g_grid.begin(), g_grid.end(), 0.0);
      k::bilinear_backward(d, src.data(), grid.data(), out.data(), g_src.data(),
                           g_grid.data());
    });
  }
  return 0;
}
