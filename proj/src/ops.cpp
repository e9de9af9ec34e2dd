#include "aeromatch/ops.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "aeromatch/kernels.hpp"

namespace aeromatch::ops {

namespace {

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void expect_rank(const Tensor& t, size_t rank, const char* op) {
  if (t.shape().size() != rank)
    throw ShapeMismatch(std::string(op) + ": expected rank " +
                        std::to_string(rank) + ", got " + shape_str(t.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad) {
  expect_rank(input, 4, "conv2d");
  expect_rank(kernel, 4, "conv2d");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int k = kernel.dim(0), kc = kernel.dim(1), kh = kernel.dim(2),
            kw = kernel.dim(3);
  if (kc != c)
    throw ShapeMismatch("conv2d: kernel channels " + std::to_string(kc) +
                        " vs input channels " + std::to_string(c));
  if (kh % 2 == 0 || kw % 2 == 0)
    throw ShapeMismatch("conv2d: kernel extents must be odd");
  if (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != k))
    throw ShapeMismatch("conv2d: bias shape " + shape_str(bias.shape()));
  if (stride < 1 || pad < 0) throw ShapeMismatch("conv2d: bad stride/pad");
  if (h + 2 * pad < kh || w + 2 * pad < kw ||
      (h + 2 * pad - kh) % stride != 0 || (w + 2 * pad - kw) % stride != 0)
    throw ShapeMismatch("conv2d: output extents are not integral");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;

  const kernels::ConvDims d{n, c, h, w, k, kh, kw, stride, pad, ho, wo};
  const bool rec = recording({&input, &kernel, &bias});
  Tensor out = Tensor::zeros({n, k, ho, wo}, rec);
  kernels::conv2d_forward(d, input.data(), kernel.data(),
                          bias.defined() ? bias.data() : nullptr, out.data());
  guard_finite("conv2d", out);
  if (rec) {
    Tape::active()->record("conv2d", {out}, [=]() {
      const double* g = out.grad();
      if (input.requires_grad())
        kernels::conv2d_backward_input(d, g, kernel.data(), input.grad());
      if (kernel.requires_grad())
        kernels::conv2d_backward_kernel(d, g, input.data(), kernel.grad());
      if (bias.defined() && bias.requires_grad())
        kernels::conv2d_backward_bias(d, g, bias.grad());
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros(x.shape(), rec);
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  guard_finite("relu", out);
  if (rec) {
    Tape::active()->record("relu", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int64_t i = 0; i < n; ++i)
        if (x.data()[i] > 0.0) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

Tensor maxpool2(const Tensor& x) {
  expect_rank(x, 4, "maxpool2");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeMismatch("maxpool2: odd extents " + shape_str(x.shape()));
  const int ho = h / 2, wo = w / 2;
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros({n, c, ho, wo}, rec);
  auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
  for (int b = 0; b < n * c; ++b) {
    const double* plane = x.data() + static_cast<size_t>(b) * h * w;
    double* oplane = out.data() + static_cast<size_t>(b) * ho * wo;
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        int64_t best = static_cast<int64_t>(2 * oy) * w + 2 * ox;
        double bv = plane[best];
        // Row-major scan; strict > keeps the first maximum on ties.
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int64_t idx = static_cast<int64_t>(2 * oy + dy) * w + 2 * ox + dx;
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
        oplane[static_cast<size_t>(oy) * wo + ox] = bv;
        (*argmax)[static_cast<size_t>(b) * ho * wo + oy * wo + ox] =
            static_cast<int64_t>(b) * h * w + best;
      }
  }
  guard_finite("maxpool2", out);
  if (rec) {
    Tape::active()->record("maxpool2", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int64_t i = 0; i < out.size(); ++i)
        x.grad()[(*argmax)[static_cast<size_t>(i)]] += out.grad()[i];
    });
  }
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  expect_rank(x, 4, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros({n, c}, rec);
  for (int b = 0; b < n * c; ++b) {
    const double* plane = x.data() + static_cast<size_t>(b) * h * w;
    double acc = 0.0;
    for (int i = 0; i < h * w; ++i) acc += plane[i];
    out.data()[b] = acc * inv;
  }
  guard_finite("global_avg_pool", out);
  if (rec) {
    Tape::active()->record("global_avg_pool", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int b = 0; b < n * c; ++b) {
        const double g = out.grad()[b] * inv;
        double* gplane = x.grad() + static_cast<size_t>(b) * h * w;
        for (int i = 0; i < h * w; ++i) gplane[i] += g;
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank(x, 2, "linear");
  expect_rank(w, 2, "linear");
  expect_rank(b, 1, "linear");
  const int n = x.dim(0), d = x.dim(1), m = w.dim(1);
  if (w.dim(0) != d || b.dim(0) != m)
    throw ShapeMismatch("linear: x " + shape_str(x.shape()) + " w " +
                        shape_str(w.shape()) + " b " + shape_str(b.shape()));
  const bool rec = recording({&x, &w, &b});
  Tensor out = Tensor::zeros({n, m}, rec);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = b.data()[j];
      for (int t = 0; t < d; ++t) acc += x.data()[i * d + t] * w.data()[t * m + j];
      out.data()[i * m + j] = acc;
    }
  guard_finite("linear", out);
  if (rec) {
    Tape::active()->record("linear", {out}, [=]() {
      const double* g = out.grad();
      if (x.requires_grad()) {
        for (int i = 0; i < n; ++i)
          for (int t = 0; t < d; ++t) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += g[i * m + j] * w.data()[t * m + j];
            x.grad()[i * d + t] += acc;
          }
      }
      if (w.requires_grad()) {
        for (int t = 0; t < d; ++t)
          for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += x.data()[i * d + t] * g[i * m + j];
            w.grad()[t * m + j] += acc;
          }
      }
      if (b.requires_grad()) {
        for (int j = 0; j < m; ++j) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i) acc += g[i * m + j];
          b.grad()[j] += acc;
        }
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros(x.shape(), rec);
  for (int64_t i = 0; i < x.size(); ++i)
    out.data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  guard_finite("sigmoid", out);
  if (rec) {
    Tape::active()->record("sigmoid", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int64_t i = 0; i < out.size(); ++i) {
        const double y = out.data()[i];
        x.grad()[i] += out.grad()[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

Tensor l2_normalize_channels(const Tensor& x, double eps) {
  expect_rank(x, 4, "l2_normalize_channels");
  if (!(eps > 0.0)) throw Error("l2_normalize_channels: eps must be positive");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int hw = h * w;
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros(x.shape(), rec);
  auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * hw);
  for (int b = 0; b < n; ++b)
    for (int p = 0; p < hw; ++p) {
      const size_t base = static_cast<size_t>(b) * c * hw + p;
      double q = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double v = x.data()[base + static_cast<size_t>(ch) * hw];
        q += v * v;
      }
      const double s = std::sqrt(q + eps);
      (*norms)[static_cast<size_t>(b) * hw + p] = s;
      for (int ch = 0; ch < c; ++ch)
        out.data()[base + static_cast<size_t>(ch) * hw] =
            x.data()[base + static_cast<size_t>(ch) * hw] / s;
    }
  guard_finite("l2_normalize_channels", out);
  if (rec) {
    Tape::active()->record("l2_normalize_channels", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int b = 0; b < n; ++b)
        for (int p = 0; p < hw; ++p) {
          const size_t base = static_cast<size_t>(b) * c * hw + p;
          const double s = (*norms)[static_cast<size_t>(b) * hw + p];
          double dot = 0.0;
          for (int ch = 0; ch < c; ++ch) {
            const size_t i = base + static_cast<size_t>(ch) * hw;
            dot += out.grad()[i] * out.data()[i];
          }
          for (int ch = 0; ch < c; ++ch) {
            const size_t i = base + static_cast<size_t>(ch) * hw;
            x.grad()[i] += (out.grad()[i] - out.data()[i] * dot) / s;
          }
        }
    });
  }
  return out;
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
  expect_rank(x, 4, "channel_scale");
  expect_rank(s, 2, "channel_scale");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (s.dim(0) != n || s.dim(1) != c)
    throw ShapeMismatch("channel_scale: scores " + shape_str(s.shape()) +
                        " for input " + shape_str(x.shape()));
  const int hw = h * w;
  const bool rec = recording({&x, &s});
  Tensor out = Tensor::zeros(x.shape(), rec);
  for (int b = 0; b < n * c; ++b) {
    const double f = s.data()[b];
    const double* plane = x.data() + static_cast<size_t>(b) * hw;
    double* oplane = out.data() + static_cast<size_t>(b) * hw;
    for (int i = 0; i < hw; ++i) oplane[i] = plane[i] * f;
  }
  guard_finite("channel_scale", out);
  if (rec) {
    Tape::active()->record("channel_scale", {out}, [=]() {
      for (int b = 0; b < n * c; ++b) {
        const double* gplane = out.grad() + static_cast<size_t>(b) * hw;
        if (x.requires_grad()) {
          const double f = s.data()[b];
          double* gx = x.grad() + static_cast<size_t>(b) * hw;
          for (int i = 0; i < hw; ++i) gx[i] += gplane[i] * f;
        }
        if (s.requires_grad()) {
          const double* plane = x.data() + static_cast<size_t>(b) * hw;
          double acc = 0.0;
          for (int i = 0; i < hw; ++i) acc += gplane[i] * plane[i];
          s.grad()[b] += acc;
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeMismatch("add: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  const bool rec = recording({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), rec);
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  guard_finite("add", out);
  if (rec) {
    Tape::active()->record("add", {out}, [=]() {
      for (int64_t i = 0; i < out.size(); ++i) {
        if (a.requires_grad()) a.grad()[i] += out.grad()[i];
        if (b.requires_grad()) b.grad()[i] += out.grad()[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeMismatch("mul: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  const bool rec = recording({&a, &b});
  Tensor out = Tensor::zeros(a.shape(), rec);
  for (int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  guard_finite("mul", out);
  if (rec) {
    Tape::active()->record("mul", {out}, [=]() {
      for (int64_t i = 0; i < out.size(); ++i) {
        if (a.requires_grad()) a.grad()[i] += out.grad()[i] * b.data()[i];
        if (b.requires_grad()) b.grad()[i] += out.grad()[i] * a.data()[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros(x.shape(), rec);
  for (int64_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * factor;
  guard_finite("scale", out);
  if (rec) {
    Tape::active()->record("scale", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int64_t i = 0; i < out.size(); ++i) x.grad()[i] += out.grad()[i] * factor;
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros({1}, rec);
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  out.data()[0] = acc;
  guard_finite("sum", out);
  if (rec) {
    Tape::active()->record("sum", {out}, [=]() {
      if (!x.requires_grad()) return;
      const double g = out.grad()[0];
      for (int64_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw ShapeMismatch("reshape: " + shape_str(x.shape()) + " -> " +
                        shape_str(shape));
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros(std::move(shape), rec);
  std::memcpy(out.data(), x.data(), sizeof(double) * static_cast<size_t>(x.size()));
  if (rec) {
    Tape::active()->record("reshape", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int64_t i = 0; i < out.size(); ++i) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

Tensor row(const Tensor& x, int i) {
  expect_rank(x, 2, "row");
  const int n = x.dim(0), d = x.dim(1);
  if (i < 0 || i >= n) throw ShapeMismatch("row: index out of range");
  const bool rec = recording({&x});
  Tensor out = Tensor::zeros({d}, rec);
  std::memcpy(out.data(), x.data() + static_cast<size_t>(i) * d, sizeof(double) * d);
  if (rec) {
    Tape::active()->record("row", {out}, [=]() {
      if (!x.requires_grad()) return;
      for (int j = 0; j < d; ++j)
        x.grad()[static_cast<size_t>(i) * d + j] += out.grad()[j];
    });
  }
  return out;
}

Tensor raw_correlation(const Tensor& fsrc, const Tensor& ftgt) {
  expect_rank(fsrc, 4, "raw_correlation");
  if (fsrc.shape() != ftgt.shape())
    throw ShapeMismatch("raw_correlation: " + shape_str(fsrc.shape()) + " vs " +
                        shape_str(ftgt.shape()));
  const int n = fsrc.dim(0), c = fsrc.dim(1), h = fsrc.dim(2), w = fsrc.dim(3);
  const bool rec = recording({&fsrc, &ftgt});
  Tensor out = Tensor::zeros({n, h * w, h, w}, rec);
  kernels::correlation_forward(n, c, h, w, fsrc.data(), ftgt.data(), out.data());
  guard_finite("raw_correlation", out);
  if (rec) {
    Tape::active()->record("raw_correlation", {out}, [=]() {
      kernels::correlation_backward(
          n, c, h, w, fsrc.data(), ftgt.data(), out.grad(),
          fsrc.requires_grad() ? fsrc.grad() : nullptr,
          ftgt.requires_grad() ? ftgt.grad() : nullptr);
    });
  }
  return out;
}

Tensor bilinear_sample(const Tensor& src, const Tensor& grid) {
  expect_rank(src, 4, "bilinear_sample");
  expect_rank(grid, 3, "bilinear_sample");
  if (grid.dim(2) != 2)
    throw ShapeMismatch("bilinear_sample: grid " + shape_str(grid.shape()));
  guard_finite("bilinear_sample(grid)", grid);
  const kernels::SampleDims d{src.dim(0), src.dim(1), src.dim(2), src.dim(3),
                              grid.dim(0), grid.dim(1)};
  const bool rec = recording({&src, &grid});
  Tensor out = Tensor::zeros({d.n, d.c, d.h_out, d.w_out}, rec);
  kernels::bilinear_forward(d, src.data(), grid.data(), out.data());
  guard_finite("bilinear_sample", out);
  if (rec) {
    Tape::active()->record("bilinear_sample", {out}, [=]() {
      kernels::bilinear_backward(d, src.data(), grid.data(), out.grad(),
                                 src.requires_grad() ? src.grad() : nullptr,
                                 grid.requires_grad() ? grid.grad() : nullptr);
    });
  }
  return out;
}

}  // namespace aeromatch::ops
