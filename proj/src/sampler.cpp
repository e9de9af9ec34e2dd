#include "aeromatch/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "aeromatch/kernels.hpp"

namespace aeromatch {

Tensor SampleGrid::to_tensor(bool requires_grad) const {
  return Tensor::from({height, width, 2}, coords, requires_grad);
}

SampleGrid affine_grid(const AffineParams& p, int h_out, int w_out) {
  if (h_out < 2 || w_out < 2) throw ShapeMismatch("affine_grid: extents must be >= 2");
  if (!p.finite()) throw Error("affine_grid: non-finite parameters");
  SampleGrid g;
  g.height = h_out;
  g.width = w_out;
  g.coords.resize(static_cast<size_t>(h_out) * w_out * 2);
  for (int y = 0; y < h_out; ++y) {
    const double gy = -1.0 + 2.0 * y / (h_out - 1);
    for (int x = 0; x < w_out; ++x) {
      const double gx = -1.0 + 2.0 * x / (w_out - 1);
      const NormalizedPoint q = apply(p, {gx, gy});
      const size_t i = (static_cast<size_t>(y) * w_out + x) * 2;
      g.coords[i] = q.x;
      g.coords[i + 1] = q.y;
    }
  }
  return g;
}

Tensor bilinear_sample(const Tensor& src, const SampleGrid& grid) {
  return ops::bilinear_sample(src, grid.to_tensor());
}

Image warp_image(const Image& img, const AffineParams& p) {
  if (std::fabs(p.det()) < kSingularDetTol)
    throw SingularTransform("warp_image: singular transform");
  const SampleGrid grid = affine_grid(p, img.height, img.width);
  const kernels::SampleDims d{1, 3, img.height, img.width, img.height, img.width};
  Image out = Image::filled(img.height, img.width, 0.0);
  kernels::bilinear_forward(d, img.data.data(), grid.coords.data(),
                            out.data.data());
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

WarpWithMask warp_image_with_mask(const Image& img, const AffineParams& p) {
  if (std::fabs(p.det()) < kSingularDetTol)
    throw SingularTransform("warp_image_with_mask: singular transform");
  const SampleGrid grid = affine_grid(p, img.height, img.width);
  WarpWithMask r;
  r.image = Image::filled(img.height, img.width, 0.0);
  const kernels::SampleDims d{1, 3, img.height, img.width, img.height, img.width};
  kernels::bilinear_forward(d, img.data.data(), grid.coords.data(),
                            r.image.data.data());
  for (double& v : r.image.data) v = std::clamp(v, 0.0, 1.0);

  const std::vector<double> ones(img.pixel_count(), 1.0);
  r.mask.assign(img.pixel_count(), 0.0);
  const kernels::SampleDims dm{1, 1, img.height, img.width, img.height, img.width};
  kernels::bilinear_forward(dm, ones.data(), grid.coords.data(), r.mask.data());
  return r;
}

}  // namespace aeromatch
