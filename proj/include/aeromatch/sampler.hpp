#pragma once

#include "aeromatch/affine.hpp"
#include "aeromatch/image.hpp"
#include "aeromatch/ops.hpp"

namespace aeromatch {

/// Per-output-pixel source coordinates in the normalized frame.
struct SampleGrid {
  int height = 0;
  int width = 0;
  std::vector<double> coords;  // [H][W][2], (x, y)

  Tensor to_tensor(bool requires_grad = false) const;
  NormalizedPoint at(int y, int x) const {
    const size_t i = (static_cast<size_t>(y) * width + x) * 2;
    return {coords[i], coords[i + 1]};
  }
};

/// Regular H_out x W_out lattice over [-1,1]^2 (pixel-center convention,
/// x_j = -1 + 2j/(W-1)) transformed by p. Extents must be >= 2.
SampleGrid affine_grid(const AffineParams& p, int h_out, int w_out);

Tensor bilinear_sample(const Tensor& src, const SampleGrid& grid);

/// Samples the image at affine_grid(p, H, W): the output at pixel (i,j) reads
/// the input at p(lattice_ij). Out-of-range samples fade to zero padding.
/// Requires p invertible; output clamped to [0,1].
Image warp_image(const Image& img, const AffineParams& p);

struct WarpWithMask {
  Image image;
  /// Per output pixel: interpolated coverage of the source footprint, 1 where
  /// no padding was touched.
  std::vector<double> mask;
};

WarpWithMask warp_image_with_mask(const Image& img, const AffineParams& p);

}  // namespace aeromatch
