#pragma once

#include <span>
#include <vector>

#include "aeromatch/rng.hpp"
#include "aeromatch/tensor.hpp"

namespace aeromatch {

/// RGB image, values in [0,1], planar channel-major storage (c, y, x).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static Image filled(int h, int w, double value);

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

Tensor image_to_tensor(const Image& img);                        // [1,3,H,W]
Tensor image_batch_to_tensor(std::span<const Image> imgs);       // [N,3,H,W]
Image tensor_to_image(const Tensor& t, int n = 0);               // clamps to [0,1]

/// Centered sub-rectangle, offset floor((in-out)/2). out <= in required.
Image center_crop(const Image& img, int out_h, int out_w);

struct JitterRanges {
  double brightness_min = 0.6, brightness_max = 1.4;
  double contrast_min = 0.6, contrast_max = 1.4;
  double saturation_min = 0.6, saturation_max = 1.4;
};

/// Brightness (multiply), contrast (blend with the per-image mean), then
/// saturation (blend with per-pixel luma), factors drawn uniformly in that
/// order; output clamped to [0,1]. Factor 1 leaves values bit-identical.
Image color_jitter(const Image& img, SeededRng& rng, const JitterRanges& ranges = {});

/// ITU BT.601 luma weights (0.299, 0.587, 0.114).
double luma(double r, double g, double b);

Image resize_bilinear(const Image& img, int out_h, int out_w);

}  // namespace aeromatch
