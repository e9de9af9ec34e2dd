#include "aeromatch/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "aeromatch/kernels.hpp"

namespace aeromatch {

Image Image::filled(int h, int w, double value) {
  if (h <= 0 || w <= 0) throw ShapeMismatch("Image: non-positive extents");
  Image img;
  img.height = h;
  img.width = w;
  img.data.assign(static_cast<size_t>(3) * h * w, value);
  return img;
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from({1, 3, img.height, img.width}, img.data);
}

Tensor image_batch_to_tensor(std::span<const Image> imgs) {
  if (imgs.empty()) throw ShapeMismatch("image_batch_to_tensor: empty batch");
  const int h = imgs[0].height, w = imgs[0].width;
  Tensor t = Tensor::zeros({static_cast<int>(imgs.size()), 3, h, w});
  for (size_t i = 0; i < imgs.size(); ++i) {
    if (imgs[i].height != h || imgs[i].width != w)
      throw ShapeMismatch("image_batch_to_tensor: mixed image sizes");
    std::memcpy(t.data() + i * imgs[i].data.size(), imgs[i].data.data(),
                sizeof(double) * imgs[i].data.size());
  }
  return t;
}

Image tensor_to_image(const Tensor& t, int n) {
  if (t.shape().size() != 4 || t.dim(1) != 3)
    throw ShapeMismatch("tensor_to_image: need [N,3,H,W], got " +
                        shape_str(t.shape()));
  if (n < 0 || n >= t.dim(0)) throw ShapeMismatch("tensor_to_image: bad index");
  Image img = Image::filled(t.dim(2), t.dim(3), 0.0);
  const double* src = t.data() + static_cast<size_t>(n) * img.data.size();
  for (size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = std::clamp(src[i], 0.0, 1.0);
  return img;
}

Image center_crop(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0 || out_h > img.height || out_w > img.width)
    throw ShapeMismatch("center_crop: " + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + " -> " +
                        std::to_string(out_h) + "x" + std::to_string(out_w));
  const int oy = (img.height - out_h) / 2;
  const int ox = (img.width - out_w) / 2;
  Image out = Image::filled(out_h, out_w, 0.0);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) out.at(c, y, x) = img.at(c, y + oy, x + ox);
  return out;
}

double luma(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Image color_jitter(const Image& img, SeededRng& rng, const JitterRanges& ranges) {
  const double fb = rng.uniform(ranges.brightness_min, ranges.brightness_max);
  const double fc = rng.uniform(ranges.contrast_min, ranges.contrast_max);
  const double fs = rng.uniform(ranges.saturation_min, ranges.saturation_max);

  Image out = img;
  for (double& v : out.data) v = fb * v;

  double mean = 0.0;
  for (double v : out.data) mean += v;
  mean /= static_cast<double>(out.data.size());
  // f*v + (1-f)*ref keeps f == 1 an exact identity.
  for (double& v : out.data) v = fc * v + (1.0 - fc) * mean;

  const size_t np = out.pixel_count();
  for (size_t p = 0; p < np; ++p) {
    const double l =
        luma(out.data[p], out.data[np + p], out.data[2 * np + p]);
    for (int c = 0; c < 3; ++c) {
      double& v = out.data[static_cast<size_t>(c) * np + p];
      v = fs * v + (1.0 - fs) * l;
    }
  }
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h < 2 || out_w < 2) throw ShapeMismatch("resize_bilinear: extents < 2");
  if (out_h == img.height && out_w == img.width) return img;
  std::vector<double> grid(static_cast<size_t>(out_h) * out_w * 2);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const size_t i = (static_cast<size_t>(y) * out_w + x) * 2;
      grid[i] = -1.0 + 2.0 * x / (out_w - 1);
      grid[i + 1] = -1.0 + 2.0 * y / (out_h - 1);
    }
  const kernels::SampleDims d{1, 3, img.height, img.width, out_h, out_w};
  Image out = Image::filled(out_h, out_w, 0.0);
  kernels::bilinear_forward(d, img.data.data(), grid.data(), out.data.data());
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace aeromatch
