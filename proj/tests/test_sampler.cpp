#include <doctest.h>

#include <cmath>

#include "aeromatch/data.hpp"
#include "aeromatch/gradcheck.hpp"
#include "aeromatch/sampler.hpp"

using namespace aeromatch;
namespace o = ops;

namespace {

Image random_image(int h, int w, SeededRng& rng) {
  Image img = Image::filled(h, w, 0.0);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

double psnr(const Image& a, const Image& b, int margin) {
  REQUIRE(a.height == b.height);
  double mse = 0.0;
  long count = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = margin; y < a.height - margin; ++y)
      for (int x = margin; x < a.width - margin; ++x) {
        const double d = a.at(c, y, x) - b.at(c, y, x);
        mse += d * d;
        ++count;
      }
  mse /= static_cast<double>(count);
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_CASE("affine_grid: identity gives the regular lattice") {
  const SampleGrid g = affine_grid(AffineParams::identity(), 4, 5);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      const NormalizedPoint p = g.at(y, x);
      CHECK(p.x == -1.0 + 2.0 * x / 4);
      CHECK(p.y == -1.0 + 2.0 * y / 3);
    }
}

TEST_CASE("affine_grid: pure translation shifts every coordinate") {
  const SampleGrid base = affine_grid(AffineParams::identity(), 6, 6);
  const SampleGrid moved = affine_grid({1, 0, 0.1, 0, 1, 0}, 6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      CHECK(moved.at(y, x).x ==
            doctest::Approx(base.at(y, x).x + 0.1).epsilon(1e-15));
      CHECK(moved.at(y, x).y == base.at(y, x).y);
    }
}

TEST_CASE("affine_grid matches apply() pointwise") {
  SeededRng rng(7);
  for (int i = 0; i < 20; ++i) {
    const AffineParams p = random_affine(rng);
    const SampleGrid g = affine_grid(p, 8, 9);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 9; ++x) {
        const NormalizedPoint lattice{-1.0 + 2.0 * x / 8, -1.0 + 2.0 * y / 7};
        const NormalizedPoint expect = apply(p, lattice);
        CHECK(std::fabs(g.at(y, x).x - expect.x) <= 1e-12);
        CHECK(std::fabs(g.at(y, x).y - expect.y) <= 1e-12);
      }
  }
}

TEST_CASE("affine_grid composition property") {
  SeededRng rng(8);
  for (int i = 0; i < 20; ++i) {
    const AffineParams p = random_affine(rng);
    const AffineParams q = random_affine(rng);
    const SampleGrid composed = affine_grid(compose(p, q), 7, 7);
    const SampleGrid inner = affine_grid(q, 7, 7);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) {
        const NormalizedPoint via = apply(p, inner.at(y, x));
        CHECK(std::fabs(composed.at(y, x).x - via.x) <= 1e-10);
        CHECK(std::fabs(composed.at(y, x).y - via.y) <= 1e-10);
      }
  }
}

TEST_CASE("affine_grid rejects degenerate extents") {
  CHECK_THROWS_AS(affine_grid(AffineParams::identity(), 1, 8), ShapeMismatch);
}

TEST_CASE("bilinear_sample: identity grid reproduces the input bit-exactly") {
  SeededRng rng(9);
  for (const int size : {5, 8, 20, 64}) {
    Tensor src = Tensor::zeros({1, 2, size, size});
    for (int64_t i = 0; i < src.size(); ++i) src.data()[i] = rng.uniform();
    const SampleGrid g = affine_grid(AffineParams::identity(), size, size);
    Tensor out = bilinear_sample(src, g);
    for (int64_t i = 0; i < src.size(); ++i) CHECK(out.data()[i] == src.data()[i]);
  }
}

TEST_CASE("bilinear_sample: midpoint of a 0/1 quad is one half") {
  Tensor src = Tensor::from({1, 1, 2, 2}, {0, 0, 1, 1});
  Tensor grid = Tensor::from({1, 1, 2}, {0.0, 0.0});  // centre of the quad
  Tensor out = o::bilinear_sample(src, grid);
  CHECK(out.data()[0] == 0.5);
}

TEST_CASE("bilinear_sample: coordinates outside [-1,1] read zero padding") {
  Tensor src = Tensor::full({1, 1, 4, 4}, 1.0);
  Tensor grid = Tensor::from({1, 3, 2}, {-3.0, 0.0, 3.0, 3.0, 0.0, -3.0});
  Tensor out = o::bilinear_sample(src, grid);
  for (int i = 0; i < 3; ++i) CHECK(out.data()[i] == 0.0);
}

TEST_CASE("bilinear_sample gradients match finite differences") {
  SeededRng rng(10);
  Tensor src = Tensor::zeros({1, 2, 5, 5}, true);
  for (int64_t i = 0; i < src.size(); ++i) src.data()[i] = rng.uniform();
  Tensor grid = Tensor::zeros({3, 3, 2}, true);
  for (int64_t i = 0; i < grid.size(); ++i) {
    for (;;) {
      const double c = rng.uniform(-0.9, 0.9);
      const double f = (c + 1.0) * 0.5 * 4.0;
      if (std::fabs(f - std::round(f)) > 0.05) {
        grid.data()[i] = c;
        break;
      }
    }
  }
  Tensor proj = Tensor::zeros({1, 2, 3, 3});
  for (int64_t i = 0; i < proj.size(); ++i) proj.data()[i] = rng.uniform(-1, 1);
  auto fwd = [&]() { return o::sum(o::mul(o::bilinear_sample(src, grid), proj)); };
  const double err =
      finite_diff_max_rel_err(fwd, std::vector<Tensor>{src, grid});
  CHECK(err < 1e-5);
}

TEST_CASE("warp_image: identity is pixel-identical") {
  SeededRng rng(11);
  const Image img = random_image(32, 32, rng);
  const Image warped = warp_image(img, AffineParams::identity());
  CHECK(warped.data == img.data);
}

TEST_CASE("warp_image: rejects singular transforms") {
  const Image img = Image::filled(8, 8, 0.5);
  CHECK_THROWS_AS(warp_image(img, {0, 0, 0, 0, 0, 0}), SingularTransform);
}

TEST_CASE("warp_image: round trip PSNR above 30 dB on the interior") {
  // Two preconditions of the round-trip bound: band-limited content (double
  // resampling error scales with curvature) and transforms mild enough that
  // the compared interior never leaves the canvas in between (regions that
  // sample the zero padding cannot be recovered by the inverse warp).
  SeededRng rng(12);
  Image coarse = random_image(16, 16, rng);
  const Image img = resize_bilinear(coarse, 64, 64);
  AffineRanges mild;
  mild.rotation_deg = 8;
  mild.scale_min = 0.95;
  mild.scale_max = 1.05;
  mild.shear = 0.02;
  mild.translation = 0.03;
  for (int i = 0; i < 5; ++i) {
    const AffineParams p = random_affine(rng, mild);
    const Image there = warp_image(img, p);
    const Image back = warp_image(there, invert(p));
    // interior 80% crop: margin of 10% each side
    CHECK(psnr(img, back, 64 / 10) > 30.0);
  }
}

TEST_CASE("warp_image: one-pixel-pitch translation shifts a delta image") {
  const int size = 9;
  Image img = Image::filled(size, size, 0.0);
  img.at(0, 4, 4) = img.at(1, 4, 4) = img.at(2, 4, 4) = 1.0;
  // Output pixel x reads source at x + pitch: content moves one pixel left.
  const double pitch = 2.0 / (size - 1);
  const Image moved = warp_image(img, {1, 0, pitch, 0, 1, 0});
  CHECK(moved.at(0, 4, 3) == 1.0);
  CHECK(moved.at(0, 4, 4) == 0.0);
  const Image moved_y = warp_image(img, {1, 0, 0, 0, 1, pitch});
  CHECK(moved_y.at(0, 3, 4) == 1.0);
}

TEST_CASE("warp_image preserves the [0,1] range") {
  SeededRng rng(14);
  const Image img = random_image(24, 24, rng);
  for (int i = 0; i < 10; ++i) {
    const Image warped = warp_image(img, random_affine(rng));
    for (double v : warped.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("center_crop closed forms") {
  SeededRng rng(15);
  const Image img = random_image(6, 6, rng);
  const Image full = center_crop(img, 6, 6);
  CHECK(full.data == img.data);

  Image grid = Image::filled(4, 4, 0.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) grid.at(0, y, x) = y * 4 + x;
  const Image crop = center_crop(grid, 2, 2);
  CHECK(crop.at(0, 0, 0) == 5.0);   // row 1, col 1
  CHECK(crop.at(0, 0, 1) == 6.0);
  CHECK(crop.at(0, 1, 0) == 9.0);
  CHECK(crop.at(0, 1, 1) == 10.0);

  CHECK_THROWS_AS(center_crop(img, 8, 4), ShapeMismatch);
}

TEST_CASE("color_jitter: collapsed ranges are an exact identity") {
  SeededRng rng(16);
  const Image img = random_image(16, 16, rng);
  JitterRanges unit;
  unit.brightness_min = unit.brightness_max = 1.0;
  unit.contrast_min = unit.contrast_max = 1.0;
  unit.saturation_min = unit.saturation_max = 1.0;
  SeededRng jrng(1);
  const Image out = color_jitter(img, jrng, unit);
  CHECK(out.data == img.data);
}

TEST_CASE("color_jitter: forced brightness 0.5 halves a constant image") {
  const Image img = Image::filled(8, 8, 0.8);
  JitterRanges r;
  r.brightness_min = r.brightness_max = 0.5;
  r.contrast_min = r.contrast_max = 1.0;
  r.saturation_min = r.saturation_max = 1.0;
  SeededRng rng(2);
  const Image out = color_jitter(img, rng, r);
  for (double v : out.data) CHECK(v == 0.4);
}

TEST_CASE("color_jitter: deterministic per seed, bounded, same dimensions") {
  SeededRng rng(17);
  const Image img = random_image(20, 20, rng);
  SeededRng a(5), b(5);
  const Image ja = color_jitter(img, a);
  const Image jb = color_jitter(img, b);
  CHECK(ja.data == jb.data);
  CHECK(ja.height == img.height);
  CHECK(ja.width == img.width);
  for (double v : ja.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("resize_bilinear: same size is the identity") {
  SeededRng rng(18);
  const Image img = random_image(16, 16, rng);
  const Image same = resize_bilinear(img, 16, 16);
  CHECK(same.data == img.data);
  const Image up = resize_bilinear(img, 32, 32);
  CHECK(up.height == 32);
  CHECK(up.width == 32);
}
