#include "aeromatch/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "aeromatch/ppm.hpp"
#include "aeromatch/sampler.hpp"

namespace aeromatch {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Bilinearly upsampled lattice of uniform values; one octave of value noise.
void add_noise_layer(Image& img, SeededRng& rng, int cell, double weight) {
  const int nx = img.width / cell + 2;
  const int ny = img.height / cell + 2;
  std::vector<double> lattice(static_cast<size_t>(nx) * ny * 3);
  for (double& v : lattice) v = rng.uniform();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double fy = static_cast<double>(y) / cell;
        const double fx = static_cast<double>(x) / cell;
        const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        const double wy = fy - y0, wx = fx - x0;
        auto l = [&](int yy, int xx) {
          return lattice[(static_cast<size_t>(c) * ny + yy) * nx + xx];
        };
        const double v = (1 - wy) * ((1 - wx) * l(y0, x0) + wx * l(y0, x0 + 1)) +
                         wy * ((1 - wx) * l(y0 + 1, x0) + wx * l(y0 + 1, x0 + 1));
        img.at(c, y, x) += weight * v;
      }
}

void fill_rotated_rect(Image& img, double cx, double cy, double half_w,
                       double half_h, double angle, const double color[3]) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double radius = std::hypot(half_w, half_h);
  const int y_lo = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      if (std::fabs(u) <= half_w && std::fabs(v) <= half_h)
        for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = color[ch];
    }
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry,
                  const double color[3]) {
  const int y_lo = std::max(0, static_cast<int>(std::floor(cy - ry)));
  const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ry)));
  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - rx)));
  const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x) {
      const double u = (x - cx) / rx, v = (y - cy) / ry;
      if (u * u + v * v <= 1.0)
        for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = color[ch];
    }
}

void stamp_disk(Image& img, double cx, double cy, double radius,
                const double color[3]) {
  const int y_lo = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
  const int x_lo = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius)
        for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = color[ch];
    }
}

}  // namespace

Image gen_base_image(SeededRng& rng, int size) {
  if (size < 32) throw ShapeMismatch("gen_base_image: size must be >= 32");
  Image img = Image::filled(size, size, 0.0);

  add_noise_layer(img, rng, size / 4, 0.40);
  add_noise_layer(img, rng, size / 8, 0.25);
  add_noise_layer(img, rng, size / 16, 0.20);
  add_noise_layer(img, rng, 3, 0.15);

  const int rects = 10 + rng.uniform_int(6);
  for (int i = 0; i < rects; ++i) {
    const double cx = rng.uniform(0.05, 0.95) * size;
    const double cy = rng.uniform(0.05, 0.95) * size;
    const double hw = rng.uniform(size / 32.0, size / 9.0);
    const double hh = rng.uniform(size / 32.0, size / 9.0);
    const double angle = rng.uniform(-kPi / 4, kPi / 4);
    const double color[3] = {rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95),
                             rng.uniform(0.1, 0.95)};
    fill_rotated_rect(img, cx, cy, hw, hh, angle, color);
  }

  const int ellipses = 4 + rng.uniform_int(4);
  for (int i = 0; i < ellipses; ++i) {
    const double cx = rng.uniform(0.1, 0.9) * size;
    const double cy = rng.uniform(0.1, 0.9) * size;
    const double rx = rng.uniform(size / 24.0, size / 8.0);
    const double ry = rng.uniform(size / 24.0, size / 8.0);
    const double color[3] = {rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95),
                             rng.uniform(0.1, 0.95)};
    fill_ellipse(img, cx, cy, rx, ry, color);
  }

  const int tracks = 6 + rng.uniform_int(5);
  for (int i = 0; i < tracks; ++i) {
    double x = rng.uniform(0.0, 1.0) * size;
    double y = rng.uniform(0.0, 1.0) * size;
    double heading = rng.uniform(0.0, 2.0 * kPi);
    const double gray = rng.uniform(0.25, 0.85);
    const double color[3] = {gray, gray, gray};
    const double radius = rng.uniform(0.8, 1.6);
    const int steps = static_cast<int>(size * rng.uniform(0.6, 1.4));
    for (int t = 0; t < steps; ++t) {
      stamp_disk(img, x, y, radius, color);
      heading += rng.uniform(-0.15, 0.15);
      x += std::cos(heading);
      y += std::sin(heading);
      if (x < 0 || x >= size || y < 0 || y >= size) break;
    }
  }

  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image make_temporal_variant(const Image& img, SeededRng& rng,
                            const TemporalConfig& cfg) {
  const double s = cfg.strength;
  if (s < 0.0) throw Error("make_temporal_variant: negative strength");
  if (s == 0.0) return img;

  JitterRanges jr;
  jr.brightness_min = jr.contrast_min = jr.saturation_min = 1.0 - 0.25 * s;
  jr.brightness_max = jr.contrast_max = jr.saturation_max = 1.0 + 0.25 * s;
  Image out = color_jitter(img, rng, jr);

  const double amp = 0.04 * s;
  for (double& v : out.data) v = v + rng.uniform(-amp, amp);

  // Locally repainted patches: simulated land-cover change.
  const int patches = 1 + rng.uniform_int(3);
  for (int i = 0; i < patches; ++i) {
    const double cx = rng.uniform(0.1, 0.9) * img.width;
    const double cy = rng.uniform(0.1, 0.9) * img.height;
    const double hw = rng.uniform(img.width / 24.0, img.width / 10.0);
    const double hh = rng.uniform(img.height / 24.0, img.height / 10.0);
    const double color[3] = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                             rng.uniform(0.1, 0.9)};
    fill_rotated_rect(out, cx, cy, hw, hh, 0.0, color);
  }

  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

TrainingPair make_pair(const Image& first, const Image& second,
                       const AffineParams& gt, int crop) {
  if (first.height != second.height || first.width != second.width)
    throw ShapeMismatch("make_pair: image sizes differ");
  if (first.height != first.width)
    throw ShapeMismatch("make_pair: base images must be square");
  const int base = first.height;
  if (crop >= base || crop < 2) throw ShapeMismatch("make_pair: bad crop size");
  if ((base - crop) % 2 != 0)
    throw ShapeMismatch("make_pair: base and crop sizes must share parity");
  if (std::fabs(gt.det()) < kSingularDetTol)
    throw SingularTransform("make_pair: singular ground truth");

  // gt lives in the crop frame; in the base frame the translation shrinks by
  // the frame ratio while the linear part is unchanged.
  const double ratio = static_cast<double>(crop - 1) / (base - 1);
  AffineParams base_frame = gt;
  base_frame.tx = gt.tx * ratio;
  base_frame.ty = gt.ty * ratio;

  const WarpWithMask warped = warp_image_with_mask(second, base_frame);

  TrainingPair pair;
  pair.gt = gt;
  pair.source = center_crop(first, crop, crop);
  pair.target = center_crop(warped.image, crop, crop);

  const int off = (base - crop) / 2;
  for (int y = 0; y < crop; ++y)
    for (int x = 0; x < crop; ++x) {
      const double m = warped.mask[static_cast<size_t>(y + off) * base + (x + off)];
      if (m < 1.0 - 1e-9)
        throw PaddingLeak("make_pair: padding reached the crop at (" +
                          std::to_string(x) + "," + std::to_string(y) + ")");
    }
  return pair;
}

KeypointSet sample_keypoints(const Image& target, int k) {
  if (k < 1) throw Error("sample_keypoints: k must be >= 1");
  const int h = target.height, w = target.width;
  const size_t np = target.pixel_count();
  std::vector<double> lum(np);
  for (size_t p = 0; p < np; ++p)
    lum[p] = luma(target.data[p], target.data[np + p], target.data[2 * np + p]);

  auto l = [&](int y, int x) { return lum[static_cast<size_t>(y) * w + x]; };
  std::vector<double> gx(np, 0.0), gy(np, 0.0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      gx[static_cast<size_t>(y) * w + x] = 0.5 * (l(y, x + 1) - l(y, x - 1));
      gy[static_cast<size_t>(y) * w + x] = 0.5 * (l(y + 1, x) - l(y - 1, x));
    }

  constexpr int kMargin = 3;
  constexpr double kHarrisKappa = 0.04;
  constexpr double kScoreFloor = 1e-8;
  // Suppression radius scales with resolution: 4 px at the default 64.
  const double min_dist = std::max(2.0, std::min(h, w) / 16.0);
  std::vector<double> score(np, 0.0);
  for (int y = kMargin; y < h - kMargin; ++y)
    for (int x = kMargin; x < w - kMargin; ++x) {
      double sxx = 0, syy = 0, sxy = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const size_t i = static_cast<size_t>(y + dy) * w + (x + dx);
          sxx += gx[i] * gx[i];
          syy += gy[i] * gy[i];
          sxy += gx[i] * gy[i];
        }
      const double tr = sxx + syy;
      score[static_cast<size_t>(y) * w + x] =
          sxx * syy - sxy * sxy - kHarrisKappa * tr * tr;
    }

  struct Candidate {
    double score;
    int x, y;
  };
  std::vector<Candidate> cands;
  for (int y = kMargin; y < h - kMargin; ++y)
    for (int x = kMargin; x < w - kMargin; ++x) {
      const double sc = score[static_cast<size_t>(y) * w + x];
      if (sc <= kScoreFloor) continue;
      // Strict local maximum; plateaus yield no candidate.
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          if (score[static_cast<size_t>(y + dy) * w + (x + dx)] >= sc) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({sc, x, y});
    }

  std::sort(cands.begin(), cands.end(), [w](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.y * w + a.x < b.y * w + b.x;
  });

  KeypointSet out;
  for (const Candidate& c : cands) {
    bool ok = true;
    for (const auto& p : out.points) {
      const double dx = p[0] - c.x, dy = p[1] - c.y;
      if (dx * dx + dy * dy < min_dist * min_dist) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.points.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
    if (static_cast<int>(out.points.size()) == k) break;
  }
  if (static_cast<int>(out.points.size()) < k)
    throw InsufficientTexture("sample_keypoints: found " +
                              std::to_string(out.points.size()) + " of " +
                              std::to_string(k) + " keypoints");
  return out;
}

Dataset generate_dataset(const GenConfig& cfg) {
  if (cfg.count < 0) throw Error("generate_dataset: negative count");
  Dataset ds;
  ds.manifest.seed = cfg.seed;
  ds.manifest.image_size = cfg.size;
  ds.manifest.pair_count = cfg.count;
  ds.pairs.reserve(static_cast<size_t>(cfg.count));
  ds.keypoints.reserve(static_cast<size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    SeededRng rng(cfg.seed ^ static_cast<uint64_t>(i));
    const Image base = gen_base_image(rng, 2 * cfg.size);
    const Image variant = make_temporal_variant(base, rng, cfg.temporal);
    const AffineParams gt = random_affine(rng, cfg.ranges);
    TrainingPair pair = make_pair(base, variant, gt, cfg.size);
    pair.id = i;
    KeypointSet kps = sample_keypoints(pair.target, cfg.keypoints);
    kps.pair_id = i;
    ds.pairs.push_back(std::move(pair));
    ds.keypoints.push_back(std::move(kps));
  }
  return ds;
}

namespace {

std::string pair_name(int id, const char* kind) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d_%s.ppm", id, kind);
  return buf;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "pairs", ec);
  if (ec) throw IoError("cannot create '" + (dir / "pairs").string() + "'");

  nlohmann::ordered_json manifest;
  manifest["format_version"] = ds.manifest.format_version;
  manifest["root"] = ds.manifest.root;
  manifest["seed"] = ds.manifest.seed;
  manifest["image_size"] = ds.manifest.image_size;
  manifest["pair_count"] = ds.manifest.pair_count;
  {
    std::ofstream f(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write manifest.json");
    f << manifest.dump(2) << "\n";
  }

  std::ofstream gt(dir / "gt.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream kp(dir / "kp.jsonl", std::ios::binary | std::ios::trunc);
  if (!gt || !kp) throw IoError("cannot write dataset jsonl files");
  for (size_t i = 0; i < ds.pairs.size(); ++i) {
    const TrainingPair& p = ds.pairs[i];
    write_ppm(dir / "pairs" / pair_name(p.id, "src"), p.source);
    write_ppm(dir / "pairs" / pair_name(p.id, "tgt"), p.target);

    nlohmann::ordered_json g;
    g["id"] = p.id;
    g["theta"] = p.gt.entries();
    gt << g.dump() << "\n";

    const KeypointSet& ks = ds.keypoints.at(i);
    nlohmann::ordered_json kj;
    kj["id"] = ks.pair_id;
    kj["points"] = ks.points;
    kp << kj.dump() << "\n";
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw IoError("cannot open '" + manifest_path.string() + "'");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatViolation("manifest.json: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    ds.manifest.format_version = manifest.at("format_version").get<int>();
    ds.manifest.root = manifest.at("root").get<std::string>();
    ds.manifest.seed = manifest.at("seed").get<uint64_t>();
    ds.manifest.image_size = manifest.at("image_size").get<int>();
    ds.manifest.pair_count = manifest.at("pair_count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatViolation("manifest.json: " + std::string(e.what()));
  }
  if (ds.manifest.format_version != 1)
    throw FormatViolation("manifest.json: format_version " +
                          std::to_string(ds.manifest.format_version) +
                          ", this build reads version 1");

  auto read_jsonl = [&](const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    std::vector<nlohmann::json> lines;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      try {
        lines.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw FormatViolation(path.string() + " line " +
                              std::to_string(lines.size() + 1) + ": " + e.what());
      }
    }
    return lines;
  };

  const auto gt_lines = read_jsonl(dir / "gt.jsonl");
  const auto kp_lines = read_jsonl(dir / "kp.jsonl");
  if (static_cast<int>(gt_lines.size()) != ds.manifest.pair_count)
    throw FormatViolation("gt.jsonl has " + std::to_string(gt_lines.size()) +
                          " entries, manifest says " +
                          std::to_string(ds.manifest.pair_count));
  if (static_cast<int>(kp_lines.size()) != ds.manifest.pair_count)
    throw FormatViolation("kp.jsonl has " + std::to_string(kp_lines.size()) +
                          " entries, manifest says " +
                          std::to_string(ds.manifest.pair_count));

  for (int i = 0; i < ds.manifest.pair_count; ++i) {
    TrainingPair pair;
    try {
      pair.id = gt_lines[static_cast<size_t>(i)].at("id").get<int>();
      const auto theta =
          gt_lines[static_cast<size_t>(i)].at("theta").get<std::vector<double>>();
      if (theta.size() != 6)
        throw FormatViolation("gt.jsonl: theta needs 6 entries");
      pair.gt = AffineParams::from_entries(
          {theta[0], theta[1], theta[2], theta[3], theta[4], theta[5]});
    } catch (const nlohmann::json::exception& e) {
      throw FormatViolation("gt.jsonl entry " + std::to_string(i) + ": " + e.what());
    }
    if (std::fabs(pair.gt.det()) < kSingularDetTol)
      throw FormatViolation("gt.jsonl entry " + std::to_string(i) +
                            ": singular ground truth");

    const fs::path src = dir / "pairs" / pair_name(pair.id, "src");
    const fs::path tgt = dir / "pairs" / pair_name(pair.id, "tgt");
    if (!fs::exists(src) || !fs::exists(tgt))
      throw FormatViolation("manifest lists pair " + std::to_string(pair.id) +
                            " but its files are missing");
    pair.source = read_ppm(src);
    pair.target = read_ppm(tgt);
    if (pair.source.height != ds.manifest.image_size ||
        pair.source.width != ds.manifest.image_size ||
        pair.target.height != ds.manifest.image_size ||
        pair.target.width != ds.manifest.image_size)
      throw FormatViolation("pair " + std::to_string(pair.id) +
                            ": image size does not match manifest");

    KeypointSet ks;
    try {
      ks.pair_id = kp_lines[static_cast<size_t>(i)].at("id").get<int>();
      ks.points = kp_lines[static_cast<size_t>(i)]
                      .at("points")
                      .get<std::vector<std::array<double, 2>>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatViolation("kp.jsonl entry " + std::to_string(i) + ": " + e.what());
    }
    for (const auto& p : ks.points)
      if (p[0] < 0 || p[0] > ds.manifest.image_size - 1 || p[1] < 0 ||
          p[1] > ds.manifest.image_size - 1)
        throw FormatViolation("kp.jsonl entry " + std::to_string(i) +
                              ": keypoint out of bounds");

    ds.pairs.push_back(std::move(pair));
    ds.keypoints.push_back(std::move(ks));
  }
  return ds;
}

}  // namespace aeromatch
