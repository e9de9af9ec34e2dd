#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "aeromatch/affine.hpp"
#include "aeromatch/image.hpp"

namespace aeromatch {

struct TrainingPair {
  int id = 0;
  Image source;
  Image target;
  AffineParams gt;
};

/// Keypoints in target-frame pixel coordinates (x, y).
struct KeypointSet {
  int pair_id = 0;
  std::vector<std::array<double, 2>> points;
};

struct DatasetManifest {
  int format_version = 1;
  std::string root = ".";  // dataset root, relative to the manifest
  uint64_t seed = 0;
  int image_size = 64;
  int pair_count = 0;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<TrainingPair> pairs;
  std::vector<KeypointSet> keypoints;
};

/// Seeded procedural texture with matchable structure: layered smooth noise,
/// rotated rectangles and ellipses, polyline tracks. size >= 32.
Image gen_base_image(SeededRng& rng, int size);

struct TemporalConfig {
  /// 0 disables every change; 1 is the default appearance drift.
  double strength = 1.0;
};

/// Simulated revisit of the same scene: color jitter, additive noise and a
/// few locally repainted patches. Geometry is untouched.
Image make_temporal_variant(const Image& img, SeededRng& rng,
                            const TemporalConfig& cfg = {});

/// Builds one training pair: source = center crop of `first`, target = center
/// crop of `second` warped by `gt` (translation rescaled to the base frame so
/// that `gt` holds exactly between the two crops). Throws PaddingLeak if any
/// padding survives the crop. Requires (base - crop) even.
TrainingPair make_pair(const Image& first, const Image& second,
                       const AffineParams& gt, int crop);

/// Top-k Harris-corner maxima of the target, spread by greedy non-max
/// suppression. Deterministic: score-sorted scan, first index wins ties.
KeypointSet sample_keypoints(const Image& target, int k);

struct GenConfig {
  uint64_t seed = 0;
  int count = 0;
  int size = 64;
  int keypoints = 20;
  AffineRanges ranges;
  TemporalConfig temporal;
};

/// Pure function of the config: same config, same dataset, bit for bit.
/// Per-pair streams are seeded with seed ^ pair_id.
Dataset generate_dataset(const GenConfig& cfg);

// On-disk layout: manifest.json, pairs/NNNNNN_src.ppm, pairs/NNNNNN_tgt.ppm,
// gt.jsonl ({"id":N,"theta":[6 floats]}), kp.jsonl ({"id":N,"points":[[x,y],..]}).
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace aeromatch
