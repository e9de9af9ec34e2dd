#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aeromatch/affine.hpp"
#include "aeromatch/data.hpp"

namespace aeromatch {

struct PairPck {
  int pair_id = 0;
  std::vector<long> correct;  // one count per tau
  long total = 0;
};

struct PckReport {
  std::vector<double> taus;
  std::vector<long> correct;  // pooled per tau
  long total = 0;
  std::vector<PairPck> pairs;

  double score(size_t tau_index) const {
    return total == 0 ? 0.0
                      : static_cast<double>(correct.at(tau_index)) /
                            static_cast<double>(total);
  }
  std::string table() const;
  std::string json() const;
};

/// Counts keypoints whose images under `pred` and `gt` land strictly closer
/// than tau*max(h,w) pixels. Keypoints are target-frame pixels; both
/// transforms map them to the source frame where the distance is measured.
std::pair<long, long> pck_pair(const AffineParams& pred, const AffineParams& gt,
                               const KeypointSet& kps, int h, int w, double tau);

struct PckItem {
  int pair_id = 0;
  AffineParams pred;
  AffineParams gt;
  const KeypointSet* keypoints = nullptr;
  int h = 0, w = 0;
};

/// Pooled over all keypoints of all pairs (not mean of pair means).
PckReport pck_dataset(std::span<const PckItem> items, std::span<const double> taus);

}  // namespace aeromatch
