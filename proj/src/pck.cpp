#include "aeromatch/pck.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace aeromatch {

std::pair<long, long> pck_pair(const AffineParams& pred, const AffineParams& gt,
                               const KeypointSet& kps, int h, int w, double tau) {
  if (!(tau > 0.0)) throw Error("pck_pair: tau must be positive");
  if (h < 2 || w < 2) throw Error("pck_pair: degenerate image size");
  const double threshold = tau * static_cast<double>(std::max(h, w));
  long correct = 0;
  for (const auto& kp : kps.points) {
    const NormalizedPoint p{-1.0 + 2.0 * kp[0] / (w - 1),
                            -1.0 + 2.0 * kp[1] / (h - 1)};
    const NormalizedPoint a = apply(pred, p);
    const NormalizedPoint b = apply(gt, p);
    const double dx = (a.x - b.x) * 0.5 * (w - 1);
    const double dy = (a.y - b.y) * 0.5 * (h - 1);
    const double dist = std::sqrt(dx * dx + dy * dy);
    if (dist < threshold) ++correct;  // strict: boundary points are incorrect
  }
  return {correct, static_cast<long>(kps.points.size())};
}

PckReport pck_dataset(std::span<const PckItem> items, std::span<const double> taus) {
  if (taus.empty()) throw Error("pck_dataset: empty tau list");
  PckReport rep;
  rep.taus.assign(taus.begin(), taus.end());
  rep.correct.assign(taus.size(), 0);
  for (const PckItem& item : items) {
    if (!item.keypoints || item.keypoints->points.empty())
      throw MissingKeypoints("pck_dataset: pair " + std::to_string(item.pair_id) +
                             " has no keypoints");
    PairPck pp;
    pp.pair_id = item.pair_id;
    pp.correct.reserve(taus.size());
    for (size_t t = 0; t < taus.size(); ++t) {
      const auto [c, n] =
          pck_pair(item.pred, item.gt, *item.keypoints, item.h, item.w, taus[t]);
      pp.correct.push_back(c);
      pp.total = n;
      rep.correct[t] += c;
    }
    rep.total += pp.total;
    rep.pairs.push_back(std::move(pp));
  }
  return rep;
}

std::string PckReport::table() const {
  std::ostringstream os;
  os << "tau      pck      correct  total\n";
  char buf[96];
  for (size_t t = 0; t < taus.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%-8.4f %-8.4f %-8ld %ld\n", taus[t], score(t),
                  correct[t], total);
    os << buf;
  }
  return os.str();
}

std::string PckReport::json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (size_t t = 0; t < taus.size(); ++t) {
    nlohmann::ordered_json row;
    row["tau"] = taus[t];
    row["pck"] = score(t);
    row["correct"] = correct[t];
    row["total"] = total;
    arr.push_back(row);
  }
  return arr.dump(2);
}

}  // namespace aeromatch
