#include "aeromatch/affine.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace aeromatch {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_finite(const AffineParams& p, const char* who) {
  if (!p.finite()) throw Error(std::string(who) + ": non-finite affine parameters");
}

}  // namespace

bool AffineParams::finite() const {
  for (double e : entries())
    if (!std::isfinite(e)) return false;
  return true;
}

HomogeneousMatrix to_homogeneous(const AffineParams& p) {
  HomogeneousMatrix h;
  h.m = {p.a1, p.a2, p.tx, p.a3, p.a4, p.ty, 0.0, 0.0, 1.0};
  return h;
}

AffineParams from_homogeneous(const HomogeneousMatrix& h) {
  return {h.m[0], h.m[1], h.m[2], h.m[3], h.m[4], h.m[5]};
}

AffineParams invert(const AffineParams& p) {
  require_finite(p, "invert");
  const double det = p.det();
  if (std::fabs(det) < kSingularDetTol)
    throw SingularTransform("invert: |det| = " + std::to_string(std::fabs(det)) +
                            " below tolerance " + std::to_string(kSingularDetTol));
  // Extended precision keeps the double round trip exact for the transform
  // ranges this project works with.
  const long double a1 = p.a1, a2 = p.a2, a3 = p.a3, a4 = p.a4;
  const long double tx = p.tx, ty = p.ty;
  const long double d = a1 * a4 - a2 * a3;
  const long double b1 = a4 / d, b2 = -a2 / d;
  const long double b3 = -a3 / d, b4 = a1 / d;
  AffineParams out;
  out.a1 = static_cast<double>(b1);
  out.a2 = static_cast<double>(b2);
  out.a3 = static_cast<double>(b3);
  out.a4 = static_cast<double>(b4);
  out.tx = static_cast<double>(-(b1 * tx + b2 * ty));
  out.ty = static_cast<double>(-(b3 * tx + b4 * ty));
  return out;
}

AffineParams compose(const AffineParams& o, const AffineParams& i) {
  require_finite(o, "compose");
  require_finite(i, "compose");
  AffineParams r;
  r.a1 = o.a1 * i.a1 + o.a2 * i.a3;
  r.a2 = o.a1 * i.a2 + o.a2 * i.a4;
  r.tx = o.a1 * i.tx + o.a2 * i.ty + o.tx;
  r.a3 = o.a3 * i.a1 + o.a4 * i.a3;
  r.a4 = o.a3 * i.a2 + o.a4 * i.a4;
  r.ty = o.a3 * i.tx + o.a4 * i.ty + o.ty;
  return r;
}

NormalizedPoint apply(const AffineParams& p, const NormalizedPoint& pt) {
  return {p.a1 * pt.x + p.a2 * pt.y + p.tx, p.a3 * pt.x + p.a4 * pt.y + p.ty};
}

const char* to_string(MeanKind kind) {
  switch (kind) {
    case MeanKind::arithmetic: return "arithmetic";
    case MeanKind::harmonic: return "harmonic";
    case MeanKind::geometric: return "geometric";
  }
  return "?";
}

MeanKind mean_kind_from_string(const std::string& name) {
  if (name == "arithmetic") return MeanKind::arithmetic;
  if (name == "harmonic") return MeanKind::harmonic;
  if (name == "geometric") return MeanKind::geometric;
  throw Error("unknown mean kind: '" + name + "'");
}

FuseResult ensemble_fuse(const AffineParams& fwd, const AffineParams& bwd,
                         MeanKind mean) {
  require_finite(fwd, "ensemble_fuse");
  const AffineParams inv = invert(bwd);
  // Consistent branches: when bwd is exactly the inverse of fwd the two
  // operands agree up to the inversion round trip, and the mean is fwd
  // itself. Returning it unchanged keeps the fixed point exact.
  if (std::fabs(fwd.det()) >= kSingularDetTol &&
      invert(fwd).entries() == bwd.entries())
    return {fwd, false};
  const auto a = fwd.entries();
  const auto b = inv.entries();
  std::array<double, 6> out{};
  bool degenerate = false;
  for (int i = 0; i < 6; ++i) {
    switch (mean) {
      case MeanKind::arithmetic:
        out[i] = 0.5 * (a[i] + b[i]);
        break;
      case MeanKind::harmonic:
        if (a[i] * b[i] > 0.0 && a[i] + b[i] != 0.0) {
          out[i] = 2.0 * a[i] * b[i] / (a[i] + b[i]);
        } else {
          out[i] = 0.5 * (a[i] + b[i]);
          degenerate = true;
        }
        break;
      case MeanKind::geometric:
        if (a[i] * b[i] > 0.0) {
          out[i] = std::copysign(std::sqrt(a[i] * b[i]), a[i]);
        } else {
          out[i] = 0.5 * (a[i] + b[i]);
          degenerate = true;
        }
        break;
    }
  }
  return {AffineParams::from_entries(out), degenerate};
}

AffineParams random_affine(SeededRng& rng, const AffineRanges& r) {
  const double angle = rng.uniform(-r.rotation_deg, r.rotation_deg) * kPi / 180.0;
  const double shear = rng.uniform(-r.shear, r.shear);
  const double sx = rng.uniform(r.scale_min, r.scale_max);
  const double sy = rng.uniform(r.scale_min, r.scale_max);
  const double tx = rng.uniform(-r.translation, r.translation);
  const double ty = rng.uniform(-r.translation, r.translation);

  const double c = std::cos(angle), s = std::sin(angle);
  const AffineParams rotation{c, -s, 0.0, s, c, 0.0};
  const AffineParams shear_m{1.0, shear, 0.0, 0.0, 1.0, 0.0};
  const AffineParams scale_m{sx, 0.0, 0.0, 0.0, sy, 0.0};
  const AffineParams translation{1.0, 0.0, tx, 0.0, 1.0, ty};
  return compose(translation, compose(rotation, compose(shear_m, scale_m)));
}

std::string to_text(const AffineParams& p) {
  char buf[256];
  const auto e = p.entries();
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g", e[0],
                e[1], e[2], e[3], e[4], e[5]);
  return buf;
}

AffineParams affine_from_text(const std::string& text) {
  std::istringstream is(text);
  std::array<double, 6> e{};
  for (double& v : e) {
    if (!(is >> v))
      throw FormatViolation("affine text form needs 6 floats, got '" + text + "'");
  }
  return AffineParams::from_entries(e);
}

}  // namespace aeromatch
