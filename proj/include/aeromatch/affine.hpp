#pragma once

#include <array>
#include <string>

#include "aeromatch/errors.hpp"
#include "aeromatch/rng.hpp"

namespace aeromatch {

// Coordinate convention used by the whole project:
//
//   * Points live in the normalized frame [-1, 1]^2 of an image, x rightward
//     and y downward, with pixel centres at x_j = -1 + 2j/(W-1).
//   * AffineParams maps OUTPUT-frame (target) coordinates to INPUT-frame
//     (source) sampling coordinates, so warping a source image towards a
//     target is a single grid-sample with the S->T parameters.
//
// Entry order is [a1, a2, tx, a3, a4, ty], the homogeneous form being
//
//   [ a1 a2 tx ]
//   [ a3 a4 ty ]
//   [ 0  0  1  ]

struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Transforms with |det| below this are rejected as singular.
inline constexpr double kSingularDetTol = 1e-9;

struct AffineParams {
  double a1 = 1.0, a2 = 0.0, tx = 0.0;
  double a3 = 0.0, a4 = 1.0, ty = 0.0;

  static AffineParams identity() { return {}; }
  static AffineParams from_entries(const std::array<double, 6>& e) {
    return {e[0], e[1], e[2], e[3], e[4], e[5]};
  }

  std::array<double, 6> entries() const { return {a1, a2, tx, a3, a4, ty}; }
  double det() const { return a1 * a4 - a2 * a3; }
  bool finite() const;
};

/// Row-major 3x3 matrix; the last row is [0, 0, 1] by construction.
struct HomogeneousMatrix {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

HomogeneousMatrix to_homogeneous(const AffineParams& p);
AffineParams from_homogeneous(const HomogeneousMatrix& h);

/// Inverse transform. Throws SingularTransform when |det| < kSingularDetTol.
/// Evaluated in extended precision; the double round trip invert(invert(p))
/// stays within 1e-10 of p for the transform ranges this project uses.
AffineParams invert(const AffineParams& p);

/// Composition outer-after-inner: to_homogeneous(result) equals the matrix
/// product to_homogeneous(outer) * to_homogeneous(inner).
AffineParams compose(const AffineParams& outer, const AffineParams& inner);

NormalizedPoint apply(const AffineParams& p, const NormalizedPoint& pt);

enum class MeanKind { arithmetic, harmonic, geometric };

const char* to_string(MeanKind kind);
MeanKind mean_kind_from_string(const std::string& name);  // Error on unknown

struct FuseResult {
  AffineParams value;
  /// True when harmonic/geometric was undefined for some entry pair (zero
  /// sum or opposite signs) and that entry fell back to the arithmetic mean.
  bool degenerate = false;
};

/// Fuses a forward prediction with the inverse of a backward prediction,
/// entrywise over the 6 parameters. Consistent branches are a fixed point:
/// bwd == invert(fwd) returns fwd unchanged for every mean kind.
FuseResult ensemble_fuse(const AffineParams& fwd, const AffineParams& bwd,
                         MeanKind mean = MeanKind::arithmetic);

struct AffineRanges {
  double rotation_deg = 30.0;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double shear = 0.1;
  double translation = 0.15;
};

/// Draws translation * rotation * shear * scale with every factor uniform in
/// its range. Draw order: angle, shear, scale_x, scale_y, tx, ty.
AffineParams random_affine(SeededRng& rng, const AffineRanges& ranges = {});

/// Text form used in ground-truth files and CLI output: six decimal floats,
/// order [a1,a2,tx,a3,a4,ty], whitespace separated, full precision.
std::string to_text(const AffineParams& p);
AffineParams affine_from_text(const std::string& text);  // FormatViolation

}  // namespace aeromatch
