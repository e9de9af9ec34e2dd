#include "aeromatch/losses.hpp"

#include <cmath>

namespace aeromatch {

LossGrid LossGrid::regular(int side) {
  if (side < 2) throw Error("LossGrid: side must be >= 2");
  LossGrid g;
  g.side = side;
  g.points.reserve(static_cast<size_t>(side) * side);
  for (int i = 0; i < side; ++i) {
    const double y = -1.0 + 2.0 * i / (side - 1);
    for (int j = 0; j < side; ++j)
      g.points.push_back({-1.0 + 2.0 * j / (side - 1), y});
  }
  return g;
}

void BalanceParams::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0)
    throw Error("BalanceParams: negative weight");
  if (alpha == 0.0 && beta == 0.0 && gamma == 0.0)
    throw Error("BalanceParams: at least one weight must be positive");
}

Tensor affine_to_tensor(const AffineParams& p, bool requires_grad) {
  const auto e = p.entries();
  return Tensor::from({6}, {e[0], e[1], e[2], e[3], e[4], e[5]}, requires_grad);
}

AffineParams tensor_to_affine(const Tensor& t) {
  if (!t.defined() || t.size() != 6)
    throw ShapeMismatch("tensor_to_affine: need 6 elements");
  const double* d = t.data();
  return {d[0], d[1], d[2], d[3], d[4], d[5]};
}

Tensor grid_loss(const Tensor& pred, const Tensor& ref, const LossGrid& grid) {
  if (pred.size() != 6 || ref.size() != 6)
    throw ShapeMismatch("grid_loss: parameter tensors need 6 elements");
  if (grid.points.empty()) throw Error("grid_loss: empty grid");
  const double* p = pred.data();
  const double* r = ref.data();
  const double inv_n = 1.0 / static_cast<double>(grid.points.size());

  double acc = 0.0;
  for (const NormalizedPoint& g : grid.points) {
    const double dx = (p[0] - r[0]) * g.x + (p[1] - r[1]) * g.y + (p[2] - r[2]);
    const double dy = (p[3] - r[3]) * g.x + (p[4] - r[4]) * g.y + (p[5] - r[5]);
    acc += dx * dx + dy * dy;
  }

  const bool rec = Tape::active() && (pred.requires_grad() || ref.requires_grad());
  Tensor out = Tensor::from({1}, {acc * inv_n}, rec);
  guard_finite("grid_loss", out);
  if (rec) {
    const LossGrid pts = grid;  // snapshot
    Tape::active()->record("grid_loss", {out}, [=]() {
      const double g0 = out.grad()[0] * 2.0 * inv_n;
      double d[6] = {0, 0, 0, 0, 0, 0};
      for (const NormalizedPoint& g : pts.points) {
        const double dx = (p[0] - r[0]) * g.x + (p[1] - r[1]) * g.y + (p[2] - r[2]);
        const double dy = (p[3] - r[3]) * g.x + (p[4] - r[4]) * g.y + (p[5] - r[5]);
        d[0] += dx * g.x;
        d[1] += dx * g.y;
        d[2] += dx;
        d[3] += dy * g.x;
        d[4] += dy * g.y;
        d[5] += dy;
      }
      for (int i = 0; i < 6; ++i) {
        if (pred.requires_grad()) pred.grad()[i] += g0 * d[i];
        if (ref.requires_grad()) ref.grad()[i] -= g0 * d[i];
      }
    });
  }
  return out;
}

Tensor grid_loss(const Tensor& pred, const AffineParams& ref, const LossGrid& grid) {
  return grid_loss(pred, affine_to_tensor(ref), grid);
}

double grid_loss_value(const AffineParams& a, const AffineParams& b,
                       const LossGrid& grid) {
  return grid_loss(affine_to_tensor(a), affine_to_tensor(b), grid).item();
}

Tensor loss_org(const Tensor& theta_st, const Tensor& theta_ts,
                const AffineParams& gt, const LossGrid& grid) {
  const AffineParams gt_inv = invert(gt);
  return ops::add(grid_loss(theta_st, gt, grid), grid_loss(theta_ts, gt_inv, grid));
}

Tensor loss_aug(const Tensor& theta_st_aug, const Tensor& theta_ts_aug,
                const AffineParams& gt, const LossGrid& grid) {
  return loss_org(theta_st_aug, theta_ts_aug, gt, grid);
}

Tensor loss_id(const Tensor& theta_st, const Tensor& theta_ts,
               const Tensor& theta_st_aug, const Tensor& theta_ts_aug,
               const LossGrid& grid, bool detach_augmented) {
  const Tensor st_aug = detach_augmented ? theta_st_aug.detached() : theta_st_aug;
  const Tensor ts_aug = detach_augmented ? theta_ts_aug.detached() : theta_ts_aug;
  return ops::add(grid_loss(theta_st, st_aug, grid),
                  grid_loss(theta_ts, ts_aug, grid));
}

TotalLoss total_loss(const Tensor& theta_st, const Tensor& theta_ts,
                     const Tensor& theta_st_aug, const Tensor& theta_ts_aug,
                     const AffineParams& gt, const BalanceParams& balance,
                     const LossGrid& grid, bool detach_augmented) {
  balance.validate();
  if (std::fabs(gt.det()) < kSingularDetTol)
    throw SingularTransform("total_loss: singular ground truth");
  TotalLoss out;
  out.org = loss_org(theta_st, theta_ts, gt, grid);
  out.aug = loss_aug(theta_st_aug, theta_ts_aug, gt, grid);
  out.id = loss_id(theta_st, theta_ts, theta_st_aug, theta_ts_aug, grid,
                   detach_augmented);
  out.total = ops::add(ops::add(ops::scale(out.org, balance.alpha),
                                ops::scale(out.aug, balance.beta)),
                       ops::scale(out.id, balance.gamma));
  return out;
}

}  // namespace aeromatch
