#pragma once

#include "aeromatch/affine.hpp"
#include "aeromatch/matchnet.hpp"
#include "aeromatch/tensor.hpp"

namespace aeromatch {

/// Regular side x side lattice over [-1,1]^2, symmetric about the origin.
struct LossGrid {
  int side = 0;
  std::vector<NormalizedPoint> points;

  static LossGrid regular(int side = 20);
};

struct BalanceParams {
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 0.2;

  void validate() const;  // nonnegative, at least one positive
};

Tensor affine_to_tensor(const AffineParams& p, bool requires_grad = false);
AffineParams tensor_to_affine(const Tensor& t);  // needs 6 elements

/// Mean squared displacement between the grid transformed by `pred` and by
/// `ref`, differentiable in both arguments.
Tensor grid_loss(const Tensor& pred, const Tensor& ref, const LossGrid& grid);
Tensor grid_loss(const Tensor& pred, const AffineParams& ref, const LossGrid& grid);
double grid_loss_value(const AffineParams& a, const AffineParams& b,
                       const LossGrid& grid);

/// Bidirectional loss of the original pair; the opposite direction is
/// supervised by the inverse of the single ground truth.
Tensor loss_org(const Tensor& theta_st, const Tensor& theta_ts,
                const AffineParams& gt, const LossGrid& grid);

/// Same form on the augmented-pair predictions, sharing the ground truth.
Tensor loss_aug(const Tensor& theta_st_aug, const Tensor& theta_ts_aug,
                const AffineParams& gt, const LossGrid& grid);

/// Consistency between original and augmented predictions. Gradients flow
/// through both arguments unless detach_augmented is set.
Tensor loss_id(const Tensor& theta_st, const Tensor& theta_ts,
               const Tensor& theta_st_aug, const Tensor& theta_ts_aug,
               const LossGrid& grid, bool detach_augmented = false);

struct TotalLoss {
  Tensor total;
  Tensor org, aug, id;
};

/// alpha*L_org + beta*L_aug + gamma*L_id.
TotalLoss total_loss(const Tensor& theta_st, const Tensor& theta_ts,
                     const Tensor& theta_st_aug, const Tensor& theta_ts_aug,
                     const AffineParams& gt, const BalanceParams& balance,
                     const LossGrid& grid, bool detach_augmented = false);

}  // namespace aeromatch
