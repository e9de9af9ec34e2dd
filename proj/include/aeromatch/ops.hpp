#pragma once

#include "aeromatch/tensor.hpp"

namespace aeromatch::ops {

/// Cross-correlation convolution, input [N,C,H,W] * kernel [K,C,kh,kw] + bias
/// [K]. kh/kw must be odd and the output extents integral.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad);

Tensor relu(const Tensor& x);

/// 2x2 max pooling, first (row-major) argmax wins ties. Extents must be even.
Tensor maxpool2(const Tensor& x);

/// [N,C,H,W] -> [N,C] per-channel spatial mean.
Tensor global_avg_pool(const Tensor& x);

/// x [N,D] * w [D,M] + b [M].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor sigmoid(const Tensor& x);

/// Divides every (n,:,h,w) fiber by sqrt(sum_c x^2 + eps). eps > 0.
Tensor l2_normalize_channels(const Tensor& x, double eps = 1e-12);

/// x [N,C,H,W] scaled per channel by s [N,C].
Tensor channel_scale(const Tensor& x, const Tensor& s);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);  // -> [1]

/// Row-major relayout; element count must match.
Tensor reshape(const Tensor& x, Shape shape);

/// Row i of a [N,D] tensor -> [D].
Tensor row(const Tensor& x, int i);

/// Dense correspondence volume: fsrc/ftgt [N,C,h,w] -> [N, h*w, h, w] where
/// entry (q,i,j) is the inner product of the target fiber at (i,j) with the
/// source fiber at location q = row*w + col. No rectification here.
Tensor raw_correlation(const Tensor& fsrc, const Tensor& ftgt);

/// Bilinear sampling of src [N,C,H,W] at grid [H_out,W_out,2] normalized
/// (x,y) coordinates; out-of-range taps read zero padding. Differentiable in
/// both src values and grid coordinates.
Tensor bilinear_sample(const Tensor& src, const Tensor& grid);

}  // namespace aeromatch::ops
