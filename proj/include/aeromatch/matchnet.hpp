#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aeromatch/image.hpp"
#include "aeromatch/ops.hpp"

namespace aeromatch {

/// Toy three-stage backbone with SE channel attention on stages 2-3 and a
/// fixed 8x total downsampling. Every shape downstream derives from this.
struct BackboneConfig {
  int input_size = 64;
  std::array<int, 3> widths = {16, 32, 64};
  int se_reduction = 4;
  int reg_conv1_channels = 32;
  int reg_conv2_channels = 16;

  int feature_size() const { return input_size / 8; }
  int feature_channels() const { return widths[2]; }
  int correlation_channels() const { return feature_size() * feature_size(); }
  void validate() const;  // ShapeMismatch on broken invariants
};

/// Named parameter tensors in a fixed order (the serialization order).
struct ModelWeights {
  std::vector<std::pair<std::string, Tensor>> tensors;

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  std::vector<Tensor> params() const;
  long param_count() const;
};

/// Seeded He-uniform init; the regression output layer starts at zero weights
/// with bias [1,0,0,0,1,0] so an untrained model predicts the identity.
ModelWeights init_weights(const BackboneConfig& cfg, uint64_t seed);

/// GAP -> reduce -> ReLU -> expand -> sigmoid -> per-channel rescale.
Tensor se_block(const Tensor& x, const Tensor& w_reduce, const Tensor& b_reduce,
                const Tensor& w_expand, const Tensor& b_expand);

/// Backbone features, L2-normalized per spatial fiber: [N,3,S,S] ->
/// [N, widths[2], S/8, S/8].
Tensor extract_features(const Tensor& images, const ModelWeights& w,
                        const BackboneConfig& cfg);

/// Dense-correspondence volume with ReLU rectification and L2 normalization
/// over the source-location axis.
Tensor correlate(const Tensor& f_src, const Tensor& f_tgt);

/// Correlation volume -> 6 affine parameters per batch item.
Tensor regress(const Tensor& correlation, const ModelWeights& w,
               const BackboneConfig& cfg);

struct TwoPreds {
  Tensor st, ts;  // each [N,6]
};

struct FourPreds {
  Tensor st, ts, st_aug, ts_aug;  // each [N,6]
};

/// Training-time pass over (I_S, I_T, I_T'): three shared-weight backbone
/// passes, four correlation volumes, one shared regression network.
FourPreds forward_two_stream(const Tensor& i_s, const Tensor& i_t,
                             const Tensor& i_t_aug, const ModelWeights& w,
                             const BackboneConfig& cfg);

/// Inference-time subgraph without the augmented stream.
TwoPreds forward_bidirectional(const Tensor& i_s, const Tensor& i_t,
                               const ModelWeights& w, const BackboneConfig& cfg);

}  // namespace aeromatch
