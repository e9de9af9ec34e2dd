#include "aeromatch/matchnet.hpp"

#include <cmath>

namespace aeromatch {

namespace o = ops;

void BackboneConfig::validate() const {
  if (input_size < 8 || input_size % 8 != 0)
    throw ShapeMismatch("BackboneConfig: input_size must be a positive multiple of 8");
  for (int w : widths)
    if (w <= 0) throw ShapeMismatch("BackboneConfig: non-positive stage width");
  if (se_reduction <= 0 || widths[1] % se_reduction != 0 ||
      widths[2] % se_reduction != 0)
    throw ShapeMismatch("BackboneConfig: SE stages need widths divisible by r");
  if (reg_conv1_channels <= 0 || reg_conv2_channels <= 0)
    throw ShapeMismatch("BackboneConfig: non-positive regression width");
}

Tensor& ModelWeights::at(std::string_view name) {
  for (auto& [k, t] : tensors)
    if (k == name) return t;
  throw Error("ModelWeights: no tensor named '" + std::string(name) + "'");
}

const Tensor& ModelWeights::at(std::string_view name) const {
  for (const auto& [k, t] : tensors)
    if (k == name) return t;
  throw Error("ModelWeights: no tensor named '" + std::string(name) + "'");
}

std::vector<Tensor> ModelWeights::params() const {
  std::vector<Tensor> out;
  out.reserve(tensors.size());
  for (const auto& [k, t] : tensors) out.push_back(t);
  return out;
}

long ModelWeights::param_count() const {
  long n = 0;
  for (const auto& [k, t] : tensors) n += t.size();
  return n;
}

namespace {

Tensor he_uniform(Shape shape, int fan_in, SeededRng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ModelWeights init_weights(const BackboneConfig& cfg, uint64_t seed) {
  cfg.validate();
  SeededRng rng(seed);
  ModelWeights w;
  auto add = [&](std::string name, Tensor t) {
    w.tensors.emplace_back(std::move(name), std::move(t));
  };

  const int c1 = cfg.widths[0], c2 = cfg.widths[1], c3 = cfg.widths[2];
  add("backbone.conv1.weight", he_uniform({c1, 3, 3, 3}, 3 * 9, rng));
  add("backbone.conv1.bias", Tensor::zeros({c1}, true));
  add("backbone.conv2.weight", he_uniform({c2, c1, 3, 3}, c1 * 9, rng));
  add("backbone.conv2.bias", Tensor::zeros({c2}, true));
  const int r2 = c2 / cfg.se_reduction;
  add("backbone.se2.reduce.weight", he_uniform({c2, r2}, c2, rng));
  add("backbone.se2.reduce.bias", Tensor::zeros({r2}, true));
  add("backbone.se2.expand.weight", he_uniform({r2, c2}, r2, rng));
  add("backbone.se2.expand.bias", Tensor::zeros({c2}, true));
  add("backbone.conv3.weight", he_uniform({c3, c2, 3, 3}, c2 * 9, rng));
  add("backbone.conv3.bias", Tensor::zeros({c3}, true));
  const int r3 = c3 / cfg.se_reduction;
  add("backbone.se3.reduce.weight", he_uniform({c3, r3}, c3, rng));
  add("backbone.se3.reduce.bias", Tensor::zeros({r3}, true));
  add("backbone.se3.expand.weight", he_uniform({r3, c3}, r3, rng));
  add("backbone.se3.expand.bias", Tensor::zeros({c3}, true));

  const int cc = cfg.correlation_channels();
  const int rc1 = cfg.reg_conv1_channels, rc2 = cfg.reg_conv2_channels;
  add("reg.conv1.weight", he_uniform({rc1, cc, 5, 5}, cc * 25, rng));
  add("reg.conv1.bias", Tensor::zeros({rc1}, true));
  add("reg.conv2.weight", he_uniform({rc2, rc1, 3, 3}, rc1 * 9, rng));
  add("reg.conv2.bias", Tensor::zeros({rc2}, true));
  const int fs = cfg.feature_size();
  add("reg.fc.weight", Tensor::zeros({rc2 * fs * fs, 6}, true));
  add("reg.fc.bias", Tensor::from({6}, {1, 0, 0, 0, 1, 0}, true));
  return w;
}

Tensor se_block(const Tensor& x, const Tensor& w_reduce, const Tensor& b_reduce,
                const Tensor& w_expand, const Tensor& b_expand) {
  Tensor pooled = o::global_avg_pool(x);
  Tensor hidden = o::relu(o::linear(pooled, w_reduce, b_reduce));
  Tensor scores = o::sigmoid(o::linear(hidden, w_expand, b_expand));
  return o::channel_scale(x, scores);
}

Tensor extract_features(const Tensor& images, const ModelWeights& w,
                        const BackboneConfig& cfg) {
  cfg.validate();
  if (images.shape().size() != 4 || images.dim(1) != 3 ||
      images.dim(2) != cfg.input_size || images.dim(3) != cfg.input_size)
    throw ShapeMismatch("extract_features: expected [N,3," +
                        std::to_string(cfg.input_size) + "," +
                        std::to_string(cfg.input_size) + "], got " +
                        shape_str(images.shape()));

  Tensor x = o::relu(o::conv2d(images, w.at("backbone.conv1.weight"),
                               w.at("backbone.conv1.bias"), 1, 1));
  x = o::maxpool2(x);

  x = o::relu(o::conv2d(x, w.at("backbone.conv2.weight"),
                        w.at("backbone.conv2.bias"), 1, 1));
  x = se_block(x, w.at("backbone.se2.reduce.weight"), w.at("backbone.se2.reduce.bias"),
               w.at("backbone.se2.expand.weight"), w.at("backbone.se2.expand.bias"));
  x = o::maxpool2(x);

  x = o::relu(o::conv2d(x, w.at("backbone.conv3.weight"),
                        w.at("backbone.conv3.bias"), 1, 1));
  x = se_block(x, w.at("backbone.se3.reduce.weight"), w.at("backbone.se3.reduce.bias"),
               w.at("backbone.se3.expand.weight"), w.at("backbone.se3.expand.bias"));
  x = o::maxpool2(x);

  return o::l2_normalize_channels(x, 1e-12);
}

Tensor correlate(const Tensor& f_src, const Tensor& f_tgt) {
  Tensor c = o::raw_correlation(f_src, f_tgt);
  c = o::relu(c);
  return o::l2_normalize_channels(c, 1e-12);
}

Tensor regress(const Tensor& correlation, const ModelWeights& w,
               const BackboneConfig& cfg) {
  const int fs = cfg.feature_size();
  if (correlation.shape().size() != 4 || correlation.dim(1) != fs * fs ||
      correlation.dim(2) != fs || correlation.dim(3) != fs)
    throw ShapeMismatch("regress: correlation volume " +
                        shape_str(correlation.shape()) + " does not match cfg");
  Tensor x = o::relu(
      o::conv2d(correlation, w.at("reg.conv1.weight"), w.at("reg.conv1.bias"), 1, 2));
  x = o::relu(o::conv2d(x, w.at("reg.conv2.weight"), w.at("reg.conv2.bias"), 1, 1));
  const int n = x.dim(0);
  x = o::reshape(x, {n, cfg.reg_conv2_channels * fs * fs});
  return o::linear(x, w.at("reg.fc.weight"), w.at("reg.fc.bias"));
}

FourPreds forward_two_stream(const Tensor& i_s, const Tensor& i_t,
                             const Tensor& i_t_aug, const ModelWeights& w,
                             const BackboneConfig& cfg) {
  const Tensor f_s = extract_features(i_s, w, cfg);
  const Tensor f_t = extract_features(i_t, w, cfg);
  const Tensor f_ta = extract_features(i_t_aug, w, cfg);
  FourPreds out;
  out.st = regress(correlate(f_s, f_t), w, cfg);
  out.ts = regress(correlate(f_t, f_s), w, cfg);
  out.st_aug = regress(correlate(f_s, f_ta), w, cfg);
  out.ts_aug = regress(correlate(f_ta, f_s), w, cfg);
  return out;
}

TwoPreds forward_bidirectional(const Tensor& i_s, const Tensor& i_t,
                               const ModelWeights& w, const BackboneConfig& cfg) {
  const Tensor f_s = extract_features(i_s, w, cfg);
  const Tensor f_t = extract_features(i_t, w, cfg);
  TwoPreds out;
  out.st = regress(correlate(f_s, f_t), w, cfg);
  out.ts = regress(correlate(f_t, f_s), w, cfg);
  return out;
}

}  // namespace aeromatch
