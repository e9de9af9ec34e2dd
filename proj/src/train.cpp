#include "aeromatch/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace aeromatch {

namespace {

// Epoch order: identity permutation shuffled by a stream derived from
// seed ^ epoch, so any epoch's order can be rebuilt without replaying.
std::vector<int> epoch_permutation(int n, uint64_t seed, long epoch) {
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  SeededRng rng(seed ^ static_cast<uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<size_t>(i)],
              perm[static_cast<size_t>(rng.uniform_int(i + 1))]);
  return perm;
}

}  // namespace

TrainResult train_model(const Dataset& data, const TrainConfig& cfg,
                        const std::function<void(const StepRecord&)>& on_step) {
  cfg.balance.validate();
  cfg.backbone.validate();
  if (cfg.batch < 1) throw Error("train: batch must be >= 1");
  if (cfg.lr <= 0.0) throw Error("train: lr must be positive");
  if (data.pairs.empty()) throw Error("train: empty dataset");
  if (data.manifest.image_size != cfg.backbone.input_size)
    throw ShapeMismatch("train: dataset images are " +
                        std::to_string(data.manifest.image_size) +
                        ", backbone expects " +
                        std::to_string(cfg.backbone.input_size));

  const int n_pairs = static_cast<int>(data.pairs.size());
  const long batches_per_epoch = (n_pairs + cfg.batch - 1) / cfg.batch;
  long total_steps = static_cast<long>(cfg.epochs) * batches_per_epoch;
  if (cfg.max_steps > 0) total_steps = cfg.max_steps;

  TrainResult result;
  result.config = cfg.backbone;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  SeededRng jitter_rng(cfg.seed ^ 0x6a69747465725aULL);
  long step = 0;

  if (!cfg.resume_from.empty()) {
    ModelCheckpoint ckpt = load_model(cfg.resume_from);
    if (!ckpt.adam)
      throw FormatViolation("resume: checkpoint has no optimizer state");
    result.weights = std::move(ckpt.weights);
    result.adam = std::move(*ckpt.adam);
    step = ckpt.step;
    if (!ckpt.rng_state.empty()) jitter_rng.deserialize(ckpt.rng_state);
  } else {
    result.weights = init_weights(cfg.backbone, cfg.seed);
    result.adam = AdamState::init(result.weights.params(), adam_cfg);
  }

  std::vector<Tensor> params = result.weights.params();
  const LossGrid grid = LossGrid::regular(cfg.loss_grid_side);

  auto save = [&](long at_step) {
    if (cfg.checkpoint_path.empty()) return;
    ModelCheckpoint ckpt;
    ckpt.config = cfg.backbone;
    ckpt.weights = result.weights;
    ckpt.adam = result.adam;
    ckpt.step = at_step;
    ckpt.rng_state = jitter_rng.serialize();
    save_model(cfg.checkpoint_path, ckpt);
  };

  while (step < total_steps) {
    const long epoch = step / batches_per_epoch;
    const long batch_in_epoch = step % batches_per_epoch;
    const std::vector<int> perm = epoch_permutation(n_pairs, cfg.seed, epoch);

    const long lo = batch_in_epoch * cfg.batch;
    const long hi = std::min<long>(lo + cfg.batch, n_pairs);
    const int batch_size = static_cast<int>(hi - lo);

    for (Tensor& p : params) p.zero_grad();
    double loss_sum = 0, org_sum = 0, aug_sum = 0, id_sum = 0;
    for (long bi = lo; bi < hi; ++bi) {
      const TrainingPair& pair = data.pairs[static_cast<size_t>(perm[bi])];
      const Image jittered = color_jitter(pair.target, jitter_rng, cfg.jitter);

      Tape tape;
      Tape::Use use(tape);
      try {
        const Tensor i_s = image_to_tensor(pair.source);
        const Tensor i_t = image_to_tensor(pair.target);
        const Tensor i_ta = image_to_tensor(jittered);
        const FourPreds preds = forward_two_stream(i_s, i_t, i_ta, result.weights,
                                                   cfg.backbone);
        const TotalLoss loss = total_loss(
            ops::row(preds.st, 0), ops::row(preds.ts, 0),
            ops::row(preds.st_aug, 0), ops::row(preds.ts_aug, 0), pair.gt,
            cfg.balance, grid, cfg.detach_augmented);
        loss_sum += loss.total.item();
        org_sum += loss.org.item();
        aug_sum += loss.aug.item();
        id_sum += loss.id.item();
        // Average over the batch by scaling each pair's loss.
        tape.backward(ops::scale(loss.total, 1.0 / batch_size));
      } catch (const NumericError& e) {
        throw DivergedLoss("train: diverged at step " + std::to_string(step) +
                           " (" + e.what() + ")");
      }
    }
    adam_step(params, result.adam);
    ++step;

    StepRecord rec;
    rec.step = step;
    rec.loss = loss_sum / batch_size;
    rec.l_org = org_sum / batch_size;
    rec.l_aug = aug_sum / batch_size;
    rec.l_id = id_sum / batch_size;
    result.history.push_back(rec);
    if (on_step) on_step(rec);

    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
        step < total_steps)
      save(step);
  }
  result.steps = step;
  save(step);
  return result;
}

}  // namespace aeromatch
