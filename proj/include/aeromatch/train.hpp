#pragma once

#include <filesystem>
#include <functional>

#include "aeromatch/adam.hpp"
#include "aeromatch/checkpoint.hpp"
#include "aeromatch/data.hpp"
#include "aeromatch/losses.hpp"
#include "aeromatch/matchnet.hpp"

namespace aeromatch {

struct TrainConfig {
  double lr = 5e-4;
  int batch = 10;
  int epochs = 1;
  long max_steps = 0;  // 0: run all epochs; otherwise stop at this step count
  uint64_t seed = 0;
  BalanceParams balance;
  BackboneConfig backbone;
  JitterRanges jitter;
  int loss_grid_side = 20;
  bool detach_augmented = false;
  std::filesystem::path checkpoint_path;  // empty: no checkpoint written
  long checkpoint_every = 0;              // steps; 0: final only
  std::filesystem::path resume_from;      // empty: fresh start
};

struct StepRecord {
  long step = 0;
  double loss = 0.0;
  double l_org = 0.0;
  double l_aug = 0.0;
  double l_id = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  AdamState adam;
  BackboneConfig config;
  long steps = 0;
  std::vector<StepRecord> history;
};

/// One full training run per the training procedure: per pair, jitter the
/// target into the augmented input, run the two-stream forward, take the
/// three-term loss, backpropagate and apply Adam with gradients averaged
/// over the batch. Deterministic function of (dataset, config).
TrainResult train_model(const Dataset& data, const TrainConfig& cfg,
                        const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace aeromatch
