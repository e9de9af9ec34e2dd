#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "aeromatch/losses.hpp"
#include "aeromatch/train.hpp"

using namespace aeromatch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("aeromatch_train_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Dataset tiny_dataset(uint64_t seed, int count) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.count = count;
  cfg.size = 32;
  cfg.keypoints = 5;
  return generate_dataset(cfg);
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.backbone.input_size = 32;
  cfg.backbone.widths = {4, 6, 8};
  cfg.backbone.se_reduction = 2;
  cfg.backbone.reg_conv1_channels = 8;
  cfg.backbone.reg_conv2_channels = 4;
  cfg.batch = 2;
  return cfg;
}

}  // namespace

TEST_CASE("gamma-only training on an unjittered target starts at zero loss") {
  const Dataset ds = tiny_dataset(1, 4);
  TrainConfig cfg = tiny_train_config();
  cfg.balance = {0.0, 0.0, 1.0};
  cfg.jitter.brightness_min = cfg.jitter.brightness_max = 1.0;
  cfg.jitter.contrast_min = cfg.jitter.contrast_max = 1.0;
  cfg.jitter.saturation_min = cfg.jitter.saturation_max = 1.0;
  cfg.max_steps = 3;
  const TrainResult r = train_model(ds, cfg);
  REQUIRE(r.history.size() == 3);
  for (const StepRecord& rec : r.history) CHECK(std::fabs(rec.loss) <= 1e-10);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset ds = tiny_dataset(2, 6);
  TrainConfig cfg = tiny_train_config();
  cfg.max_steps = 5;
  cfg.seed = 42;
  const TrainResult a = train_model(ds, cfg);
  const TrainResult b = train_model(ds, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].loss == b.history[i].loss);
  for (size_t i = 0; i < a.weights.tensors.size(); ++i) {
    const Tensor& ta = a.weights.tensors[i].second;
    const Tensor& tb = b.weights.tensors[i].second;
    for (int64_t j = 0; j < ta.size(); ++j) CHECK(ta.data()[j] == tb.data()[j]);
  }
}

TEST_CASE("loss components are wired through the balance parameters") {
  const Dataset ds = tiny_dataset(3, 4);
  TrainConfig cfg = tiny_train_config();
  cfg.max_steps = 1;
  cfg.seed = 9;
  const TrainResult r = train_model(ds, cfg);
  const StepRecord& rec = r.history.front();
  const double recombined =
      0.5 * rec.l_org + 0.3 * rec.l_aug + 0.2 * rec.l_id;
  CHECK(rec.loss == doctest::Approx(recombined).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const Dataset ds = tiny_dataset(4, 4);
  TrainConfig cfg = tiny_train_config();
  cfg.max_steps = 4;
  const fs::path dir = temp_dir("roundtrip");
  cfg.checkpoint_path = dir / "model.ckpt";
  train_model(ds, cfg);

  const ModelCheckpoint loaded = load_model(cfg.checkpoint_path);
  CHECK(loaded.step == 4);
  REQUIRE(loaded.adam.has_value());
  save_model(dir / "copy.ckpt", loaded);
  CHECK(slurp(cfg.checkpoint_path) == slurp(dir / "copy.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects bad magic and foreign versions") {
  const Dataset ds = tiny_dataset(5, 2);
  TrainConfig cfg = tiny_train_config();
  cfg.max_steps = 1;
  const fs::path dir = temp_dir("corrupt");
  cfg.checkpoint_path = dir / "model.ckpt";
  train_model(ds, cfg);

  auto bytes = slurp(cfg.checkpoint_path);
  {
    auto bad = bytes;
    bad[0] = 'X';
    std::ofstream f(dir / "bad_magic.ckpt", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bad.data()),
            static_cast<std::streamsize>(bad.size()));
    f.close();
    try {
      load_model(dir / "bad_magic.ckpt");
      FAIL("expected FormatViolation");
    } catch (const FormatViolation& e) {
      CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
  }
  {
    auto bad = bytes;
    bad[4] = 9;  // version field
    std::ofstream f(dir / "bad_version.ckpt", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bad.data()),
            static_cast<std::streamsize>(bad.size()));
    f.close();
    try {
      load_model(dir / "bad_version.ckpt");
      FAIL("expected FormatViolation");
    } catch (const FormatViolation& e) {
      const std::string what = e.what();
      CHECK(what.find("9") != std::string::npos);  // found version
      CHECK(what.find("1") != std::string::npos);  // supported version
    }
  }
  {
    auto bad = bytes;
    bad.resize(bad.size() / 2);
    std::ofstream f(dir / "truncated.ckpt", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bad.data()),
            static_cast<std::streamsize>(bad.size()));
    f.close();
    CHECK_THROWS_AS(load_model(dir / "truncated.ckpt"), FormatViolation);
  }
  fs::remove_all(dir);
}

TEST_CASE("interrupted training resumes bit-exactly") {
  const Dataset ds = tiny_dataset(6, 6);
  const fs::path dir = temp_dir("resume");

  // Uninterrupted reference: 8 steps.
  TrainConfig full = tiny_train_config();
  full.seed = 11;
  full.max_steps = 8;
  full.checkpoint_path = dir / "full.ckpt";
  train_model(ds, full);

  // Interrupted: 4 steps, then resume to 8.
  TrainConfig first = tiny_train_config();
  first.seed = 11;
  first.max_steps = 4;
  first.checkpoint_path = dir / "part.ckpt";
  train_model(ds, first);

  TrainConfig second = tiny_train_config();
  second.seed = 11;
  second.max_steps = 8;
  second.resume_from = dir / "part.ckpt";
  second.checkpoint_path = dir / "resumed.ckpt";
  train_model(ds, second);

  CHECK(slurp(dir / "full.ckpt") == slurp(dir / "resumed.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("a non-finite weight surfaces as DivergedLoss") {
  // The normalization layers keep even absurd learning rates finite, so the
  // NaN guard is exercised by resuming from a checkpoint carrying a NaN.
  const Dataset ds = tiny_dataset(7, 4);
  TrainConfig cfg = tiny_train_config();
  cfg.max_steps = 1;
  const fs::path dir = temp_dir("nan");
  cfg.checkpoint_path = dir / "seed.ckpt";
  train_model(ds, cfg);

  ModelCheckpoint ckpt = load_model(cfg.checkpoint_path);
  ckpt.weights.at("backbone.conv1.weight").data()[0] =
      std::numeric_limits<double>::quiet_NaN();
  save_model(dir / "poisoned.ckpt", ckpt);

  TrainConfig resume = tiny_train_config();
  resume.max_steps = 2;
  resume.resume_from = dir / "poisoned.ckpt";
  CHECK_THROWS_AS(train_model(ds, resume), DivergedLoss);
  fs::remove_all(dir);
}

TEST_CASE("train validates inputs") {
  const Dataset ds = tiny_dataset(8, 2);
  TrainConfig cfg = tiny_train_config();
  cfg.batch = 0;
  CHECK_THROWS_AS(train_model(ds, cfg), Error);
  cfg = tiny_train_config();
  cfg.backbone.input_size = 64;  // dataset is 16
  CHECK_THROWS_AS(train_model(ds, cfg), ShapeMismatch);
  cfg = tiny_train_config();
  CHECK_THROWS_AS(train_model(Dataset{}, cfg), Error);
}

TEST_CASE("ensemble fusion cancels symmetric perturbations (warp harness)") {
  SeededRng rng(13);
  const LossGrid grid = LossGrid::regular(20);
  int wins = 0, trials = 0;
  for (int i = 0; i < 200; ++i) {
    const AffineParams gt = random_affine(rng);
    for (const double mag : {0.01, 0.05, 0.1}) {
      std::array<double, 6> delta{};
      for (double& d : delta) d = rng.uniform(-mag, mag);
      // theta_st = gt + delta entrywise; theta_ts = invert(gt - delta).
      auto plus = gt.entries(), minus = gt.entries();
      for (int j = 0; j < 6; ++j) {
        plus[static_cast<size_t>(j)] += delta[static_cast<size_t>(j)];
        minus[static_cast<size_t>(j)] -= delta[static_cast<size_t>(j)];
      }
      const AffineParams theta_st = AffineParams::from_entries(plus);
      const AffineParams theta_ts = invert(AffineParams::from_entries(minus));
      const AffineParams fused =
          ensemble_fuse(theta_st, theta_ts, MeanKind::arithmetic).value;
      const double fused_loss = grid_loss_value(fused, gt, grid);
      const double raw_loss = grid_loss_value(theta_st, gt, grid);
      ++trials;
      if (fused_loss <= raw_loss) ++wins;
    }
  }
  CHECK(wins == trials);  // the arithmetic mean cancels symmetric error exactly
}
