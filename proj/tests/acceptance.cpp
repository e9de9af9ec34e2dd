// Acceptance suite: nine checks, one pass/fail line each, nonzero exit on any
// failure. Heavier than the unit tests; expect a few minutes of training in
// checks 6 and 7.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "aeromatch/checkpoint.hpp"
#include "aeromatch/gradcheck.hpp"
#include "aeromatch/losses.hpp"
#include "aeromatch/pck.hpp"
#include "aeromatch/ppm.hpp"
#include "aeromatch/sampler.hpp"
#include "aeromatch/train.hpp"

using namespace aeromatch;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL",
              what.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("aeromatch_accept_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// --- 1. gradient suite ------------------------------------------------------

void criterion_gradients() {
  const double t0 = now_seconds();
  bool pass = true;
  std::string detail;
  double worst = 0.0;
  for (const uint64_t seed : {0ull, 1ull, 2ull}) {
    const GradCheckReport rep = run_gradcheck(seed);
    for (const GradCheckCase& c : rep.cases) {
      const bool elementwise =
          c.name == "relu" || c.name == "sigmoid" || c.name == "linear" ||
          c.name == "global_avg_pool" || c.name == "l2_normalize_channels";
      const double gate = elementwise ? 1e-5 : 1e-4;
      worst = std::max(worst, c.max_rel_err);
      if (c.max_rel_err >= gate) {
        pass = false;
        detail += " " + c.name + "@" + std::to_string(seed);
      }
    }
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed >= 120.0) pass = false;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gradient suite, seeds {0,1,2}: worst rel err %.2e, %.1fs%s",
                worst, elapsed, detail.c_str());
  report(1, pass, buf);
}

// --- 2. affine algebra ------------------------------------------------------

void criterion_affine() {
  SeededRng rng(314159);
  bool pass = true;
  double worst = 0.0;
  auto gap = [&](double a, double b) {
    worst = std::max(worst, std::fabs(a - b));
    if (std::fabs(a - b) > 1e-10) pass = false;
  };
  for (int i = 0; i < 10000; ++i) {
    const AffineParams p = random_affine(rng);
    const AffineParams q = random_affine(rng);
    const AffineParams r = random_affine(rng);

    const auto assoc_l = compose(compose(p, q), r).entries();
    const auto assoc_r = compose(p, compose(q, r)).entries();
    for (int j = 0; j < 6; ++j) gap(assoc_l[j], assoc_r[j]);

    const auto unit_l = compose(AffineParams::identity(), p).entries();
    const auto unit_r = compose(p, AffineParams::identity()).entries();
    const auto pe = p.entries();
    for (int j = 0; j < 6; ++j) {
      gap(unit_l[j], pe[j]);
      gap(unit_r[j], pe[j]);
    }

    const auto round = invert(invert(p)).entries();
    for (int j = 0; j < 6; ++j) gap(round[j], pe[j]);

    const auto inv_id = compose(p, invert(p)).entries();
    const auto id = AffineParams::identity().entries();
    for (int j = 0; j < 6; ++j) gap(inv_id[j], id[j]);

    // Homomorphism: matrix of compose == matrix product.
    const auto hom = to_homogeneous(compose(p, q)).m;
    const auto mp = to_homogeneous(p).m;
    const auto mq = to_homogeneous(q).m;
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) {
        double acc = 0;
        for (int k = 0; k < 3; ++k) acc += mp[row * 3 + k] * mq[k * 3 + col];
        if (std::fabs(hom[row * 3 + col] - acc) > 1e-12) pass = false;
      }

    // Ensemble fixed point, exact for the arithmetic mean.
    const FuseResult fused = ensemble_fuse(p, invert(p), MeanKind::arithmetic);
    if (fused.value.entries() != p.entries()) pass = false;
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "affine algebra, 10^4 draws: worst group-law gap %.2e", worst);
  report(2, pass, buf);
}

// --- 3. loss closed forms ---------------------------------------------------

void criterion_losses() {
  const LossGrid grid = LossGrid::regular(20);
  SeededRng rng(271828);
  bool pass = true;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double dx = rng.uniform(-0.5, 0.5);
    const double dy = rng.uniform(-0.5, 0.5);
    const AffineParams shift{1, 0, dx, 0, 1, dy};
    const double got = grid_loss_value(AffineParams::identity(), shift, grid);
    const double expect = dx * dx + dy * dy;
    worst = std::max(worst, std::fabs(got - expect));
    if (std::fabs(got - expect) > 1e-12) pass = false;
  }
  // Constructed sub-losses 0.04 / 0.01 / 0.01 under (0.5, 0.3, 0.2).
  const AffineParams gt{1, 0, 0.3, 0, 1, 0};
  AffineParams st = gt, st_aug = gt;
  st.tx += 0.2;
  st_aug.tx += 0.1;
  const Tensor ts = affine_to_tensor(invert(gt));
  const TotalLoss built =
      total_loss(affine_to_tensor(st), ts, affine_to_tensor(st_aug), ts, gt,
                 BalanceParams{0.5, 0.3, 0.2}, grid);
  if (std::fabs(built.total.item() - 0.025) > 1e-12) pass = false;
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "loss closed forms: worst translation gap %.2e, weighted sum %.6f",
                worst, built.total.item());
  report(3, pass, buf);
}

// --- 4. PCK oracle ----------------------------------------------------------

long recount_pck(const AffineParams& pred, const AffineParams& gt,
                 const KeypointSet& kps, int h, int w, double tau) {
  long correct = 0;
  for (const auto& kp : kps.points) {
    const double nx = 2.0 * kp[0] / (w - 1) - 1.0;
    const double ny = 2.0 * kp[1] / (h - 1) - 1.0;
    const double dxn = (pred.a1 - gt.a1) * nx + (pred.a2 - gt.a2) * ny +
                       (pred.tx - gt.tx);
    const double dyn = (pred.a3 - gt.a3) * nx + (pred.a4 - gt.a4) * ny +
                       (pred.ty - gt.ty);
    const double dx = dxn * (w - 1) / 2.0;
    const double dy = dyn * (h - 1) / 2.0;
    if (std::sqrt(dx * dx + dy * dy) < tau * std::max(h, w)) ++correct;
  }
  return correct;
}

void criterion_pck() {
  bool pass = true;
  GenConfig gen;
  gen.seed = 2024;
  gen.count = 50;
  gen.size = 64;
  const Dataset ds = generate_dataset(gen);

  SeededRng rng(5050);
  std::vector<PckItem> items;
  for (int i = 0; i < 50; ++i) {
    AffineParams pred = ds.pairs[static_cast<size_t>(i)].gt;
    pred.tx += rng.uniform(-0.1, 0.1);
    pred.ty += rng.uniform(-0.1, 0.1);
    pred.a1 += rng.uniform(-0.05, 0.05);
    pred.a4 += rng.uniform(-0.05, 0.05);
    items.push_back({i, pred, ds.pairs[static_cast<size_t>(i)].gt,
                     &ds.keypoints[static_cast<size_t>(i)], 64, 64});
  }
  const std::vector<double> taus{0.01, 0.03, 0.05, 0.1};
  const PckReport rep = pck_dataset(items, taus);
  for (size_t t = 0; t < taus.size(); ++t) {
    long expect = 0;
    for (const PckItem& item : items)
      expect += recount_pck(item.pred, item.gt, *item.keypoints, 64, 64, taus[t]);
    if (rep.correct[t] != expect) pass = false;
    if (t > 0 && rep.score(t) < rep.score(t - 1)) pass = false;
  }

  // Exact predictions: 1.0 everywhere.
  std::vector<PckItem> exact = items;
  for (PckItem& item : exact) item.pred = item.gt;
  const PckReport perfect = pck_dataset(exact, taus);
  for (size_t t = 0; t < taus.size(); ++t)
    if (perfect.score(t) != 1.0) pass = false;

  // Boundary construction: displacement of exactly tau*max(h,w) scores zero.
  {
    const int size = 129;
    const double tau = 0.125;
    const double tx = tau * size * 2.0 / (size - 1);
    AffineParams pred = AffineParams::identity();
    pred.tx = tx;
    KeypointSet kps;
    for (int i = 0; i < 20; ++i)
      kps.points.push_back({static_cast<double>(5 * i), 64.0});
    const auto [correct, total] =
        pck_pair(pred, AffineParams::identity(), kps, size, size, tau);
    if (correct != 0 || total != 20) pass = false;
  }
  report(4, pass, "PCK pooled counts match the brute-force recount; boundary at 0");
}

// --- 5. ensemble perturbation property --------------------------------------

void criterion_ensemble() {
  SeededRng rng(987);
  const LossGrid grid = LossGrid::regular(20);
  int wins = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    const AffineParams gt = random_affine(rng);
    std::array<double, 6> d{};  // per-entry perturbation of the identity
    for (double& v : d) v = rng.uniform(-0.1, 0.1);
    const AffineParams plus = AffineParams::from_entries(
        {1 + d[0], d[1], d[2], d[3], 1 + d[4], d[5]});
    const AffineParams minus = AffineParams::from_entries(
        {1 - d[0], -d[1], -d[2], -d[3], 1 - d[4], -d[5]});
    const AffineParams theta_st = compose(gt, plus);
    const AffineParams theta_ts = invert(compose(gt, minus));
    const AffineParams fused =
        ensemble_fuse(theta_st, theta_ts, MeanKind::arithmetic).value;
    if (grid_loss_value(fused, gt, grid) <= grid_loss_value(theta_st, gt, grid))
      ++wins;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "ensemble beats the raw branch in %d/%d trials",
                wins, trials);
  report(5, wins >= trials * 95 / 100, buf);
}

// --- 6 & 7. training trend and matching gain --------------------------------

void criterion_training() {
  const double t0 = now_seconds();
  bool pass6 = true;
  std::string note6;

  GenConfig gen;
  gen.seed = 7;
  gen.count = 200;
  gen.size = 64;
  const Dataset train_set = generate_dataset(gen);

  TrainConfig cfg;  // defaults: lr 5e-4, batch 10, balance (0.5, 0.3, 0.2)
  cfg.seed = 7;
  cfg.max_steps = 300;
  double first = 0, last = 0;
  TrainResult result;
  try {
    result = train_model(train_set, cfg);
    for (int i = 0; i < 50; ++i) {
      first += result.history[static_cast<size_t>(i)].loss;
      last += result.history[result.history.size() - 50 + i].loss;
    }
    first /= 50;
    last /= 50;
    pass6 = last < 0.5 * first;
  } catch (const Error& e) {
    pass6 = false;
    note6 = e.what();
  }
  const double elapsed = now_seconds() - t0;
  if (elapsed >= 15 * 60) pass6 = false;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "training trend: first-50 mean %.4f, last-50 mean %.4f, %.0fs %s",
                first, last, elapsed, note6.c_str());
  report(6, pass6, buf);

  // 7: ensembled inference beats the identity baseline at tau = 0.1.
  bool pass7 = true;
  double model_score = 0, baseline_score = 0;
  try {
    GenConfig held;
    held.seed = 1007;
    held.count = 50;
    held.size = 64;
    const Dataset held_out = generate_dataset(held);
    const std::vector<double> taus{0.1};

    std::vector<PckItem> model_items, baseline_items;
    for (int i = 0; i < 50; ++i) {
      const TrainingPair& pair = held_out.pairs[static_cast<size_t>(i)];
      const TwoPreds preds = forward_bidirectional(
          image_to_tensor(pair.source), image_to_tensor(pair.target),
          result.weights, cfg.backbone);
      const AffineParams fused =
          ensemble_fuse(tensor_to_affine(preds.st), tensor_to_affine(preds.ts))
              .value;
      model_items.push_back({i, fused, pair.gt,
                             &held_out.keypoints[static_cast<size_t>(i)], 64, 64});
      baseline_items.push_back({i, AffineParams::identity(), pair.gt,
                                &held_out.keypoints[static_cast<size_t>(i)], 64,
                                64});
    }
    model_score = pck_dataset(model_items, taus).score(0);
    baseline_score = pck_dataset(baseline_items, taus).score(0);
    pass7 = model_score > baseline_score;
  } catch (const Error& e) {
    pass7 = false;
  }
  std::snprintf(buf, sizeof(buf),
                "matching gain at tau 0.1: model PCK %.4f vs identity %.4f",
                model_score, baseline_score);
  report(7, pass7, buf);
}

// --- 8. determinism and formats ---------------------------------------------

void criterion_determinism() {
  bool pass = true;
  const fs::path root = temp_dir("det");

  GenConfig gen;
  gen.seed = 33;
  gen.count = 4;
  gen.size = 32;
  gen.keypoints = 5;
  write_dataset(generate_dataset(gen), root / "d1");
  write_dataset(generate_dataset(gen), root / "d2");
  for (const char* rel : {"manifest.json", "gt.jsonl", "kp.jsonl",
                          "pairs/000000_src.ppm", "pairs/000003_tgt.ppm"})
    if (slurp(root / "d1" / rel) != slurp(root / "d2" / rel)) pass = false;

  const Dataset ds = read_dataset(root / "d1");
  TrainConfig cfg;
  cfg.backbone.input_size = 32;
  cfg.backbone.widths = {4, 6, 8};
  cfg.backbone.se_reduction = 2;
  cfg.backbone.reg_conv1_channels = 8;
  cfg.backbone.reg_conv2_channels = 4;
  cfg.batch = 2;
  cfg.max_steps = 6;
  cfg.seed = 5;
  cfg.checkpoint_path = root / "m1.ckpt";
  train_model(ds, cfg);
  cfg.checkpoint_path = root / "m2.ckpt";
  train_model(ds, cfg);
  if (slurp(root / "m1.ckpt") != slurp(root / "m2.ckpt")) pass = false;

  // Checkpoint round trip: load + save reproduces the bytes.
  save_model(root / "m3.ckpt", load_model(root / "m1.ckpt"));
  if (slurp(root / "m1.ckpt") != slurp(root / "m3.ckpt")) pass = false;

  // PPM round trip is bit-exact on quantized data.
  const Image img = read_ppm(root / "d1" / "pairs" / "000000_src.ppm");
  if (encode_ppm(img) != slurp(root / "d1" / "pairs" / "000000_src.ppm"))
    pass = false;

  // Corruption is rejected with FormatViolation.
  auto reject = [&](const std::function<void()>& fn) {
    try {
      fn();
      return false;
    } catch (const FormatViolation&) {
      return true;
    }
  };
  auto ckpt_bytes = slurp(root / "m1.ckpt");
  ckpt_bytes[2] = 'X';
  {
    std::ofstream f(root / "bad.ckpt", std::ios::binary);
    f.write(reinterpret_cast<const char*>(ckpt_bytes.data()),
            static_cast<std::streamsize>(ckpt_bytes.size()));
  }
  if (!reject([&]() { load_model(root / "bad.ckpt"); })) pass = false;

  auto ppm_bytes = slurp(root / "d1" / "pairs" / "000000_src.ppm");
  ppm_bytes[0] = 'Q';
  if (!reject([&]() {
        decode_ppm(ppm_bytes, "bad.ppm");
      }))
    pass = false;

  fs::remove_all(root);
  report(8, pass, "byte-identical regeneration/training; round trips; rejects");
}

// --- 9. two-stream consistency ----------------------------------------------

void criterion_two_stream() {
  bool pass = true;
  BackboneConfig cfg;
  cfg.input_size = 16;
  cfg.widths = {4, 6, 8};
  cfg.se_reduction = 2;
  cfg.reg_conv1_channels = 8;
  cfg.reg_conv2_channels = 4;
  ModelWeights w = init_weights(cfg, 77);
  SeededRng rng(78);
  Tensor fc = w.at("reg.fc.weight");
  for (int64_t i = 0; i < fc.size(); ++i) fc.data()[i] = rng.uniform(-0.1, 0.1);

  auto rand_img = [&]() {
    Tensor t = Tensor::zeros({1, 3, 16, 16});
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform();
    return t;
  };
  const Tensor i_s = rand_img();
  const Tensor i_t = rand_img();

  const FourPreds preds = forward_two_stream(i_s, i_t, i_t, w, cfg);
  for (int j = 0; j < 6; ++j) {
    if (preds.st.data()[j] != preds.st_aug.data()[j]) pass = false;
    if (preds.ts.data()[j] != preds.ts_aug.data()[j]) pass = false;
  }

  const LossGrid grid = LossGrid::regular(20);
  const double id_loss =
      loss_id(ops::row(preds.st, 0), ops::row(preds.ts, 0),
              ops::row(preds.st_aug, 0), ops::row(preds.ts_aug, 0), grid)
          .item();
  if (std::fabs(id_loss) > 1e-10) pass = false;

  const FourPreds swapped = forward_two_stream(i_t, i_s, i_s, w, cfg);
  for (int j = 0; j < 6; ++j) {
    if (swapped.st.data()[j] != preds.ts.data()[j]) pass = false;
    if (swapped.ts.data()[j] != preds.st.data()[j]) pass = false;
  }
  report(9, pass, "two-stream collapse, zero identity loss, swap symmetry");
}

}  // namespace

int main() {
  criterion_gradients();
  criterion_affine();
  criterion_losses();
  criterion_pck();
  criterion_ensemble();
  criterion_training();  // also reports 7
  criterion_determinism();
  criterion_two_stream();
  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
