#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aeromatch/checkpoint.hpp"
#include "aeromatch/gradcheck.hpp"
#include "aeromatch/pck.hpp"
#include "aeromatch/ppm.hpp"
#include "aeromatch/sampler.hpp"
#include "aeromatch/train.hpp"

namespace am = aeromatch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int cmd_gen_data(uint64_t seed, int count, int size, int kp,
                 const std::string& out) {
  am::GenConfig cfg;
  cfg.seed = seed;
  cfg.count = count;
  cfg.size = size;
  cfg.keypoints = kp;
  const am::Dataset ds = am::generate_dataset(cfg);
  am::write_dataset(ds, out);
  std::printf("wrote %d pairs (%dx%d, %d keypoints each) to %s\n", count, size,
              size, kp, out.c_str());
  return kExitOk;
}

struct TrainFlags {
  std::string data;
  std::string out = "model.ckpt";
  std::string log;
  std::string resume;
  int epochs = 1;
  long max_steps = 0;
  double lr = 5e-4;
  int batch = 10;
  uint64_t seed = 0;
  double alpha = 0.5, beta = 0.3, gamma = 0.2;
  double jitter_min = 0.6, jitter_max = 1.4;
  long checkpoint_every = 0;
  bool detach_augmented = false;
};

int cmd_train(const TrainFlags& f) {
  const am::Dataset ds = am::read_dataset(f.data);
  am::TrainConfig cfg;
  cfg.lr = f.lr;
  cfg.batch = f.batch;
  cfg.epochs = f.epochs;
  cfg.max_steps = f.max_steps;
  cfg.seed = f.seed;
  cfg.balance = {f.alpha, f.beta, f.gamma};
  cfg.backbone.input_size = ds.manifest.image_size;
  cfg.jitter.brightness_min = cfg.jitter.contrast_min = cfg.jitter.saturation_min =
      f.jitter_min;
  cfg.jitter.brightness_max = cfg.jitter.contrast_max = cfg.jitter.saturation_max =
      f.jitter_max;
  cfg.detach_augmented = f.detach_augmented;
  cfg.checkpoint_path = f.out;
  cfg.checkpoint_every = f.checkpoint_every;
  cfg.resume_from = f.resume;

  std::ofstream log_file;
  if (!f.log.empty()) {
    log_file.open(f.log, std::ios::trunc);
    if (!log_file) throw am::IoError("cannot open log '" + f.log + "'");
  }
  std::ostream& log = f.log.empty() ? std::cout : log_file;

  const am::TrainResult result =
      am::train_model(ds, cfg, [&](const am::StepRecord& r) {
        nlohmann::ordered_json j;
        j["step"] = r.step;
        j["loss"] = r.loss;
        j["l_org"] = r.l_org;
        j["l_aug"] = r.l_aug;
        j["l_id"] = r.l_id;
        log << j.dump() << "\n";
      });
  std::printf("trained %ld steps; checkpoint: %s\n", result.steps, f.out.c_str());
  return kExitOk;
}

int cmd_warp(const std::string& model_path, const std::string& source_path,
             const std::string& target_path, const std::string& out_path,
             const std::string& mean_name, bool no_ensemble) {
  const am::ModelCheckpoint ckpt = am::load_model(model_path);
  const int s = ckpt.config.input_size;
  const am::Image source = am::resize_bilinear(am::read_ppm(source_path), s, s);
  const am::Image target = am::resize_bilinear(am::read_ppm(target_path), s, s);

  const am::TwoPreds preds =
      am::forward_bidirectional(am::image_to_tensor(source),
                                am::image_to_tensor(target), ckpt.weights,
                                ckpt.config);
  const am::AffineParams theta_st = am::tensor_to_affine(preds.st);
  const am::AffineParams theta_ts = am::tensor_to_affine(preds.ts);

  am::AffineParams theta_en = theta_st;
  if (!no_ensemble) {
    const am::FuseResult fused =
        am::ensemble_fuse(theta_st, theta_ts, am::mean_kind_from_string(mean_name));
    theta_en = fused.value;
    if (fused.degenerate)
      std::fprintf(stderr,
                   "warning: %s mean undefined for some entries; "
                   "those fell back to arithmetic\n",
                   mean_name.c_str());
  }

  am::write_ppm(out_path, am::warp_image(source, theta_en));
  std::printf("theta_st: %s\n", am::to_text(theta_st).c_str());
  std::printf("theta_ts: %s\n", am::to_text(theta_ts).c_str());
  std::printf("theta_en: %s\n", am::to_text(theta_en).c_str());
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             std::vector<double> taus, bool no_ensemble, bool as_json) {
  const am::ModelCheckpoint ckpt = am::load_model(model_path);
  const am::Dataset ds = am::read_dataset(data_path);
  if (taus.empty()) taus = {0.05, 0.03, 0.01};

  std::vector<am::PckItem> items;
  items.reserve(ds.pairs.size());
  for (size_t i = 0; i < ds.pairs.size(); ++i) {
    const am::TrainingPair& pair = ds.pairs[i];
    am::Image src = pair.source, tgt = pair.target;
    if (pair.source.height != ckpt.config.input_size) {
      src = am::resize_bilinear(src, ckpt.config.input_size, ckpt.config.input_size);
      tgt = am::resize_bilinear(tgt, ckpt.config.input_size, ckpt.config.input_size);
    }
    const am::TwoPreds preds = am::forward_bidirectional(
        am::image_to_tensor(src), am::image_to_tensor(tgt), ckpt.weights,
        ckpt.config);
    const am::AffineParams theta_st = am::tensor_to_affine(preds.st);
    am::AffineParams pred = theta_st;
    if (!no_ensemble)
      pred = am::ensemble_fuse(theta_st, am::tensor_to_affine(preds.ts)).value;
    items.push_back({pair.id, pred, pair.gt, &ds.keypoints[i], pair.target.height,
                     pair.target.width});
  }
  const am::PckReport report = am::pck_dataset(items, taus);
  if (as_json)
    std::printf("%s\n", report.json().c_str());
  else
    std::printf("%s", report.table().c_str());
  return kExitOk;
}

int cmd_gradcheck(uint64_t seed) {
  const am::GradCheckReport report = am::run_gradcheck(seed);
  for (const am::GradCheckCase& c : report.cases)
    std::printf("%-24s max_rel_err %.3e  tol %.0e  %s\n", c.name.c_str(),
                c.max_rel_err, c.tolerance, c.pass ? "ok" : "FAIL");
  std::printf("gradcheck %s in %.1fs\n", report.all_pass ? "passed" : "FAILED",
              report.seconds);
  return report.all_pass ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aeromatch: bidirectional affine matching on synthetic aerial imagery"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  uint64_t gen_seed = 0;
  int gen_count = 0, gen_size = 64, gen_kp = 20;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--count", gen_count, "number of pairs")->required();
  gen->add_option("--size", gen_size, "output image size");
  gen->add_option("--kp", gen_kp, "keypoints per pair");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train the matching network");
  TrainFlags tf;
  train->add_option("--data", tf.data, "dataset directory")->required();
  train->add_option("--out", tf.out, "checkpoint path");
  train->add_option("--epochs", tf.epochs, "epochs to run");
  train->add_option("--max-steps", tf.max_steps, "stop after this many steps");
  train->add_option("--lr", tf.lr, "learning rate");
  train->add_option("--batch", tf.batch, "batch size");
  train->add_option("--seed", tf.seed, "training seed");
  train->add_option("--alpha", tf.alpha, "weight of the original-pair loss");
  train->add_option("--beta", tf.beta, "weight of the augmented-pair loss");
  train->add_option("--gamma", tf.gamma, "weight of the identity loss");
  train->add_option("--jitter-min", tf.jitter_min, "lower jitter factor");
  train->add_option("--jitter-max", tf.jitter_max, "upper jitter factor");
  train->add_option("--log", tf.log, "JSONL loss log (default: stdout)");
  train->add_option("--checkpoint-every", tf.checkpoint_every,
                    "checkpoint interval in steps (0: final only)");
  train->add_option("--resume", tf.resume, "resume from a checkpoint");
  train->add_flag("--detach-augmented", tf.detach_augmented,
                  "stop identity-loss gradients into the augmented branch");

  // warp
  auto* warp = app.add_subcommand("warp", "align a source image to a target");
  std::string w_model, w_source, w_target, w_out, w_mean = "arithmetic";
  bool w_no_ensemble = false;
  warp->add_option("--model", w_model)->required();
  warp->add_option("--source", w_source)->required();
  warp->add_option("--target", w_target)->required();
  warp->add_option("--out", w_out)->required();
  warp->add_option("--mean", w_mean, "arithmetic|harmonic|geometric");
  warp->add_flag("--no-ensemble", w_no_ensemble, "use theta_st alone");

  // eval
  auto* eval = app.add_subcommand("eval", "PCK evaluation over a dataset");
  std::string e_model, e_data;
  std::vector<double> e_taus;
  bool e_no_ensemble = false, e_json = false;
  eval->add_option("--model", e_model)->required();
  eval->add_option("--data", e_data)->required();
  eval->add_option("--tau", e_taus, "tolerance list")->delimiter(',');
  eval->add_flag("--no-ensemble", e_no_ensemble);
  eval->add_flag("--json", e_json, "machine-readable report");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_seed, gen_count, gen_size, gen_kp, gen_out);
    if (train->parsed()) return cmd_train(tf);
    if (warp->parsed())
      return cmd_warp(w_model, w_source, w_target, w_out, w_mean, w_no_ensemble);
    if (eval->parsed()) return cmd_eval(e_model, e_data, e_taus, e_no_ensemble, e_json);
    if (gc->parsed()) return cmd_gradcheck(gc_seed);
  } catch (const am::DivergedLoss& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const am::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const am::SingularTransform& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const am::NotScalar& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const am::Error& e) {
    // Io, FormatViolation, ShapeMismatch, MissingKeypoints, ...
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitUsage;
}
