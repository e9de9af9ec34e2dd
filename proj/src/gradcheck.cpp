#include "aeromatch/gradcheck.hpp"

#include <chrono>
#include <cmath>

#include "aeromatch/losses.hpp"
#include "aeromatch/matchnet.hpp"
#include "aeromatch/rng.hpp"
#include "aeromatch/sampler.hpp"

namespace aeromatch {

double finite_diff_max_rel_err(const std::function<Tensor()>& forward,
                               std::span<const Tensor> leaves, double h) {
  for (const Tensor& leaf : leaves) {
    if (!leaf.requires_grad())
      throw Error("finite_diff_max_rel_err: leaf without requires_grad");
    const_cast<Tensor&>(leaf).zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tape::Use use(tape);
    Tensor loss = forward();
    tape.backward(loss);
    for (const Tensor& leaf : leaves)
      analytic.emplace_back(leaf.grad(), leaf.grad() + leaf.size());
  }

  double max_rel = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    const Tensor& leaf = leaves[li];
    for (int64_t i = 0; i < leaf.size(); ++i) {
      const double keep = leaf.data()[i];
      leaf.data()[i] = keep + h;
      const double up = forward().item();
      leaf.data()[i] = keep - h;
      const double down = forward().item();
      leaf.data()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic[li][static_cast<size_t>(i)];
      const double denom = std::max({1.0, std::fabs(ad), std::fabs(fd)});
      max_rel = std::max(max_rel, std::fabs(ad - fd) / denom);
    }
  }
  return max_rel;
}

namespace {

namespace o = ops;

Tensor random_tensor(Shape shape, SeededRng& rng, double lo, double hi,
                     bool rg = true) {
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from zero, for ops with a kink there.
Tensor random_signed(Shape shape, SeededRng& rng, double lo = 0.1, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (int64_t i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(lo, hi);
    t.data()[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

/// Fixed random projection so the scalar loss sees every output element.
Tensor project(const Tensor& y, SeededRng& rng) {
  Tensor w = Tensor::zeros(y.shape(), false);
  for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
  return o::sum(o::mul(y, w));
}

struct CaseRunner {
  GradCheckReport* report;

  void run(const std::string& name, double tol,
           const std::function<Tensor()>& forward,
           std::span<const Tensor> leaves, double adjust = 0.0) {
    GradCheckCase c;
    c.name = name;
    c.tolerance = tol;
    c.max_rel_err = finite_diff_max_rel_err(forward, leaves) + adjust;
    c.pass = c.max_rel_err < tol;
    report->all_pass = report->all_pass && c.pass;
    report->cases.push_back(std::move(c));
  }
};

BackboneConfig tiny_config() {
  BackboneConfig cfg;
  cfg.input_size = 16;
  cfg.widths = {4, 6, 8};
  cfg.se_reduction = 2;
  cfg.reg_conv1_channels = 8;
  cfg.reg_conv2_channels = 4;
  return cfg;
}

}  // namespace

GradCheckReport run_gradcheck(uint64_t seed, const GradCheckOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;
  CaseRunner runner{&report};
  SeededRng rng(seed);

  {
    Tensor x = random_signed({2, 3, 4, 5}, rng);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() { SeededRng p2 = prj; return project(o::relu(x), p2); };
    runner.run("relu", 1e-6, fwd, std::vector<Tensor>{x});
  }
  {
    Tensor x = random_tensor({3, 7}, rng, -2.0, 2.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() { SeededRng p2 = prj; return project(o::sigmoid(x), p2); };
    runner.run("sigmoid", 1e-6, fwd, std::vector<Tensor>{x});
  }
  {
    Tensor x = random_tensor({1, 2, 6, 6}, rng, -1.0, 1.0);
    Tensor k = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor b = random_tensor({3}, rng, -0.5, 0.5);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() {
      SeededRng p2 = prj;
      return project(o::conv2d(x, k, b, 1, 1), p2);
    };
    runner.run("conv2d", 1e-6, fwd, std::vector<Tensor>{x, k, b},
               opts.conv_grad_perturbation);
  }
  {
    // Tie-free pooling input: every 2x2 window keeps a clear gap so finite
    // differences never cross an argmax boundary.
    Tensor x = Tensor::zeros({1, 2, 4, 4}, true);
    for (int b = 0; b < 2; ++b)
      for (int oy = 0; oy < 2; ++oy)
        for (int ox = 0; ox < 2; ++ox) {
          double vals[4];
          for (;;) {
            for (double& v : vals) v = rng.uniform(0.0, 1.0);
            bool ok = true;
            for (int i = 0; i < 4 && ok; ++i)
              for (int j = i + 1; j < 4; ++j)
                if (std::fabs(vals[i] - vals[j]) < 0.05) {
                  ok = false;
                  break;
                }
            if (ok) break;
          }
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              x.data()[((b * 4) + (2 * oy + dy)) * 4 + 2 * ox + dx] =
                  vals[dy * 2 + dx];
        }
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() { SeededRng p2 = prj; return project(o::maxpool2(x), p2); };
    runner.run("maxpool2", 1e-6, fwd, std::vector<Tensor>{x});
  }
  {
    Tensor x = random_tensor({2, 3, 4, 4}, rng, -1.0, 1.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() {
      SeededRng p2 = prj;
      return project(o::global_avg_pool(x), p2);
    };
    runner.run("global_avg_pool", 1e-6, fwd, std::vector<Tensor>{x});
  }
  {
    Tensor x = random_tensor({3, 5}, rng, -1.0, 1.0);
    Tensor w = random_tensor({5, 4}, rng, -1.0, 1.0);
    Tensor b = random_tensor({4}, rng, -1.0, 1.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() { SeededRng p2 = prj; return project(o::linear(x, w, b), p2); };
    runner.run("linear", 1e-6, fwd, std::vector<Tensor>{x, w, b});
  }
  {
    Tensor x = random_signed({2, 4, 3, 3}, rng, 0.2, 1.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() {
      SeededRng p2 = prj;
      return project(o::l2_normalize_channels(x, 1e-12), p2);
    };
    runner.run("l2_normalize_channels", 1e-6, fwd, std::vector<Tensor>{x});
  }
  {
    Tensor x = random_tensor({2, 4, 3, 3}, rng, -1.0, 1.0);
    Tensor s = random_tensor({2, 4}, rng, 0.1, 1.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() {
      SeededRng p2 = prj;
      return project(o::channel_scale(x, s), p2);
    };
    runner.run("channel_scale", 1e-6, fwd, std::vector<Tensor>{x, s});
  }
  {
    Tensor x = random_tensor({1, 4, 3, 3}, rng, -1.0, 1.0);
    Tensor w1 = random_tensor({4, 2}, rng, -1.0, 1.0);
    Tensor b1 = random_tensor({2}, rng, -0.5, 0.5);
    Tensor w2 = random_tensor({2, 4}, rng, -1.0, 1.0);
    Tensor b2 = random_tensor({4}, rng, -0.5, 0.5);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() {
      SeededRng p2 = prj;
      return project(se_block(x, w1, b1, w2, b2), p2);
    };
    runner.run("se_block", 1e-5, fwd, std::vector<Tensor>{x, w1, b1, w2, b2});
  }
  {
    // Grid coordinates kept away from pixel centres: bilinear sampling has a
    // derivative kink at every lattice line.
    Tensor src = random_tensor({1, 2, 5, 5}, rng, 0.0, 1.0);
    Tensor grid = Tensor::zeros({3, 4, 2}, true);
    for (int64_t i = 0; i < grid.size(); ++i) {
      for (;;) {
        const double c = rng.uniform(-0.9, 0.9);
        const double f = (c + 1.0) * 0.5 * 4.0;  // extent 5
        if (std::fabs(f - std::round(f)) > 0.05) {
          grid.data()[i] = c;
          break;
        }
      }
    }
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() {
      SeededRng p2 = prj;
      return project(o::bilinear_sample(src, grid), p2);
    };
    runner.run("bilinear_sample", 1e-5, fwd, std::vector<Tensor>{src, grid});
  }
  {
    Tensor fs = random_signed({1, 6, 3, 3}, rng, 0.2, 1.0);
    Tensor ft = random_signed({1, 6, 3, 3}, rng, 0.2, 1.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() { SeededRng p2 = prj; return project(correlate(fs, ft), p2); };
    runner.run("correlate", 1e-5, fwd, std::vector<Tensor>{fs, ft});
  }
  {
    const BackboneConfig cfg = tiny_config();
    ModelWeights w = init_weights(cfg, seed ^ 0xabcdefULL);
    // Non-zero output layer so regression gradients are not trivially zero.
    Tensor fc = w.at("reg.fc.weight");
    for (int64_t i = 0; i < fc.size(); ++i) fc.data()[i] = rng.uniform(-0.05, 0.05);
    Tensor corr = random_tensor({1, cfg.correlation_channels(), cfg.feature_size(),
                                 cfg.feature_size()},
                                rng, 0.0, 1.0);
    SeededRng prj(rng.next_u64());
    auto fwd = [&]() { SeededRng p2 = prj; return project(regress(corr, w, cfg), p2); };
    std::vector<Tensor> leaves;
    for (const auto& [name, t] : w.tensors)
      if (name.rfind("reg.", 0) == 0) leaves.push_back(t);
    runner.run("regress", 1e-4, fwd, leaves);
  }
  const LossGrid grid = LossGrid::regular(8);
  {
    Tensor pred = random_tensor({6}, rng, -0.5, 1.5);
    Tensor ref = random_tensor({6}, rng, -0.5, 1.5);
    auto fwd = [&]() { return grid_loss(pred, ref, grid); };
    runner.run("grid_loss", 1e-6, fwd, std::vector<Tensor>{pred, ref});
  }
  {
    SeededRng gt_rng(seed ^ 0x5115ULL);
    const AffineParams gt = random_affine(gt_rng);
    Tensor st = random_tensor({6}, rng, -0.5, 1.5);
    Tensor ts = random_tensor({6}, rng, -0.5, 1.5);
    Tensor sta = random_tensor({6}, rng, -0.5, 1.5);
    Tensor tsa = random_tensor({6}, rng, -0.5, 1.5);
    auto fwd = [&]() {
      return total_loss(st, ts, sta, tsa, gt, BalanceParams{}, grid).total;
    };
    runner.run("total_loss", 1e-6, fwd, std::vector<Tensor>{st, ts, sta, tsa});
  }
  {
    const BackboneConfig cfg = tiny_config();
    ModelWeights w = init_weights(cfg, seed ^ 0x7777ULL);
    Tensor i_s = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0, false);
    Tensor i_t = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0, false);
    Tensor i_ta = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0, false);
    SeededRng gt_rng(seed ^ 0x9e37ULL);
    const AffineParams gt = random_affine(gt_rng);
    auto fwd = [&]() {
      const FourPreds preds = forward_two_stream(i_s, i_t, i_ta, w, cfg);
      return total_loss(o::row(preds.st, 0), o::row(preds.ts, 0),
                        o::row(preds.st_aug, 0), o::row(preds.ts_aug, 0), gt,
                        BalanceParams{}, grid)
          .total;
    };
    runner.run("end_to_end", 1e-4, fwd, w.params());
  }

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace aeromatch
