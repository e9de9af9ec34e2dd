#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "aeromatch/ppm.hpp"

// End-to-end checks against the real binary; the path arrives in
// AEROMATCH_BIN (set by ctest).

using namespace aeromatch;
namespace fs = std::filesystem;

namespace {

std::string binary() {
  const char* bin = std::getenv("AEROMATCH_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "AEROMATCH_BIN not set");
  return bin;
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path out_file =
      fs::temp_directory_path() / ("aeromatch_cli_out_" + std::to_string(counter++));
  const std::string cmd = binary() + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream f(out_file);
  r.output.assign(std::istreambuf_iterator<char>(f),
                  std::istreambuf_iterator<char>());
  fs::remove(out_file);
  return r;
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("aeromatch_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// One shared tiny dataset + model for the pipeline tests.
struct Pipeline {
  fs::path root = temp_dir("pipeline");
  fs::path data = root / "data";
  fs::path model = root / "model.ckpt";

  Pipeline() {
    REQUIRE(run("gen-data --seed 5 --count 4 --size 32 --kp 5 --out " +
                data.string())
                .exit_code == 0);
    REQUIRE(run("train --data " + data.string() + " --max-steps 2 --batch 2 " +
                "--out " + model.string() + " --log " +
                (root / "train.jsonl").string())
                .exit_code == 0);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 1") {
  CHECK(run("").exit_code == 1);
  CHECK(run("frobnicate").exit_code == 1);
  CHECK(run("gen-data --out /tmp/x").exit_code == 1);  // missing --count
  CHECK(run("--help").exit_code == 0);
}

TEST_CASE("cli: gen-data is byte-deterministic across runs") {
  const fs::path d1 = temp_dir("gen1");
  const fs::path d2 = temp_dir("gen2");
  CHECK(run("gen-data --seed 11 --count 3 --size 32 --kp 5 --out " + d1.string())
            .exit_code == 0);
  CHECK(run("gen-data --seed 11 --count 3 --size 32 --kp 5 --out " + d2.string())
            .exit_code == 0);
  for (const char* rel : {"manifest.json", "gt.jsonl", "kp.jsonl",
                          "pairs/000002_src.ppm", "pairs/000002_tgt.ppm"})
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("cli: gen-data count 0 still produces a readable dataset") {
  const fs::path dir = temp_dir("gen0");
  CHECK(run("gen-data --seed 1 --count 0 --out " + dir.string()).exit_code == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli: train writes a checkpoint and a JSONL log") {
  Pipeline& p = pipeline();
  CHECK(fs::exists(p.model));
  std::ifstream log(p.root / "train.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("step"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("l_org"));
    CHECK(j.contains("l_aug"));
    CHECK(j.contains("l_id"));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("cli: eval reports PCK, json and table agree") {
  Pipeline& p = pipeline();
  const RunResult table = run("eval --model " + p.model.string() + " --data " +
                              p.data.string() + " --tau 0.5,0.3,0.1");
  CHECK(table.exit_code == 0);
  CHECK(table.output.find("tau") != std::string::npos);

  const RunResult js = run("eval --model " + p.model.string() + " --data " +
                           p.data.string() + " --tau 0.5,0.3,0.1 --json");
  CHECK(js.exit_code == 0);
  const auto parsed = nlohmann::json::parse(js.output);
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 3);
  // Monotone in tau and mirrored by the text table.
  CHECK(parsed[0]["pck"].get<double>() >= parsed[1]["pck"].get<double>());
  CHECK(parsed[1]["pck"].get<double>() >= parsed[2]["pck"].get<double>());
  for (const auto& row : parsed) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-8.4f", row["pck"].get<double>());
    CHECK(table.output.find(buf) != std::string::npos);
  }
}

TEST_CASE("cli: eval exit codes for missing inputs") {
  Pipeline& p = pipeline();
  CHECK(run("eval --model " + p.model.string() + " --data /nonexistent")
            .exit_code == 2);
  CHECK(run("eval --model /nonexistent.ckpt --data " + p.data.string())
            .exit_code == 2);
}

TEST_CASE("cli: corrupted checkpoint is a data error (exit 2)") {
  Pipeline& p = pipeline();
  const fs::path bad = p.root / "bad.ckpt";
  auto bytes = slurp(p.model);
  bytes[0] = 'Z';
  std::ofstream f(bad, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  f.close();
  const RunResult r =
      run("eval --model " + bad.string() + " --data " + p.data.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("magic") != std::string::npos);
}

TEST_CASE("cli: warp writes the aligned image and prints the parameters") {
  Pipeline& p = pipeline();
  const fs::path src = p.data / "pairs" / "000000_src.ppm";
  const fs::path tgt = p.data / "pairs" / "000000_tgt.ppm";
  const fs::path out = p.root / "warped.ppm";
  const RunResult r = run("warp --model " + p.model.string() + " --source " +
                          src.string() + " --target " + tgt.string() +
                          " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out));
  CHECK(r.output.find("theta_st:") != std::string::npos);
  CHECK(r.output.find("theta_ts:") != std::string::npos);
  CHECK(r.output.find("theta_en:") != std::string::npos);

  for (const char* mean : {"harmonic", "geometric"}) {
    const RunResult rm = run("warp --model " + p.model.string() + " --source " +
                             src.string() + " --target " + tgt.string() +
                             " --out " + out.string() + " --mean " + mean);
    CHECK(rm.exit_code == 0);
  }
  const RunResult rn = run("warp --model " + p.model.string() + " --source " +
                           src.string() + " --target " + tgt.string() +
                           " --out " + out.string() + " --no-ensemble");
  CHECK(rn.exit_code == 0);
}

TEST_CASE("cli: warp with an untrained model is close to the resized source") {
  // Fresh (identity-initialized) model: theta_en is the identity up to 1e-3,
  // so the warped output stays close to the source.
  Pipeline& p = pipeline();
  const fs::path fresh_data = temp_dir("fresh");
  const fs::path fresh_model = fresh_data / "fresh.ckpt";
  REQUIRE(run("gen-data --seed 21 --count 2 --size 32 --kp 5 --out " +
              fresh_data.string())
              .exit_code == 0);
  // 0 steps: initialization only.
  REQUIRE(run("train --data " + fresh_data.string() +
              " --max-steps 0 --epochs 0 --out " + fresh_model.string())
              .exit_code == 0);
  const fs::path src = fresh_data / "pairs" / "000000_src.ppm";
  const fs::path tgt = fresh_data / "pairs" / "000000_tgt.ppm";
  const fs::path out = fresh_data / "warped.ppm";
  REQUIRE(run("warp --model " + fresh_model.string() + " --source " +
              src.string() + " --target " + tgt.string() + " --out " +
              out.string())
              .exit_code == 0);
  const Image warped = read_ppm(out);
  const Image source = read_ppm(src);
  double mean_err = 0;
  for (size_t i = 0; i < warped.data.size(); ++i)
    mean_err += std::fabs(warped.data[i] - source.data[i]);
  mean_err /= static_cast<double>(warped.data.size());
  CHECK(mean_err < 0.05);
  fs::remove_all(fresh_data);
}

TEST_CASE("cli: consistent branches make ensemble and raw output identical") {
  // The identity-initialized head emits theta_st == theta_ts == identity
  // exactly, so theta_ts == invert(theta_st) bitwise and the ensembled warp
  // must equal the --no-ensemble warp pixel for pixel.
  Pipeline& p = pipeline();
  const fs::path dir = temp_dir("fuse");
  const fs::path model = dir / "init.ckpt";
  REQUIRE(run("train --data " + p.data.string() + " --max-steps 0 --epochs 0 " +
              "--out " + model.string())
              .exit_code == 0);
  const fs::path src = p.data / "pairs" / "000001_src.ppm";
  const fs::path tgt = p.data / "pairs" / "000001_tgt.ppm";
  const fs::path fused = dir / "fused.ppm";
  const fs::path raw = dir / "raw.ppm";
  REQUIRE(run("warp --model " + model.string() + " --source " + src.string() +
              " --target " + tgt.string() + " --out " + fused.string() +
              " --mean arithmetic")
              .exit_code == 0);
  REQUIRE(run("warp --model " + model.string() + " --source " + src.string() +
              " --target " + tgt.string() + " --out " + raw.string() +
              " --no-ensemble")
              .exit_code == 0);
  CHECK(slurp(fused) == slurp(raw));
  fs::remove_all(dir);
}

TEST_CASE("cli: gen-data of 200 pairs at size 64 stays inside the time budget") {
  const fs::path dir = temp_dir("budget");
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(run("gen-data --seed 3 --count 200 --size 64 --out " + dir.string())
            .exit_code == 0);
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(dt < 60.0);
  CHECK(fs::exists(dir / "pairs" / "000199_tgt.ppm"));
  fs::remove_all(dir);
}

TEST_CASE("cli: gradcheck passes and reports per-op lines") {
  const RunResult r = run("gradcheck --seed 0");
  CHECK(r.exit_code == 0);
  for (const char* op : {"conv2d", "relu", "maxpool2", "global_avg_pool", "linear",
                         "sigmoid", "l2_normalize_channels", "bilinear_sample",
                         "correlate", "regress", "grid_loss", "total_loss",
                         "end_to_end"})
    CHECK(r.output.find(op) != std::string::npos);
  CHECK(r.output.find("gradcheck passed") != std::string::npos);
}
