#include "helpers.hpp"

#include "doctest.h"
#include "rgbdsal/cli.hpp"
#include "rgbdsal/data_io.hpp"
#include "rgbdsal/metrics.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

using namespace rgbdsal;
using namespace rgbdsal::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// One small trained run shared by the tests that need a checkpoint.
const fs::path& trained_run() {
  static const fs::path root = [] {
    auto dir = scratch_dir("cli_trained");
    auto r = cli({"synth", "--out", (dir / "data").string(), "--n", "12", "--size", "16", "--seed", "2"});
    REQUIRE(r.code == 0);
    r = cli({"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(), "--resolution", "16",
             "--epochs", "1,1,1,1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return dir;
  }();
  return root;
}

}  // namespace

TEST_CASE("synth output is byte-identical across runs") {
  const auto dir = scratch_dir("cli_synth");
  for (const char* name : {"a", "b"}) {
    const auto r = cli({"synth", "--out", (dir / name).string(), "--n", "6", "--size", "32", "--seed", "5"});
    REQUIRE(r.code == 0);
  }
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "resolved_config.json") continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    CHECK_MESSAGE(slurp(e.path()) == slurp(dir / "b" / rel), rel.string());
  }
  CHECK(fs::exists(dir / "a" / "manifest.json"));
  CHECK(slurp(dir / "a" / "resolved_config.json").find("\"seed\": 5") != std::string::npos);

  const auto again = cli({"synth", "--out", (dir / "a").string(), "--n", "6"});
  CHECK(again.code == kExitUsage);
  CHECK(again.err.find("--force") != std::string::npos);
  CHECK(cli({"synth", "--out", (dir / "a").string(), "--n", "3", "--force"}).code == 0);
  CHECK(list_images(dir / "a" / "RGB").size() == 3);
}

TEST_CASE("synth depth modes") {
  const auto dir = scratch_dir("cli_flat");
  REQUIRE(cli({"synth", "--out", (dir / "f").string(), "--n", "3", "--size", "16", "--depth-mode", "flat"}).code == 0);
  LoadOptions o;
  o.working_resolution = 0;
  for (const auto& s : load_dataset(dir / "f", "", o)) {
    CHECK(s.depth.values().maxCoeff() == s.depth.values().minCoeff());
    CHECK(s.tag == "flat");
  }
  CHECK(cli({"synth", "--out", (dir / "g").string(), "--mix", "clean=1,wobbly=1"}).code == kExitUsage);
  CHECK(cli({"synth", "--out", (dir / "h").string(), "--size", "8"}).code == kExitUsage);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"train", "--data", "x"}).code == kExitUsage);
  const auto missing = cli({"eval", "--pred-dir", "/nonexistent/p", "--gt-dir", "/nonexistent/g", "--out",
                            scratch_dir("cli_exit").string()});
  CHECK(missing.code == kExitData);
  CHECK(missing.err.find("data error") != std::string::npos);
}

TEST_CASE("train refuses a stage range without its predecessor") {
  const auto dir = scratch_dir("cli_stages");
  REQUIRE(cli({"synth", "--out", (dir / "data").string(), "--n", "6", "--size", "16"}).code == 0);
  const auto r = cli({"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(), "--stages", "2",
                      "--resolution", "16"});
  CHECK(r.code == kExitInvariant);
  CHECK(r.err.find("stage ordering violated") != std::string::npos);
  CHECK(r.err.find("--stages 1") != std::string::npos);
  CHECK(cli({"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(), "--stages", "3-2"}).code ==
        kExitUsage);
  CHECK(cli({"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(), "--epochs", "1,2"}).code ==
        kExitUsage);
}

TEST_CASE("train writes the run directory") {
  const auto& dir = trained_run();
  for (const char* f : {"stage1.ckpt", "stage4.ckpt", "train_log.jsonl", "split.json", "metrics.csv",
                        "omega_by_tag.json", "resolved_config.json", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  }
  const auto rows = parse_csv(slurp(dir / "run" / "metrics.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].dataset == "rgb");
  CHECK(rows[3].dataset == "simple");
  CHECK(slurp(dir / "run" / "manifest.json").find("stage4.ckpt") != std::string::npos);
}

TEST_CASE("staged training resumes from the previous checkpoint") {
  const auto dir = scratch_dir("cli_resume");
  REQUIRE(cli({"synth", "--out", (dir / "data").string(), "--n", "8", "--size", "16"}).code == 0);
  const std::vector<std::string> base{"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(),
                                      "--resolution", "16", "--epochs", "1,1,1,1"};
  auto first = base;
  first.insert(first.end(), {"--stages", "1"});
  REQUIRE(cli(first).code == 0);
  CHECK_FALSE(fs::exists(dir / "run" / "stage2.ckpt"));
  auto rest = base;
  rest.insert(rest.end(), {"--stages", "2-4"});
  const auto r = cli(rest);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "run" / "stage4.ckpt"));
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
}

TEST_CASE("infer, pseudo-gt, fuse and eval") {
  const auto& dir = trained_run();
  const auto ckpt = (dir / "run" / "stage4.ckpt").string();
  const auto data = (dir / "data").string();
  const auto out = dir / "infer";
  auto r = cli({"infer", "--checkpoint", ckpt, "--data", data, "--out", out.string(), "--emit-omega", "--emit-streams"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(list_images(out).size() == 12);
  CHECK(list_images(out / "omega").size() == 12);
  CHECK(list_images(out / "dsal").size() == 12);

  r = cli({"infer", "--checkpoint", (dir / "run" / "stage1.ckpt").string(), "--data", data, "--out",
           (dir / "infer1").string()});
  CHECK(r.code == kExitInvariant);

  r = cli({"pseudo-gt", "--checkpoint", (dir / "run" / "stage1.ckpt").string(), "--data", data, "--out",
           (dir / "pgt").string(), "--mode", "p"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "pgt" / "s0000_pgt.png"));

  // omega = 1 picks the depth map, omega = 0 the RGB map
  const auto fz = dir / "fuse_in";
  for (const char* sub : {"w1", "w0", "d", "r"}) fs::create_directories(fz / sub);
  Rng rng(3);
  const auto d = random_grid_map(rng, 8, 8), rgb = random_grid_map(rng, 8, 8);
  save_map(ScalarMap::constant(8, 8, 1.0f), fz / "w1" / "k.png");
  save_map(ScalarMap::constant(8, 8, 0.0f), fz / "w0" / "k.png");
  save_map(d, fz / "d" / "k.png");
  save_map(rgb, fz / "r" / "k.png");
  for (const char* w : {"w1", "w0"}) {
    r = cli({"fuse", "--omega-dir", (fz / w).string(), "--dsal-dir", (fz / "d").string(), "--rgbsal-dir",
             (fz / "r").string(), "--out", (dir / (std::string("fused_") + w)).string()});
    REQUIRE(r.code == 0);
  }
  CHECK(equal(load_map(dir / "fused_w1" / "k.png"), d));
  CHECK(equal(load_map(dir / "fused_w0" / "k.png"), rgb));
  save_map(d, fz / "d" / "extra.png");
  r = cli({"fuse", "--omega-dir", (fz / "w1").string(), "--dsal-dir", (fz / "d").string(), "--rgbsal-dir",
           (fz / "r").string(), "--out", (dir / "fused_bad").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("extra") != std::string::npos);

  r = cli({"eval", "--pred-dir", data + "/GT", "--gt-dir", data + "/GT", "--out", (dir / "eval_gt").string(),
           "--e-measure", "--name", "self"});
  REQUIRE(r.code == 0);
  const auto self = parse_csv(slurp(dir / "eval_gt" / "metrics.csv"));
  REQUIRE(self.size() == 1);
  CHECK(self[0].dataset == "self");
  CHECK(self[0].mae == 0.0);
  CHECK(self[0].sm == doctest::Approx(1.0));
  CHECK(*self[0].e_measure == doctest::Approx(1.0));

  r = cli({"eval", "--pred-dir", out.string(), "--gt-dir", data + "/GT", "--omega-dir", (out / "omega").string(),
           "--out", (dir / "eval_half").string()});
  CHECK(r.code == kExitUsage);
  r = cli({"eval", "--pred-dir", out.string(), "--gt-dir", data + "/GT", "--omega-dir", (out / "omega").string(),
           "--dsal-dir", (out / "dsal").string(), "--out", (dir / "eval_pred").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("w1") != std::string::npos);
  r = cli({"eval", "--pred-dir", (fz / "d").string(), "--gt-dir", data + "/GT", "--out", (dir / "eval_ids").string()});
  CHECK(r.code == kExitData);
}

TEST_CASE("report orders runs by name and leaves blanks") {
  const auto dir = scratch_dir("cli_report");
  MetricReport a;
  a.dataset = "x";
  a.sm = 0.5;
  a.n = 2;
  MetricReport extra = a;
  extra.dataset = "rgb";
  for (const char* name : {"zeta", "alpha"}) {
    fs::create_directories(dir / name);
    std::ofstream(dir / name / "metrics.csv") << csv_header() << "\n" << csv_row(a) << "\n" << csv_row(extra) << "\n";
  }
  auto r = cli({"report", (dir / "zeta").string(), (dir / "alpha").string(), "--out", (dir / "rep").string()});
  REQUIRE(r.code == 0);
  const auto rows = parse_csv(slurp(dir / "rep" / "report.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dataset == "alpha");
  CHECK(rows[1].dataset == "zeta");
  CHECK_FALSE(rows[0].e_measure.has_value());
  CHECK(r.out.find("alpha") < r.out.find("zeta"));

  r = cli({"report", (dir / "zeta").string(), (dir / "alpha").string(), "--all-rows"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("alpha/rgb") != std::string::npos);
  fs::create_directories(dir / "empty");
  CHECK(cli({"report", (dir / "empty").string()}).code == kExitData);
}
