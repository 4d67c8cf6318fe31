#include "rgbdsal/cli.hpp"

#include "rgbdsal/checkpoint.hpp"
#include "rgbdsal/data_io.hpp"
#include "rgbdsal/fusion.hpp"
#include "rgbdsal/metrics.hpp"
#include "rgbdsal/pseudo_gt.hpp"
#include "rgbdsal/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rgbdsal {

using json = nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw_data("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw_data("cannot write " + p.string());
}

/// Output directory of one command: resolved options first, manifest last.
class RunDir {
 public:
  RunDir(fs::path root, std::string command, std::vector<std::string> args)
      : root_(std::move(root)), command_(std::move(command)), args_(std::move(args)) {}

  const fs::path& root() const { return root_; }
  fs::path operator/(const std::string& rel) const { return root_ / rel; }

  void write_resolved(const json& options) const {
    fs::create_directories(root_);
    json j = {{"command", command_}, {"args", args_}, {"options", options}};
    write_text(root_ / "resolved_config.json", j.dump(2) + "\n");
  }

  void write_manifest() const {
    std::vector<std::pair<std::string, std::uintmax_t>> files;
    for (const auto& e : fs::recursive_directory_iterator(root_)) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), root_).generic_string();
      if (rel == "manifest.json") continue;
      files.emplace_back(rel, e.file_size());
    }
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& [rel, size] : files) list.push_back({{"path", rel}, {"bytes", size}});
    write_text(root_ / "manifest.json", json{{"command", command_}, {"files", list}}.dump(2) + "\n");
  }

 private:
  fs::path root_;
  std::string command_;
  std::vector<std::string> args_;
};

std::pair<int, int> parse_stage_range(const std::string& s) {
  auto to_stage = [&](const std::string& t) {
    if (t.size() != 1 || t[0] < '1' || t[0] > '4') throw_usage("invalid --stages '" + s + "' (expected e.g. 1-4 or 2)");
    return t[0] - '0';
  };
  const auto dash = s.find('-');
  if (dash == std::string::npos) {
    const int k = to_stage(s);
    return {k, k};
  }
  const int lo = to_stage(s.substr(0, dash));
  const int hi = to_stage(s.substr(dash + 1));
  if (lo > hi) throw_usage("invalid --stages '" + s + "': empty range");
  return {lo, hi};
}

std::array<int, 4> parse_epochs(const std::string& s) {
  std::array<int, 4> out{};
  std::stringstream ss(s);
  std::string item;
  int k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= 4) throw_usage("--epochs takes four comma-separated counts");
    try {
      std::size_t used = 0;
      out[static_cast<std::size_t>(k)] = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw_usage("--epochs: '" + item + "' is not an integer");
    }
    ++k;
  }
  if (k != 4) throw_usage("--epochs takes four comma-separated counts");
  return out;
}

std::map<DepthMode, double> parse_mix(const std::string& s) {
  std::map<DepthMode, double> mix;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw_usage("--mix entries look like clean=0.5, got '" + item + "'");
    try {
      mix[parse_depth_mode(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw_usage("--mix: bad share in '" + item + "'");
    }
  }
  return mix;
}

template <typename Map>
void require_same_ids(const Map& a, const std::string& an, const std::map<std::string, ScalarMap>& b,
                      const std::string& bn) {
  std::vector<std::string> bad;
  for (const auto& [id, m] : a) {
    if (!b.count(id)) bad.push_back(id + " (missing in " + bn + ")");
  }
  for (const auto& [id, m] : b) {
    if (!a.count(id)) bad.push_back(id + " (missing in " + an + ")");
  }
  if (!bad.empty()) {
    std::string msg = "id mismatch:";
    for (const auto& s : bad) msg += " " + s;
    throw_data(msg);
  }
}

ScalarMap fit(const ScalarMap& m, int h, int w) { return m.height() == h && m.width() == w ? m : resize_map(m, h, w); }

// --- commands --------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int n = 50;
  std::uint64_t seed = 1;
  int size = 64;
  std::string depth_mode = "mixed";
  std::string mix = "clean=0.5,misleading=0.25,flat=0.25";
  double clutter = 0.5;
  int distractors = 1;
  double contrast_min = 0.05;
  double contrast_max = 0.45;
  double scale_min = 0.13;
  double scale_max = 0.2;
  bool force = false;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  SynthSpec spec;
  spec.seed = a.seed;
  spec.n_samples = a.n;
  spec.size = a.size;
  spec.clutter = a.clutter;
  spec.distractors = a.distractors;
  spec.contrast_min = a.contrast_min;
  spec.contrast_max = a.contrast_max;
  spec.object_scale_min = a.scale_min;
  spec.object_scale_max = a.scale_max;
  spec.mix = a.depth_mode == "mixed" ? parse_mix(a.mix) : std::map<DepthMode, double>{{parse_depth_mode(a.depth_mode), 1.0}};
  spec.validate();
  if (!dir_empty(a.out) && !a.force) throw_usage("output directory is not empty (use --force): " + a.out);
  if (a.force && fs::exists(a.out)) fs::remove_all(a.out);
  const auto samples = synthesize_dataset(spec);
  write_dataset(samples, a.out, true);
  RunDir run(a.out, "synth", args);
  json mix;
  for (const auto& [m, share] : spec.mix) mix[to_string(m)] = share;
  run.write_resolved({{"n", a.n}, {"seed", a.seed}, {"size", a.size}, {"mix", mix}, {"clutter", a.clutter},
                      {"distractors", a.distractors}, {"contrast_min", a.contrast_min},
                      {"contrast_max", a.contrast_max}, {"object_scale_min", a.scale_min},
                      {"object_scale_max", a.scale_max}});
  run.write_manifest();
  out << "wrote " << samples.size() << " samples to " << a.out << "\n";
  return kExitOk;
}

struct PgtArgs {
  std::string checkpoint, data, out, mode = "pb";
};

int cmd_pseudo_gt(const PgtArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const PgtMode mode = parse_pgt_mode(a.mode);
  const auto bundle = load_checkpoint(a.checkpoint);
  LoadOptions lo;
  lo.working_resolution = bundle.working_resolution;
  const auto samples = load_dataset(a.data, "", lo);
  RunDir run(a.out, "pseudo-gt", args);
  run.write_resolved({{"checkpoint", a.checkpoint}, {"data", a.data}, {"mode", a.mode}});
  const auto pairs = build_dca_training_set(samples, bundle);
  for (const auto& p : pairs) save_map(p.target.target(mode), run / (p.sample->id + "_pgt.png"));
  run.write_manifest();
  out << "wrote " << pairs.size() << " pseudo-GT maps to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data, out, config, stages = "1-4", pgt_mode, fusion_mode, arch, epochs, pretrained;
  std::uint64_t seed = 1;
  int resolution = 64;
  int batch_size = 4;
  double test_fraction = 0.25;
  bool detach_omega = false;
  CLI::App* app = nullptr;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  auto given = [&](const char* name) { return a.app->count(name) > 0; };
  TrainConfig cfg;
  std::string config_path = a.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kConfigEnv); env && *env) config_path = env;
  }
  if (!config_path.empty()) cfg = config_from_json(read_text(config_path));
  if (given("--seed")) cfg.seed = a.seed;
  if (given("--resolution")) cfg.working_resolution = a.resolution;
  if (given("--batch-size")) cfg.batch_size = a.batch_size;
  if (given("--test-fraction")) cfg.test_fraction = a.test_fraction;
  if (given("--pgt-mode")) cfg.pgt_mode = parse_pgt_mode(a.pgt_mode);
  if (given("--arch") || given("--fusion-mode")) {
    const FusionMode fm = given("--fusion-mode") ? parse_fusion_mode(a.fusion_mode) : cfg.arch.fusion;
    const bool detach = cfg.arch.detach_omega;
    cfg.arch = parse_arch(given("--arch") ? a.arch : arch_name(cfg.arch), fm);
    cfg.arch.detach_omega = detach;
  }
  if (given("--detach-omega")) cfg.arch.detach_omega = a.detach_omega;
  if (given("--epochs")) {
    const auto e = parse_epochs(a.epochs);
    for (int k = 0; k < 4; ++k) cfg.stages[k].epochs = e[k];
  }
  cfg.validate();
  const auto [lo, hi] = parse_stage_range(a.stages);

  RunDir run(a.out, "train", args);
  json opts = json::parse(config_to_json(cfg));
  opts["stages_run"] = a.stages;
  opts["data"] = a.data;
  opts["pretrained_encoder"] = a.pretrained;
  run.write_resolved(opts);

  std::optional<ModelBundle<float>> start, snap1, snap2;
  if (lo > 1) {
    const fs::path prev = run / stage_checkpoint_name(lo - 1);
    if (!fs::exists(prev)) {
      throw_invariant("stage ordering violated: stage " + std::to_string(lo) + " needs " + prev.string() +
                      "; run `train --stages " + std::to_string(lo - 1) + "` (or an earlier range) into " + a.out +
                      " first");
    }
    start = load_checkpoint(prev);
    if (!start->stage_done(lo - 1) || start->stage_done(lo)) {
      throw_invariant("stage ordering violated: " + prev.string() + " does not end at stage " + std::to_string(lo - 1));
    }
    if (fs::exists(run / stage_checkpoint_name(1))) snap1 = load_checkpoint(run / stage_checkpoint_name(1));
    if (fs::exists(run / stage_checkpoint_name(2))) snap2 = load_checkpoint(run / stage_checkpoint_name(2));
  }

  LoadOptions load;
  load.working_resolution = cfg.working_resolution;
  HoldOut data;
  if (fs::is_directory(fs::path(a.data) / "train")) {
    data.train = load_dataset(a.data, "train", load);
    if (fs::is_directory(fs::path(a.data) / "test")) data.test = load_dataset(a.data, "test", load);
  } else {
    data = hold_out_split(load_dataset(a.data, "", load), cfg.seed, cfg.test_fraction);
  }

  std::ofstream log_file(run / "train_log.jsonl", lo > 1 ? std::ios::app : std::ios::trunc);
  TrainLog log(&log_file);
  PipelineHooks hooks;
  hooks.stop_after_stage = hi;
  hooks.on_stage_end = [&](const ModelBundle<float>& b, int k) {
    save_checkpoint(b, run / stage_checkpoint_name(k));
    out << "stage " << k << " done (" << log.elapsed() << " s)\n";
  };
  if (snap1) hooks.stage1_snapshot = &*snap1;
  if (snap2) hooks.stage2_snapshot = &*snap2;
  if (!a.pretrained.empty()) {
    const auto encoder = load_parameters(a.pretrained);
    hooks.stage0 = [encoder](ModelBundle<float>& b) { load_pretrained_encoder(b, encoder); };
  }
  const auto res = run_full_pipeline(data.train, data.test, cfg, log, hooks, start ? &*start : nullptr);
  for (const auto& w : log.warnings()) out << "warning: " << w << "\n";

  json split = {{"seed", res.plan.seed}, {"half_a", res.plan.half_a}, {"half_b", res.plan.half_b},
                {"test", res.test_ids}};
  write_text(run / "split.json", split.dump(2) + "\n");
  if (res.bundle.stage_done(4) && !data.test.empty()) {
    std::vector<MetricReport> rows{res.report};
    rows[0].dataset = "final";
    for (const char* k : {"rgb", "depth", "simple"}) {
      if (auto it = res.baselines.find(k); it != res.baselines.end()) rows.push_back(it->second);
    }
    std::string csv = csv_header() + "\n";
    for (const auto& r : rows) csv += csv_row(r) + "\n";
    write_text(run / "metrics.csv", csv);
    write_text(run / "omega_by_tag.json", json(res.omega_by_tag).dump(2) + "\n");
    out << format_table(rows);
  }
  log_file.close();
  run.write_manifest();
  return kExitOk;
}

struct InferArgs {
  std::string checkpoint, data, out;
  bool emit_omega = false, emit_streams = false;
};

int cmd_infer(const InferArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const auto bundle = load_checkpoint(a.checkpoint);
  if (!bundle.stage_done(4)) {
    throw_invariant("stage ordering violated: infer needs a checkpoint after stage 4, " + a.checkpoint + " ends at stage " +
                    std::to_string(bundle.last_stage()));
  }
  LoadOptions lo;
  lo.working_resolution = bundle.working_resolution;
  lo.allow_missing_gt = true;
  const auto samples = load_dataset(a.data, "", lo);
  RunDir run(a.out, "infer", args);
  run.write_resolved({{"checkpoint", a.checkpoint}, {"data", a.data}, {"emit_omega", a.emit_omega},
                      {"emit_streams", a.emit_streams}});
  for (const auto& s : samples) {
    const auto m = predict_all(bundle, s);
    save_map(m.final_map, run / (s.id + ".png"));
    if (a.emit_omega) save_map(m.omega, run / "omega" / (s.id + ".png"));
    if (a.emit_streams) {
      save_map(m.dsal, run / "dsal" / (s.id + ".png"));
      save_map(m.rgbsal, run / "rgbsal" / (s.id + ".png"));
    }
  }
  run.write_manifest();
  out << "wrote " << samples.size() << " saliency maps to " << a.out << "\n";
  return kExitOk;
}

struct FuseArgs {
  std::string omega_dir, dsal_dir, rgbsal_dir, out;
};

int cmd_fuse(const FuseArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  const auto omegas = load_map_dir(a.omega_dir);
  const auto dsals = load_map_dir(a.dsal_dir);
  const auto rgbs = load_map_dir(a.rgbsal_dir);
  require_same_ids(omegas, "omega", dsals, "dsal");
  require_same_ids(omegas, "omega", rgbs, "rgbsal");
  RunDir run(a.out, "fuse", args);
  run.write_resolved({{"omega_dir", a.omega_dir}, {"dsal_dir", a.dsal_dir}, {"rgbsal_dir", a.rgbsal_dir}});
  for (const auto& [id, w] : omegas) save_map(simple_fusion(w, dsals.at(id), rgbs.at(id)), run / (id + ".png"));
  run.write_manifest();
  out << "wrote " << omegas.size() << " fused maps to " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred_dir, gt_dir, omega_dir, dsal_dir, name = "eval", out;
  bool e_measure = false;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (a.omega_dir.empty() != a.dsal_dir.empty()) throw_usage("--omega-dir and --dsal-dir go together");
  const auto gts = load_mask_dir(a.gt_dir);
  auto preds = load_map_dir(a.pred_dir);
  std::map<std::string, ScalarMap> omegas, dsals;
  if (!a.omega_dir.empty()) {
    omegas = load_map_dir(a.omega_dir);
    dsals = load_map_dir(a.dsal_dir);
  }
  // predictions are compared at GT resolution
  for (auto* maps : {&preds, &omegas, &dsals}) {
    for (auto& [id, m] : *maps) {
      if (auto g = gts.find(id); g != gts.end()) m = fit(m, g->second.height(), g->second.width());
    }
  }
  EvalOptions opts;
  opts.dataset = a.name;
  opts.with_e_measure = a.e_measure;
  if (!a.omega_dir.empty()) {
    opts.omegas = &omegas;
    opts.dsals = &dsals;
  }
  RunDir run(a.out, "eval", args);
  run.write_resolved({{"pred_dir", a.pred_dir}, {"gt_dir", a.gt_dir}, {"omega_dir", a.omega_dir},
                      {"dsal_dir", a.dsal_dir}, {"name", a.name}, {"e_measure", a.e_measure}});
  const auto report = evaluate_dataset(preds, gts, opts);
  write_text(run / "metrics.csv", csv_header() + "\n" + csv_row(report) + "\n");
  const std::string table = format_table({report});
  write_text(run / "table.txt", table);
  run.write_manifest();
  out << table;
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
  bool all_rows = false;
};

int cmd_report(const ReportArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& r : a.runs) {
    fs::path p(r);
    std::string name = p.filename().string();
    if (name.empty()) name = p.parent_path().filename().string();
    named.emplace_back(name, p);
  }
  std::stable_sort(named.begin(), named.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<MetricReport> rows;
  for (const auto& [name, dir] : named) {
    const fs::path csv = dir / "metrics.csv";
    if (!fs::exists(csv)) throw_data("run directory has no metrics.csv: " + dir.string());
    auto parsed = parse_csv(read_text(csv));
    if (parsed.empty()) throw_data("empty metrics.csv in " + dir.string());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      if (i > 0 && !a.all_rows) break;
      auto r = parsed[i];
      r.dataset = i == 0 ? name : name + "/" + r.dataset;
      rows.push_back(std::move(r));
    }
  }
  const std::string table = format_table(rows);
  if (!a.out.empty()) {
    RunDir run(a.out, "report", args);
    run.write_resolved({{"runs", a.runs}, {"all_rows", a.all_rows}});
    std::string csv = csv_header() + "\n";
    for (const auto& r : rows) csv += csv_row(r) + "\n";
    write_text(run / "report.csv", csv);
    write_text(run / "table.txt", table);
    run.write_manifest();
  }
  out << table;
  return kExitOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::invariant: return kExitInvariant;
  }
  return kExitInvariant;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RGB-D salient object detection with depth contribution assessment", "rgbdsal"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic RGB-D dataset");
  s->add_option("--out", synth.out, "Output dataset directory")->required();
  s->add_option("--n", synth.n, "Number of samples");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--size", synth.size, "Canvas size in pixels");
  s->add_option("--depth-mode", synth.depth_mode, "mixed, clean, noisy, misleading or flat");
  s->add_option("--mix", synth.mix, "Depth-mode shares for --depth-mode mixed");
  s->add_option("--clutter", synth.clutter, "Background clutter level in [0,1]");
  s->add_option("--distractors", synth.distractors, "Look-alike shapes per scene");
  s->add_option("--contrast-min", synth.contrast_min, "Lowest object colour contrast");
  s->add_option("--contrast-max", synth.contrast_max, "Highest object colour contrast");
  s->add_option("--scale-min", synth.scale_min, "Smallest object half-extent (fraction of the canvas)");
  s->add_option("--scale-max", synth.scale_max, "Largest object half-extent");
  s->add_flag("--force", synth.force, "Replace a non-empty output directory");

  PgtArgs pgt;
  auto* p = app.add_subcommand("pseudo-gt", "Export pseudo ground truth maps as <id>_pgt.png");
  p->add_option("--checkpoint", pgt.checkpoint, "Checkpoint after stage 1")->required();
  p->add_option("--data", pgt.data, "Dataset directory")->required();
  p->add_option("--out", pgt.out, "Output directory")->required();
  p->add_option("--mode", pgt.mode, "p, b or pb");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run training stages and evaluate");
  train.app = t;
  t->add_option("--data", train.data, "Dataset directory (with train/ and test/ or a single split)")->required();
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--config", train.config, "JSON config (default: $RGBDSAL_CONFIG)");
  t->add_option("--stages", train.stages, "Stage range, e.g. 1-4 or 2");
  t->add_option("--pgt-mode", train.pgt_mode, "p, b or pb");
  t->add_option("--fusion-mode", train.fusion_mode, "add, con or omega");
  t->add_option("--arch", train.arch, "simple, omega-rgb-d, omega-rgbd-d, msf-rgb-d or msf-rgbd-d");
  t->add_option("--epochs", train.epochs, "Epochs of stages 1-4, comma separated");
  t->add_option("--seed", train.seed, "Random seed");
  t->add_option("--resolution", train.resolution, "Working resolution (multiple of 16)");
  t->add_option("--batch-size", train.batch_size, "Mini-batch size");
  t->add_option("--test-fraction", train.test_fraction, "Held-out share when the data has no test/ split");
  t->add_option("--pretrained-encoder", train.pretrained, "Parameter file with enc<k>/conv<j> weights");
  t->add_flag("--detach-omega", train.detach_omega, "Keep the depth contribution subnet frozen in stage 4");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Predict saliency maps");
  i->add_option("--checkpoint", infer.checkpoint, "Stage-4 checkpoint")->required();
  i->add_option("--data", infer.data, "Dataset directory")->required();
  i->add_option("--out", infer.out, "Output directory")->required();
  i->add_flag("--emit-omega", infer.emit_omega, "Also write omega maps to omega/");
  i->add_flag("--emit-streams", infer.emit_streams, "Also write dsal/ and rgbsal/ maps");

  FuseArgs fuse;
  auto* f = app.add_subcommand("fuse", "Blend depth and RGB saliency maps with omega maps");
  f->add_option("--omega-dir", fuse.omega_dir, "Omega maps")->required();
  f->add_option("--dsal-dir", fuse.dsal_dir, "Depth saliency maps")->required();
  f->add_option("--rgbsal-dir", fuse.rgbsal_dir, "RGB saliency maps")->required();
  f->add_option("--out", fuse.out, "Output directory")->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score saliency maps against ground truth");
  e->add_option("--pred-dir", eval.pred_dir, "Predicted maps")->required();
  e->add_option("--gt-dir", eval.gt_dir, "Ground-truth masks")->required();
  e->add_option("--omega-dir", eval.omega_dir, "Omega maps for the omega1/omega2 diagnostics");
  e->add_option("--dsal-dir", eval.dsal_dir, "Depth saliency maps for omega2");
  e->add_option("--name", eval.name, "Dataset name in the report");
  e->add_option("--out", eval.out, "Output directory")->required();
  e->add_flag("--e-measure", eval.e_measure, "Also compute the E-measure");

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Combine the metrics of several runs into one table");
  r->add_option("runs", report.runs, "Run directories")->required();
  r->add_option("--out", report.out, "Output directory for report.csv");
  r->add_flag("--all-rows", report.all_rows, "Include baseline rows");

  try {
    std::vector<std::string> argv_store{"rgbdsal"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, args, out);
    if (p->parsed()) return cmd_pseudo_gt(pgt, args, out);
    if (t->parsed()) return cmd_train(train, args, out);
    if (i->parsed()) return cmd_infer(infer, args, out);
    if (f->parsed()) return cmd_fuse(fuse, args, out);
    if (e->parsed()) return cmd_eval(eval, args, out);
    if (r->parsed()) return cmd_report(report, args, out);
  } catch (const Error& ex) {
    const char* label = ex.kind() == ErrorKind::usage ? "usage error" : ex.kind() == ErrorKind::data ? "data error"
                                                                                                   : "invariant violation";
    err << label << ": " << ex.what() << "\n";
    return exit_code(ex.kind());
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInvariant;
  }
  return kExitUsage;
}

}  // namespace rgbdsal
