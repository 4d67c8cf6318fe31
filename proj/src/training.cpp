#include "rgbdsal/training.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

namespace rgbdsal {

using json = nlohmann::json;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string lr_decay_name(LrDecay d) { return d == LrDecay::linear ? "linear" : "exponential"; }

LrDecay parse_lr_decay(const std::string& s) {
  if (s == "exponential") return LrDecay::exponential;
  if (s == "linear") return LrDecay::linear;
  throw_usage("unknown lr_decay '" + s + "' (expected exponential or linear)");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw_usage("unknown config key '" + where + it.key() + "'");
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw_usage("batch_size must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw_usage("split_ratio must lie in (0, 1)");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw_usage("test_fraction must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw_usage("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw_usage("adam eps must be positive");
  for (int k = 0; k < 4; ++k) {
    const auto& s = stages[k];
    const std::string name = "stage " + std::to_string(k + 1);
    if (s.epochs < 0) throw_usage(name + ": epochs must be >= 0");
    if (!(s.lr_start > 0.0) || !(s.lr_end > 0.0)) throw_usage(name + ": learning rates must be positive");
  }
  if (stage0_epochs < 0) throw_usage("stage0_epochs must be >= 0");
  validate_working_resolution(working_resolution);
  for (int w : backbone.widths) {
    if (w < 1) throw_usage("backbone widths must be positive");
  }
  if (backbone.decoder_width < 1) throw_usage("backbone decoder_width must be positive");
}

std::string config_to_json(const TrainConfig& cfg) {
  json stages = json::array();
  for (const auto& s : cfg.stages) stages.push_back({{"epochs", s.epochs}, {"lr_start", s.lr_start}, {"lr_end", s.lr_end}});
  json j = {
      {"batch_size", cfg.batch_size},
      {"adam", {{"beta1", cfg.adam_beta1}, {"beta2", cfg.adam_beta2}, {"eps", cfg.adam_eps}}},
      {"stages", stages},
      {"lr_decay", lr_decay_name(cfg.lr_decay)},
      {"seed", cfg.seed},
      {"working_resolution", cfg.working_resolution},
      {"split_ratio", cfg.split_ratio},
      {"test_fraction", cfg.test_fraction},
      {"pgt_mode", to_string(cfg.pgt_mode)},
      {"backbone",
       {{"name", cfg.backbone.name}, {"widths", cfg.backbone.widths}, {"decoder_width", cfg.backbone.decoder_width}}},
      {"arch", arch_name(cfg.arch)},
      {"fusion_mode", to_string(cfg.arch.fusion)},
      {"detach_omega", cfg.arch.detach_omega},
      {"stage0_epochs", cfg.stage0_epochs},
  };
  return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_usage(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw_usage("config must be a JSON object");
  TrainConfig cfg;
  try {
    reject_unknown(j,
                   {"batch_size", "adam", "stages", "lr_decay", "seed", "working_resolution", "split_ratio",
                    "test_fraction", "pgt_mode", "backbone", "arch", "fusion_mode", "detach_omega", "stage0_epochs"},
                   "");
    read(j, "batch_size", cfg.batch_size);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      reject_unknown(a, {"beta1", "beta2", "eps"}, "adam.");
      read(a, "beta1", cfg.adam_beta1);
      read(a, "beta2", cfg.adam_beta2);
      read(a, "eps", cfg.adam_eps);
    }
    if (j.contains("stages")) {
      const auto& st = j.at("stages");
      if (!st.is_array() || st.size() != 4) throw_usage("config 'stages' must be an array of 4 objects");
      for (int k = 0; k < 4; ++k) {
        reject_unknown(st[k], {"epochs", "lr_start", "lr_end"}, "stages[" + std::to_string(k) + "].");
        read(st[k], "epochs", cfg.stages[k].epochs);
        read(st[k], "lr_start", cfg.stages[k].lr_start);
        read(st[k], "lr_end", cfg.stages[k].lr_end);
      }
    }
    if (j.contains("lr_decay")) cfg.lr_decay = parse_lr_decay(j.at("lr_decay").get<std::string>());
    read(j, "seed", cfg.seed);
    read(j, "working_resolution", cfg.working_resolution);
    read(j, "split_ratio", cfg.split_ratio);
    read(j, "test_fraction", cfg.test_fraction);
    if (j.contains("pgt_mode")) cfg.pgt_mode = parse_pgt_mode(j.at("pgt_mode").get<std::string>());
    if (j.contains("backbone")) {
      const auto& b = j.at("backbone");
      reject_unknown(b, {"name", "widths", "decoder_width"}, "backbone.");
      read(b, "name", cfg.backbone.name);
      read(b, "widths", cfg.backbone.widths);
      read(b, "decoder_width", cfg.backbone.decoder_width);
    }
    const FusionMode fusion =
        j.contains("fusion_mode") ? parse_fusion_mode(j.at("fusion_mode").get<std::string>()) : cfg.arch.fusion;
    cfg.arch = parse_arch(j.contains("arch") ? j.at("arch").get<std::string>() : arch_name(cfg.arch), fusion);
    read(j, "detach_omega", cfg.arch.detach_omega);
    read(j, "stage0_epochs", cfg.stage0_epochs);
  } catch (const json::exception& e) {
    throw_usage(std::string("config has a field of the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double learning_rate(const StageSchedule& s, LrDecay decay, long step, long total) {
  if (total <= 1 || step <= 0) return s.lr_start;
  if (step >= total - 1) return s.lr_end;
  const double f = static_cast<double>(step) / static_cast<double>(total - 1);
  if (decay == LrDecay::linear) return s.lr_start + (s.lr_end - s.lr_start) * f;
  return s.lr_start * std::pow(s.lr_end / s.lr_start, f);
}

SplitPlan split_training_set(std::span<const RgbdSample> samples, std::uint64_t seed, double ratio) {
  if (samples.size() < 2) throw_data("split needs at least 2 samples, got " + std::to_string(samples.size()));
  if (!(ratio > 0.0 && ratio < 1.0)) throw_usage("split ratio must lie in (0, 1)");
  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.id);
  Rng rng(seed, 0x5b11);
  rng.shuffle(ids);
  const auto n = ids.size();
  auto na = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  na = std::clamp<std::size_t>(na, 1, n - 1);
  SplitPlan plan;
  plan.seed = seed;
  plan.half_a.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(na));
  plan.half_b.assign(ids.begin() + static_cast<std::ptrdiff_t>(na), ids.end());
  return plan;
}

TrainLog::TrainLog(std::ostream* sink) : sink_(sink), start_(now_seconds()) {}

double TrainLog::elapsed() const { return now_seconds() - start_; }

void TrainLog::record(const LogRecord& r) {
  records_.push_back(r);
  if (sink_) {
    json j = {{"stage", r.stage}, {"epoch", r.epoch},   {"step", r.step},
              {"loss", r.loss},   {"lr", r.lr},         {"wall_time", r.wall_time}};
    *sink_ << j.dump() << '\n';
  }
}

void TrainLog::warn(const std::string& msg) {
  warnings_.push_back(msg);
  if (sink_) *sink_ << json{{"warning", msg}}.dump() << '\n';
}

std::vector<double> TrainLog::epoch_means(int stage) const {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& r : records_) {
    if (r.stage != stage) continue;
    auto& [sum, n] = acc[r.epoch];
    sum += r.loss;
    ++n;
  }
  std::vector<double> out;
  for (const auto& [epoch, v] : acc) out.push_back(v.first / v.second);
  return out;
}

void adam_step(nn::ParameterStore<float>& params, const TrainConfig& cfg, double lr, long t) {
  const float b1 = static_cast<float>(cfg.adam_beta1);
  const float b2 = static_cast<float>(cfg.adam_beta2);
  const float eps = static_cast<float>(cfg.adam_eps);
  const float c1 = static_cast<float>(1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t)));
  const float c2 = static_cast<float>(1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t)));
  const float step = static_cast<float>(lr);
  for (auto& [name, p] : params) {
    if (p.frozen) continue;
    p.moment1 = b1 * p.moment1 + (1.0f - b1) * p.grad;
    p.moment2 = (b2 * p.moment2.array() + (1.0f - b2) * p.grad.array().square()).matrix();
    p.value.array() -= step * (p.moment1.array() / c1) / ((p.moment2.array() / c2).sqrt() + eps);
  }
}

namespace {

using LossFn = std::function<nn::Var<float>(nn::Graph<float>&, std::size_t)>;

/// Shared epoch loop: seeded shuffle per (stage, epoch), mini-batches of
/// per-sample graphs with gradients averaged over the batch, one Adam step
/// per batch. Moments start from zero unless resuming inside the stage.
void run_epochs(ModelBundle<float>& bundle, std::size_t n_items, const LossFn& loss_fn, int stage,
                const StageSchedule& sched, const TrainConfig& cfg, TrainLog& log, const StageOptions& opts,
                int start_epoch) {
  if (sched.epochs == 0) {
    log.warn("stage " + std::to_string(stage) + " ran zero epochs; parameters unchanged");
    return;
  }
  if (n_items == 0) throw_data("stage " + std::to_string(stage) + " has no training samples");
  const long batch = cfg.batch_size;
  const long steps_per_epoch = (static_cast<long>(n_items) + batch - 1) / batch;
  const long total = steps_per_epoch * sched.epochs;
  if (start_epoch == 0) bundle.params.reset_moments();

  std::vector<std::size_t> order(n_items);
  for (int epoch = start_epoch; epoch < sched.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, static_cast<std::uint64_t>(1000 * stage + epoch));
    rng.shuffle(order);
    for (long s = 0; s < steps_per_epoch; ++s) {
      const long step = static_cast<long>(epoch) * steps_per_epoch + s;
      const auto first = static_cast<std::size_t>(s * batch);
      const auto last = std::min(n_items, first + static_cast<std::size_t>(batch));
      const float inv = 1.0f / static_cast<float>(last - first);
      bundle.params.zero_grad();
      double loss = 0.0;
      for (std::size_t i = first; i < last; ++i) {
        nn::Graph<float> g;
        auto l = loss_fn(g, order[i]);
        const double v = g.scalar(l);
        if (!std::isfinite(v)) {
          throw_invariant("non-finite loss at stage " + std::to_string(stage) + ", epoch " +
                          std::to_string(epoch + 1));
        }
        loss += v;
        g.backward(l, inv);
      }
      const double lr = learning_rate(sched, cfg.lr_decay, step, total);
      adam_step(bundle.params, cfg, lr, step + 1);
      log.record({stage, epoch + 1, step + 1, loss / static_cast<double>(last - first), lr, log.elapsed()});
    }
    bundle.partial_stage = stage;
    bundle.partial_epochs = epoch + 1;
    if (opts.on_epoch_end) opts.on_epoch_end(bundle, stage, epoch + 1);
  }
}

int resume_epoch(const ModelBundle<float>& bundle, int stage) {
  return bundle.partial_stage == stage ? bundle.partial_epochs : 0;
}

void require_gt(std::span<const RgbdSample> samples, int stage) {
  for (const auto& s : samples) {
    if (!s.gt) throw_data("sample '" + s.id + "' has no ground truth (needed by stage " + std::to_string(stage) + ")");
  }
}

nn::Tensor<float> gt_tensor(const RgbdSample& s) { return nn::tensor_from_plane<float>(s.gt->values()); }

}  // namespace

void stage1_train_subnets(ModelBundle<float>& bundle, std::span<const RgbdSample> half_a, const TrainConfig& cfg,
                          TrainLog& log, const StageOptions& opts) {
  bundle.require_stage_ready(1);
  require_gt(half_a, 1);
  bundle.params.train_only({"rgb/", "d/"});
  auto fn = [&](nn::Graph<float>& g, std::size_t i) {
    const auto& s = half_a[i];
    const auto target = gt_tensor(s);
    auto d = d_subnet_forward(g, bundle, s);
    auto r = rgb_subnet_forward(g, bundle, s);
    return nn::add(g, nn::bce_with_logits(g, r.logits, target), nn::bce_with_logits(g, d.logits, target));
  };
  run_epochs(bundle, half_a.size(), fn, 1, cfg.stages[0], cfg, log, opts, resume_epoch(bundle, 1));
  bundle.mark_stage_done(1);
}

void train_dca_on_pairs(ModelBundle<float>& bundle, const std::vector<DcaPair>& pairs, PgtMode mode,
                        const StageSchedule& schedule, const TrainConfig& cfg, TrainLog& log, int stage_tag,
                        const StageOptions& opts, int start_epoch) {
  bundle.params.train_only({"dca/"});
  std::vector<nn::Tensor<float>> targets;
  targets.reserve(pairs.size());
  for (const auto& p : pairs) targets.push_back(nn::tensor_from_plane<float>(p.target.target(mode).values()));
  auto fn = [&](nn::Graph<float>& g, std::size_t i) {
    auto out = dca_forward(g, bundle, *pairs[i].sample);
    return nn::bce_with_logits(g, out.logits, targets[i]);
  };
  run_epochs(bundle, pairs.size(), fn, stage_tag, schedule, cfg, log, opts, start_epoch);
}

void stage2_train_dca(ModelBundle<float>& bundle, std::span<const RgbdSample> half_b, const SplitPlan& plan,
                      const TrainConfig& cfg, TrainLog& log, const StageOptions& opts) {
  bundle.require_stage_ready(2);
  require_gt(half_b, 2);
  const std::set<std::string> a(plan.half_a.begin(), plan.half_a.end());
  const std::set<std::string> b(plan.half_b.begin(), plan.half_b.end());
  for (const auto& id : plan.half_a) {
    if (b.count(id)) throw_invariant("split halves overlap at '" + id + "'");
  }
  for (const auto& s : half_b) {
    if (a.count(s.id) || !b.count(s.id)) {
      throw_invariant("pseudo-GT sample '" + s.id + "' is not in the pseudo-GT half of the split");
    }
  }
  const auto pairs = build_dca_training_set(half_b, bundle);
  train_dca_on_pairs(bundle, pairs, cfg.pgt_mode, cfg.stages[1], cfg, log, 2, opts, resume_epoch(bundle, 2));
  bundle.mark_stage_done(2);
}

void stage3_finetune_rgb(ModelBundle<float>& bundle, std::span<const RgbdSample> train, const TrainConfig& cfg,
                         TrainLog& log, const StageOptions& opts) {
  bundle.require_stage_ready(3);
  require_gt(train, 3);
  bundle.cross_connections_enabled = bundle.arch.cross_connections;
  bundle.params.train_only({"rgb/", "cross/"});
  auto fn = [&](nn::Graph<float>& g, std::size_t i) {
    const auto& s = train[i];
    auto r = rgb_subnet_forward(g, bundle, s);
    return nn::bce_with_logits(g, r.logits, gt_tensor(s));
  };
  run_epochs(bundle, train.size(), fn, 3, cfg.stages[2], cfg, log, opts, resume_epoch(bundle, 3));
  bundle.mark_stage_done(3);
}

void stage4_joint_finetune(ModelBundle<float>& bundle, std::span<const RgbdSample> train, const TrainConfig& cfg,
                           TrainLog& log, const StageOptions& opts) {
  bundle.require_stage_ready(4);
  require_gt(train, 4);
  bundle.params.train_only({""});
  if (bundle.arch.detach_omega) {
    for (auto& [name, p] : bundle.params) {
      if (name.rfind("dca/", 0) == 0) p.frozen = true;
    }
  }
  if (!bundle.arch.cross_connections) {
    for (auto& [name, p] : bundle.params) {
      if (name.rfind("cross/", 0) == 0) p.frozen = true;
    }
  }
  auto fn = [&](nn::Graph<float>& g, std::size_t i) {
    const auto& s = train[i];
    auto out = full_forward(g, bundle, s);
    if (bundle.arch.head == HeadMode::simple) return nn::bce(g, out.final_map, gt_tensor(s));
    return nn::bce_with_logits(g, out.final_logits, gt_tensor(s));
  };
  run_epochs(bundle, train.size(), fn, 4, cfg.stages[3], cfg, log, opts, resume_epoch(bundle, 4));
  bundle.mark_stage_done(4);
}

void stage0_pretrain_rgb(ModelBundle<float>& bundle, std::span<const RgbdSample> rgb_only, const TrainConfig& cfg,
                         TrainLog& log) {
  if (bundle.last_stage() != 0) throw_invariant("stage ordering violated: stage 0 must precede stage 1");
  require_gt(rgb_only, 0);
  bundle.params.train_only({"rgb/"});
  auto fn = [&](nn::Graph<float>& g, std::size_t i) {
    const auto& s = rgb_only[i];
    auto r = rgb_subnet_forward(g, bundle, s);
    return nn::bce_with_logits(g, r.logits, gt_tensor(s));
  };
  const StageSchedule sched{cfg.stage0_epochs, cfg.stages[0].lr_start, cfg.stages[0].lr_start};
  run_epochs(bundle, rgb_only.size(), fn, 0, sched, cfg, log, {}, 0);
  bundle.partial_stage = 0;
  bundle.partial_epochs = 0;
  nn::ParameterStore<float> encoder;
  for (const auto& [name, p] : bundle.params) {
    if (name.rfind("rgb/enc", 0) == 0) encoder.add(name.substr(4), p.value);
  }
  load_pretrained_encoder(bundle, encoder);
}

MetricReport evaluate_bundle(const ModelBundle<float>& bundle, std::span<const RgbdSample> test,
                             const std::string& name) {
  std::map<std::string, ScalarMap> preds, omegas, dsals;
  std::map<std::string, BinaryMask> gts;
  for (const auto& s : test) {
    if (!s.gt) throw_data("test sample '" + s.id + "' has no ground truth");
    auto m = predict_all(bundle, s);
    preds.emplace(s.id, std::move(m.final_map));
    omegas.emplace(s.id, std::move(m.omega));
    dsals.emplace(s.id, std::move(m.dsal));
    gts.emplace(s.id, *s.gt);
  }
  EvalOptions opts;
  opts.dataset = name;
  opts.with_e_measure = true;
  opts.omegas = &omegas;
  opts.dsals = &dsals;
  return evaluate_dataset(preds, gts, opts);
}

namespace {

std::vector<RgbdSample> select(std::span<const RgbdSample> samples, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const RgbdSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  std::vector<RgbdSample> out;
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

struct BaselineMaps {
  std::map<std::string, ScalarMap> rgb, depth, simple;
};

void collect_stream_baselines(const ModelBundle<float>& snapshot1, const ModelBundle<float>& snapshot2,
                              std::span<const RgbdSample> test, BaselineMaps& out) {
  for (const auto& s : test) {
    auto streams = predict_streams(snapshot1, s);
    auto omega = predict_omega(snapshot2, s);
    out.simple.emplace(s.id, simple_fusion(omega, streams.dsal, streams.rgbsal));
    out.rgb.emplace(s.id, std::move(streams.rgbsal));
    out.depth.emplace(s.id, std::move(streams.dsal));
  }
}

}  // namespace

PipelineResult run_full_pipeline(std::span<const RgbdSample> train, std::span<const RgbdSample> test,
                                 const TrainConfig& cfg, TrainLog& log, const PipelineHooks& hooks,
                                 const ModelBundle<float>* start) {
  cfg.validate();
  for (std::span<const RgbdSample> set : {train, test}) {
    for (const auto& s : set) {
      s.validate();
      if (!s.gt) throw_data("sample '" + s.id + "' has no ground truth");
      if (s.height() != cfg.working_resolution || s.width() != cfg.working_resolution) {
        throw_data("sample '" + s.id + "' is " + shape_string(s.height(), s.width()) + ", working resolution is " +
                   std::to_string(cfg.working_resolution));
      }
    }
  }
  PipelineResult res;
  res.bundle = start ? *start : make_bundle<float>(cfg.backbone, cfg.arch, cfg.working_resolution, cfg.seed);
  if (start && (start->backbone != cfg.backbone || start->arch != cfg.arch ||
                start->working_resolution != cfg.working_resolution)) {
    throw_usage("checkpoint configuration does not match the training config (backbone, arch or resolution)");
  }
  ModelBundle<float>& b = res.bundle;
  res.plan = split_training_set(train, cfg.seed, cfg.split_ratio);
  const auto half_a = select(train, res.plan.half_a);
  const auto half_b = select(train, res.plan.half_b);
  for (const auto& s : test) res.test_ids.push_back(s.id);

  if (b.last_stage() == 0 && hooks.stage0) hooks.stage0(b);
  std::optional<ModelBundle<float>> snap1, snap2;
  auto finish = [&](int k) {
    if (hooks.on_stage_end) hooks.on_stage_end(b, k);
  };
  const int stop = hooks.stop_after_stage;
  if (!b.stage_done(1) && stop >= 1) {
    stage1_train_subnets(b, half_a, cfg, log, hooks.stage_options);
    snap1 = b;
    finish(1);
  }
  if (!b.stage_done(2) && stop >= 2) {
    stage2_train_dca(b, half_b, res.plan, cfg, log, hooks.stage_options);
    snap2 = b;
    finish(2);
  }
  if (!b.stage_done(3) && stop >= 3) {
    stage3_finetune_rgb(b, train, cfg, log, hooks.stage_options);
    finish(3);
  }
  if (!b.stage_done(4) && stop >= 4) {
    stage4_joint_finetune(b, train, cfg, log, hooks.stage_options);
    finish(4);
  }
  if (!snap1 && hooks.stage1_snapshot) snap1 = *hooks.stage1_snapshot;
  if (!snap2 && hooks.stage2_snapshot) snap2 = *hooks.stage2_snapshot;

  if (!b.stage_done(4)) return res;
  if (test.empty()) return res;
  res.report = evaluate_bundle(b, test, arch_name(cfg.arch));
  if (snap1 && snap2) {
    BaselineMaps maps;
    collect_stream_baselines(*snap1, *snap2, test, maps);
    std::map<std::string, BinaryMask> gts;
    for (const auto& s : test) gts.emplace(s.id, *s.gt);
    EvalOptions o;
    o.with_e_measure = true;
    o.dataset = "rgb";
    res.baselines["rgb"] = evaluate_dataset(maps.rgb, gts, o);
    o.dataset = "depth";
    res.baselines["depth"] = evaluate_dataset(maps.depth, gts, o);
    o.dataset = "simple";
    res.baselines["simple"] = evaluate_dataset(maps.simple, gts, o);
  }
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& s : test) {
    const double m = predict_omega(b, s).values().cast<double>().mean();
    auto& [sum, n] = acc[s.tag];
    sum += m;
    ++n;
  }
  for (const auto& [tag, v] : acc) res.omega_by_tag[tag] = v.first / v.second;
  return res;
}

HoldOut hold_out_split(std::span<const RgbdSample> samples, std::uint64_t seed, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw_usage("test fraction must lie in [0, 1)");
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0x7e57);
  rng.shuffle(idx);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) * fraction));
  std::vector<bool> is_test(samples.size(), false);
  for (std::size_t i = 0; i < n_test && i < idx.size(); ++i) is_test[idx[i]] = true;
  HoldOut h;
  for (std::size_t i = 0; i < samples.size(); ++i) (is_test[i] ? h.test : h.train).push_back(samples[i]);
  return h;
}

PipelineResult run_full_pipeline(std::span<const RgbdSample> samples, const TrainConfig& cfg, TrainLog& log,
                                 const PipelineHooks& hooks) {
  cfg.validate();
  const HoldOut h = hold_out_split(samples, cfg.seed, cfg.test_fraction);
  return run_full_pipeline(h.train, h.test, cfg, log, hooks);
}

}  // namespace rgbdsal
