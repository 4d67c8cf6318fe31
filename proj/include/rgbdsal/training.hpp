// Four-stage training of the bi-stream network and the depth contribution
// subnet, with the split that keeps pseudo targets out of the subnets'
// training data.
#pragma once

#include "rgbdsal/metrics.hpp"
#include "rgbdsal/networks.hpp"
#include "rgbdsal/pseudo_gt.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rgbdsal {

struct StageSchedule {
  int epochs = 1;
  double lr_start = 1e-3;
  double lr_end = 1e-3;

  bool operator==(const StageSchedule&) const = default;
};

enum class LrDecay { exponential, linear };

struct TrainConfig {
  int batch_size = 4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::array<StageSchedule, 4> stages{{{15, 1e-3, 1e-3}, {15, 1e-3, 1e-3}, {5, 1e-4, 1e-4}, {12, 1e-4, 1e-5}}};
  LrDecay lr_decay = LrDecay::exponential;
  std::uint64_t seed = 1;
  int working_resolution = 64;
  double split_ratio = 0.5;
  /// Share of samples held out for evaluation when a single sample list is
  /// given to run_full_pipeline.
  double test_fraction = 0.25;
  PgtMode pgt_mode = PgtMode::pb;
  BackboneConfig backbone;
  ArchConfig arch;
  int stage0_epochs = 0;

  /// Throws a usage error naming the first invalid field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const std::string& text);

/// Learning rate of 0-based step `step` out of `total`. The first step uses
/// lr_start and the last lr_end, both exactly.
double learning_rate(const StageSchedule& s, LrDecay decay, long step, long total);

struct SplitPlan {
  std::vector<std::string> half_a;  ///< trains the RGB and depth subnets
  std::vector<std::string> half_b;  ///< formulates pseudo targets
  std::uint64_t seed = 0;
};

/// Seeded shuffle, then the first round(n * ratio) ids form half_a.
SplitPlan split_training_set(std::span<const RgbdSample> samples, std::uint64_t seed, double ratio = 0.5);

struct LogRecord {
  int stage = 0;
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wall_time = 0.0;
};

/// Step records in memory, optionally mirrored as JSON lines to `sink`.
class TrainLog {
 public:
  explicit TrainLog(std::ostream* sink = nullptr);

  void record(const LogRecord& r);
  void warn(const std::string& msg);

  const std::vector<LogRecord>& records() const { return records_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Mean step loss per epoch of one stage, in epoch order.
  std::vector<double> epoch_means(int stage) const;
  double elapsed() const;

 private:
  std::ostream* sink_;
  std::vector<LogRecord> records_;
  std::vector<std::string> warnings_;
  double start_;
};

/// Called after every finished epoch with the stage and epoch count so far.
using EpochCallback = std::function<void(const ModelBundle<float>&, int stage, int epochs_done)>;

struct StageOptions {
  EpochCallback on_epoch_end;
};

/// Adam update of every unfrozen parameter; `t` is the 1-based step count.
void adam_step(nn::ParameterStore<float>& params, const TrainConfig& cfg, double lr, long t);

/// Stage 1: RGB and depth subnets against GT on half_a.
void stage1_train_subnets(ModelBundle<float>& bundle, std::span<const RgbdSample> half_a, const TrainConfig& cfg,
                          TrainLog& log, const StageOptions& opts = {});

/// Stage 2: the depth contribution subnet on pseudo targets built from half_b.
/// Every sample must belong to plan.half_b.
void stage2_train_dca(ModelBundle<float>& bundle, std::span<const RgbdSample> half_b, const SplitPlan& plan,
                      const TrainConfig& cfg, TrainLog& log, const StageOptions& opts = {});

/// Trains only the depth contribution subnet on prepared pairs. Stage 2 uses
/// this after building its pairs; it does not touch stage flags.
void train_dca_on_pairs(ModelBundle<float>& bundle, const std::vector<DcaPair>& pairs, PgtMode mode,
                        const StageSchedule& schedule, const TrainConfig& cfg, TrainLog& log, int stage_tag = 2,
                        const StageOptions& opts = {}, int start_epoch = 0);

/// Stage 3: enables the cross-connections (when the arch has them) and
/// fine-tunes the RGB encoder/decoder and the cross convolutions. The depth
/// subnet is frozen.
void stage3_finetune_rgb(ModelBundle<float>& bundle, std::span<const RgbdSample> train, const TrainConfig& cfg,
                         TrainLog& log, const StageOptions& opts = {});

/// Stage 4: everything end to end on the final map. With arch.detach_omega
/// the depth contribution subnet stays frozen.
void stage4_joint_finetune(ModelBundle<float>& bundle, std::span<const RgbdSample> train, const TrainConfig& cfg,
                           TrainLog& log, const StageOptions& opts = {});

/// Optional warm start: trains the RGB subnet on an RGB-only saliency set,
/// then copies its encoder into all three subnets. Sets no stage flag.
void stage0_pretrain_rgb(ModelBundle<float>& bundle, std::span<const RgbdSample> rgb_only, const TrainConfig& cfg,
                         TrainLog& log);

struct PipelineHooks {
  /// Runs after the bundle is created and before stage 1.
  std::function<void(ModelBundle<float>&)> stage0;
  /// Runs after each completed stage.
  std::function<void(const ModelBundle<float>&, int stage)> on_stage_end;
  StageOptions stage_options;
  /// Stages after this one are not run (and nothing is evaluated unless
  /// stage 4 is done).
  int stop_after_stage = 4;
  /// Stage-1/stage-2 bundles for the baselines when those stages were not
  /// run in this call (for example when resuming from checkpoints).
  const ModelBundle<float>* stage1_snapshot = nullptr;
  const ModelBundle<float>* stage2_snapshot = nullptr;
};

struct PipelineResult {
  ModelBundle<float> bundle;
  SplitPlan plan;
  std::vector<std::string> test_ids;
  /// Final network on the held-out samples.
  MetricReport report;
  /// "rgb" (stage-1 RGB subnet), "depth" (stage-1 depth subnet) and
  /// "simple" (omega blend of the stage-1 maps with the stage-2 omega).
  std::map<std::string, MetricReport> baselines;
  /// Mean omega of the final network over held-out samples, by sample tag.
  std::map<std::string, double> omega_by_tag;
};

/// split -> stage 1 -> 2 -> 3 -> 4 -> evaluation on `test`. Stages already
/// marked done in `start` (when given) are skipped.
PipelineResult run_full_pipeline(std::span<const RgbdSample> train, std::span<const RgbdSample> test,
                                 const TrainConfig& cfg, TrainLog& log, const PipelineHooks& hooks = {},
                                 const ModelBundle<float>* start = nullptr);

struct HoldOut {
  std::vector<RgbdSample> train;
  std::vector<RgbdSample> test;
};

/// Seeded hold-out of round(n * fraction) samples; both parts keep the
/// input order.
HoldOut hold_out_split(std::span<const RgbdSample> samples, std::uint64_t seed, double fraction);

/// hold_out_split with cfg.test_fraction, then the pipeline above.
PipelineResult run_full_pipeline(std::span<const RgbdSample> samples, const TrainConfig& cfg, TrainLog& log,
                                 const PipelineHooks& hooks = {});

/// Metrics of the bundle's final map on `test`, including E-measure and the
/// omega diagnostics.
MetricReport evaluate_bundle(const ModelBundle<float>& bundle, std::span<const RgbdSample> test,
                             const std::string& name);

}  // namespace rgbdsal
