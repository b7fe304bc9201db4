#pragma once

#include "tavp/checkpoint.hpp"
#include "tavp/metrics.hpp"
#include "tavp/rl.hpp"

namespace tavp {

// Scene pools. Training scenes use seeds derived from (seed, "train", i) over
// a round-robin task assignment; held-out evaluation scenes use a disjoint
// (seed, "eval", i) stream.
std::vector<SceneBundle> build_train_bundles(const TavpModel& model, uint64_t seed,
                                             int64_t count);
std::vector<SceneBundle> build_eval_bundles(const TavpModel& model, uint64_t seed, int64_t count);

struct StageResult {
  std::string checkpoint_path;
  uint64_t store_hash = 0;   // content hash of the full store at save time
  double final_metric = 0.0;  // stage 1/3: mean batch loss; stage 2: mean reward
};

// Stage 1: supervised training of encoder, router, and grounding/action heads
// on the canonical fixed views. Ends by snapshotting the perception weights
// under shadow.* and writing stage1.ckpt.
StageResult run_stage1(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                       MetricsSink& sink);

// Stage 2: PPO over the pseudo-environment; only mvep./value. parameters move
// (hash-verified). Writes stage2.ckpt with the stage-1 hash as parent.
StageResult run_stage2(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                       const std::string& stage1_ckpt, MetricsSink& sink);

// Stage 3: supervised fine-tune on policy-mean viewpoints with mvep./value.
// bit-frozen (hash-verified). Writes stage3.ckpt with both ancestor hashes.
StageResult run_stage3(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                       const std::string& stage2_ckpt, MetricsSink& sink);

enum class EvalMode { Fixed, Dynamic, Random };
EvalMode eval_mode_from(const std::string& name);
std::string eval_mode_name(EvalMode mode);

struct EvalReport {
  std::string mode;
  int64_t scenes = 0;
  int64_t skipped = 0;                   // forward passes with no usable view
  std::vector<double> per_task_success;  // indexed by task id
  std::vector<int64_t> per_task_count;
  double mean_success = 0.0;
  double mean_r0_margin = 0.0;      // raw loss margin over the fixed-view reference
  double mean_diversity = 0.0;      // pairwise cosine distance of the used views
  double mean_radius = 0.0;
  double reveal_within_30deg = 0.0;  // occluded scenes whose best view is within 30 degrees
  double mean_reveal_angle_deg = 0.0;
  double wall_clock_ms = 0.0;  // reported to metrics only, not in the JSON artifact
};

// Held-out evaluation of a checkpoint under fixed, policy-mean, or random
// viewpoints. Writes eval_report.json (byte-stable) into out_dir.
EvalReport run_eval(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                    const std::string& ckpt, EvalMode mode, MetricsSink& sink);

struct AblationRun {
  uint64_t seed = 0;
  bool use_taskmoe = true;
  double dynamic_success = 0.0;
  double random_success = 0.0;
  double fixed_success = 0.0;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  double median_dynamic_with_moe = 0.0;
  double median_random_with_moe = 0.0;
  double median_dynamic_without_moe = 0.0;
  double moe_margin = 0.0;      // median dynamic success, with minus without
  double dynamic_margin = 0.0;  // median dynamic minus median random, with MoE
};

// Full three-stage pipeline plus evaluation for every seed in `seeds`, with
// and without the task router. Writes ablate_report.json plus one
// subdirectory of artifacts per run.
AblationReport run_ablate(const RunConfig& cfg, const std::vector<uint64_t>& seeds,
                          const std::string& out_dir);

}  // namespace tavp
