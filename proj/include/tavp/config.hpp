#pragma once

#include <cstdint>
#include <string>

#include "tavp/common.hpp"

namespace tavp {

// Run configuration. Defaults reproduce the published training constants:
// 3 virtual cameras on radius [0.75, 1.3], 224x224 re-renders, 2048-point
// policy clouds, 8 gates x 16 experts with top-2 routing, 512-wide context,
// PPO batch 96 at lr 2e-6 with a cosine schedule.
struct RunConfig {
  // cameras / rendering
  int64_t k = 3;
  double r_min = 0.75;
  double r_max = 1.3;
  double theta_cap = kPi;
  bool azimuth_stratify = false;
  int64_t resolution = 224;
  double fov_y_deg = 60.0;
  int64_t point_radius_px = 1;
  double sigma_px = 1.5;
  double trunc_sigmas = 3.0;

  // point clouds
  int64_t n_points = 2048;
  int64_t cloud_keep_points = 3000;
  int64_t fixed_view_resolution = 128;
  double workspace_xy = 0.45;
  double workspace_z_min = -0.02;
  double workspace_z_max = 0.55;
  double half_extent = 0.22;
  double crop_scale = 1.0;

  // routing
  int64_t n_gates = 8;
  int64_t n_experts = 16;
  int64_t top_k = 2;
  int64_t embed_dim = 512;
  bool use_taskmoe = true;

  // task roster
  int64_t variants_occluded = 5;
  int64_t variants_clear = 2;
  int64_t variants_two_target = 2;

  // model dims
  int64_t patch_stride = 8;
  int64_t patch_feat_dim = 16;
  int64_t patch_hidden = 16;
  int64_t head_hidden = 128;
  int64_t mvep_hidden1 = 64;
  int64_t mvep_hidden2 = 128;
  int64_t mvep_embed = 512;
  int64_t value_hidden = 64;

  // grounding grids
  int64_t coarse_grid_xy = 13;
  int64_t coarse_grid_z = 7;
  int64_t fine_grid = 13;
  double prob_eps = 1e-7;

  // ppo
  double clip_eps = 0.2;
  int64_t ppo_epochs = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  int64_t batch_size = 96;
  double lr = 2.0e-6;
  std::string lr_schedule = "cosine";

  // training schedule
  int64_t train_scenes = 240;
  int64_t eval_scenes = 200;
  int64_t stage1_steps = 400;
  int64_t stage1_batch = 12;
  double stage1_lr = 2e-3;
  double stage1_warmup_frac = 0.25;
  int64_t stage2_updates = 40;
  int64_t stage3_steps = 200;
  double stage3_lr = 5e-4;

  // rewards / eval
  double reward_w0 = 1.0;
  double reward_w1 = 1.0;
  double reward_w2 = 1.0;
  double success_tau = 0.05;
  bool oracle_coarse = false;
  std::string eval_oracle = "none";  // none | coarse | full

  int64_t n_tasks() const { return variants_occluded + variants_clear + variants_two_target; }
  int64_t heatmap_grid() const { return (resolution + patch_stride - 1) / patch_stride; }

  void validate() const;
};

// Plain-text `key = value` config. '#' starts a comment; blank lines are
// skipped; unknown keys and malformed values are hard errors naming the line.
// An empty file yields the full default config.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg);

bool config_equal(const RunConfig& a, const RunConfig& b);

// Hash of the architecture-relevant subset (dims, counts, routing shape).
// Checkpoints embed this value; loading into a mismatched architecture fails.
uint64_t arch_fingerprint(const RunConfig& cfg);

}  // namespace tavp
