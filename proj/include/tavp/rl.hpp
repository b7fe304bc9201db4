#pragma once

#include "tavp/model.hpp"

namespace tavp {

// Single-pass running mean/variance (Welford).
struct WelfordState {
  int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double x);
  double variance() const;  // sample variance; 0 below two observations
  double stddev() const;
};

// Updates the state with x and returns (x - mean') / max(std', 1e-8) against
// the post-update statistics; 0 while fewer than two observations exist.
double welford_update_normalize(WelfordState& s, double x);

struct RewardComponents {
  double r0 = 0.0;  // loss margin of the dynamic views over the reference
  double r1 = 0.0;  // negative mean heatmap entropy (confidence)
  double r2 = 0.0;  // mean pairwise cosine distance between camera positions
  double z0 = 0.0, z1 = 0.0, z2 = 0.0;  // Welford-normalized components
  double total = 0.0;                   // clip(sum w_i * z_i, -10, 10)
};

// Mean componentwise improvement of the four supervised losses.
double reward_r0(const LossVector& reference, const LossVector& tavp);

// -(1/K) sum H(map_i) in nats. Views that produced no usable map count as
// maximally uncertain (uniform entropy at the sibling resolution), so the
// policy cannot profit from throwing cameras off the scene. At least one map
// must be valid.
double reward_r1(const std::vector<Heatmap>& maps);

// (1/(K(K-1))) sum over ordered pairs of 1 - cos(p_i, p_j). A zero-norm
// position contributes cos = 0 against every partner. Needs K >= 2.
double reward_r2(const std::vector<Vec3>& positions);

// Normalizes each raw component against its own running state (updating it),
// then weights, sums, and clips.
RewardComponents aggregate_reward(double r0, double r1, double r2,
                                  const std::array<double, 3>& weights,
                                  std::array<WelfordState, 3>& norms);

// One pseudo-environment interaction, stored for PPO.
struct Transition {
  int64_t scene_index = -1;
  int64_t task_id = -1;
  net::Tensor points;              // [n,6] policy observation (crop frame)
  std::vector<double> raw_action;  // K*5 pre-squash Gaussian sample
  std::vector<CameraPose5> poses;
  double reward = 0.0;
  double old_log_prob = 0.0;
  double old_value = 0.0;
  RewardComponents components;
};

// Per-scene constants of stage 2: the frozen perception's focus, the policy
// observation built from the crop around it, and the supervised losses of the
// canonical fixed views (the reference the reward margins against).
struct SceneContext {
  int64_t scene_index = -1;
  Vec3 focus = Vec3::Zero();
  net::Tensor points;
  LossVector ref_losses;
};

SceneContext make_scene_context(const TavpModel& model, net::ParamStore& p,
                                const SceneBundle& bundle, int64_t scene_index,
                                const std::string& prefix = "");

// Runs the frozen perception on the given poses and returns the reward
// components relative to the context's reference losses. Normalizer states
// are updated. NoSignal propagates (callers skip and log such placements).
RewardComponents pseudo_env_probe(const TavpModel& model, net::ParamStore& p,
                                  const SceneBundle& bundle, const SceneContext& ctx,
                                  const std::vector<CameraPose5>& poses,
                                  std::array<WelfordState, 3>& norms,
                                  const std::string& prefix = "");

// Samples K poses from the policy, scores them in the pseudo-environment and
// assembles the PPO transition. The log-prob is evaluated through the same
// tape expression the update path uses, so ratios at the collection
// parameters are exactly one.
Transition pseudo_env_step(const TavpModel& model, net::ParamStore& p,
                           const SceneBundle& bundle, const SceneContext& ctx,
                           std::array<WelfordState, 3>& norms, Rng& rng,
                           const std::string& prefix = "");

// Assembled PPO objective over a transition buffer: clipped surrogate plus
// value regression minus the entropy bonus. Advantages are reward - old_value
// (single-step episodes, no bootstrapping).
struct PpoTerms {
  net::Tape::Id loss = -1;
  net::Tape::Id policy_term = -1;
  net::Tape::Id value_term = -1;
  std::vector<double> ratios;
  double entropy = 0.0;  // mean policy entropy, reported even at coef 0
};

PpoTerms ppo_loss(net::Tape& t, net::ParamStore& p, const TavpModel& model,
                  const std::vector<Transition>& buffer, const RunConfig& cfg);

struct PpoStats {
  double first_epoch_ratio_dev = 0.0;  // max |ratio - 1| before the first step
  double mean_ratio = 0.0;             // last epoch
  double clip_fraction = 0.0;          // last epoch, fraction with |ratio-1| > eps
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
};

// epochs_per_batch full-batch passes with Adam on the mvep./value. groups.
// A non-finite loss aborts with a Divergence error carrying the term values.
PpoStats ppo_update(const TavpModel& model, net::ParamStore& p, net::Adam& opt,
                    const std::vector<Transition>& buffer, const RunConfig& cfg, double lr);

}  // namespace tavp
