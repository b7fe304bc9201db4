#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tavp/scene.hpp"
#include "tavp/taskmoe.hpp"

namespace tavp {

// Recentering transform used for the fine stage: local = (world - center) *
// scale, camera orbits the local origin.
struct CropFrame {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 to_local(const Vec3& w) const { return (w - center) * scale; }
  Vec3 to_world(const Vec3& l) const { return center + l / scale; }
};

struct LossVector {
  double l_hf = 0.0;
  double l_rot = 0.0;
  double l_gri = 0.0;
  double l_col = 0.0;

  std::array<double, 4> as_array() const { return {l_hf, l_rot, l_gri, l_col}; }
};

// Everything the action decoder predicts for one scene, as plain numbers.
struct ActionPrediction {
  Vec3 position = Vec3::Zero();  // world coordinates
  std::array<std::vector<double>, 3> rotation_bins;  // distributions over 72 bins
  double gripper_prob = 0.5;
  double collision_prob = 0.5;
  std::vector<Heatmap> view_heatmaps;  // normalized per-view grounding maps
};

// Per-scene immutable cache: the aggregated sensor cloud plus the three
// canonical raw renders that feed routing and coarse grounding. The heavy
// ground-truth cloud and sensor images are dropped after aggregation.
struct SceneBundle {
  Scene scene;  // cloud/fixed_views cleared
  PointCloud agg;
  std::vector<net::Tensor> canonical_feats;  // 3 x [G*G, 5]
  std::vector<VirtualCamera> canonical_cams;  // world frame
};

// Tape nodes of the supervised objective. `total` adds the coarse term only
// when it was requested.
struct SceneLosses {
  net::Tape::Id l_hf = -1;
  net::Tape::Id l_rot = -1;
  net::Tape::Id l_gri = -1;
  net::Tape::Id l_col = -1;
  net::Tape::Id l_coarse = -1;  // -1 when not built
  net::Tape::Id total = -1;
};

struct ForwardSpec {
  const SceneBundle* bundle = nullptr;
  std::vector<CameraPose5> fine_poses;  // crop-frame look-at poses
  bool oracle_coarse = false;           // bypass the coarse head with the gt position
  bool with_coarse_loss = false;        // add the coarse grounding term to the total
  std::string prefix;                   // "" for the live model, "shadow." for the frozen copy
};

struct SceneForward {
  RoutingDecision routing;
  Vec3 focus = Vec3::Zero();  // world-frame recenter target
  CropFrame frame;
  std::vector<VirtualCamera> fine_cams;  // crop frame
  std::vector<bool> view_valid;          // render and gt heatmap both usable
  std::vector<Heatmap> gt_maps;
  SceneLosses losses;
  ActionPrediction prediction;
};

struct PolicyOut {
  net::Tape::Id mu = -1;         // [K*5]
  net::Tape::Id log_sigma = -1;  // [K*5], clamped
  net::Tape::Id value = -1;      // [1]
};

class TavpModel {
 public:
  explicit TavpModel(const RunConfig& cfg);

  const RunConfig& config() const { return cfg_; }
  const TaskMoe& moe() const { return moe_; }
  int64_t grid() const { return cfg_.heatmap_grid(); }
  double r_mid() const { return 0.5 * (cfg_.r_min + cfg_.r_max); }

  // Parameter groups. Perception = encoder + router + grounding/action heads
  // (stages 1 and 3); policy = point-cloud trunk + value head (stage 2).
  void ensure_perception(net::ParamStore& p, const std::string& prefix = "") const;
  void ensure_policy(net::ParamStore& p) const;
  static std::vector<std::string> perception_prefixes(const std::string& prefix = "");
  static std::vector<std::string> policy_prefixes();

  // Mean patch color plus the normalized patch center, per grid cell.
  net::Tensor patch_features(const RenderedView& view) const;

  // Front, left and top poses at the middle orbit radius.
  std::vector<CameraPose5> canonical_poses() const;
  // Camera for a crop-frame pose (looks at the local origin).
  VirtualCamera fine_camera(const CameraPose5& pose) const;

  SceneBundle make_bundle(Scene&& scene) const;

  // Full supervised pass: route, ground coarsely, crop, render the fine
  // views, decode, and assemble the objective. Throws NoSignal when no fine
  // view yields a usable ground-truth map.
  SceneForward scene_forward(net::Tape& t, net::ParamStore& p, const ForwardSpec& spec) const;

  // Policy trunk over [n,6] points (xyz + rgb in crop coordinates).
  PolicyOut policy_forward(net::Tape& t, net::ParamStore& p, const net::Tensor& points) const;
  // Crop-frame policy input: seeded downsample to n_points, 6 features each.
  net::Tensor policy_points(const PointCloud& crop, Rng& rng) const;

  PointCloud crop_cloud(const PointCloud& agg, const Vec3& focus) const;

 private:
  RunConfig cfg_;
  TaskMoe moe_;
};

// Probability-space objective on an assembled prediction; every log takes a
// clamp at prob_eps. The tape path in scene_forward agrees with this within
// numerical tolerance (tested).
LossVector action_losses(const ActionPrediction& pred, const Scene& scene,
                         const std::vector<Heatmap>& gt_maps, double prob_eps);

// Plain-number snapshot of the four tape loss terms.
LossVector loss_values(const net::Tape& t, const SceneLosses& l);

// Success = position within tau AND all rotation bin argmaxes exact AND both
// binary heads on the right side of 0.5.
bool action_success(const ActionPrediction& pred, const Scene& scene, double tau);

}  // namespace tavp
