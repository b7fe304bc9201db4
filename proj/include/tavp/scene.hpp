#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tavp/config.hpp"
#include "tavp/render.hpp"

namespace tavp {

inline constexpr int kRotationBins = 72;  // 5-degree bins per Euler angle

// Static description of one task variant. The roster is
// reach_occluded x variants, then reach_clear, then two_target; the task id
// indexes it. Rotation/gripper/collision labels are functions of the task id
// so they are learnable from the instruction, which concentrates the
// evaluation signal on grounding accuracy.
struct TaskSpec {
  int64_t task_id = 0;
  std::string family;
  int64_t variant = 0;
  Vec3 target_color = Vec3::Zero();
  Vec3 distractor_color = Vec3::Zero();  // two_target only
  std::array<int, 3> rot_bins{};
  int gripper = 0;
  int collision = 0;

  static TaskSpec from_id(const RunConfig& cfg, int64_t task_id);
};

// One procedural tabletop scene.
//
// reach_occluded surrounds the target sphere with a cylindrical wall that has
// a single azimuthal gap, plus an overhanging lid, so the three static
// sensors (high elevation) never see the target while a near-horizontal ray
// through the gap does. A fourth "wrist" sensor is planted inside that gap
// cone so the aggregated input cloud always carries target evidence.
struct Scene {
  PointCloud cloud;  // ground-truth surface samples in workspace coordinates
  Vec3 target_pos = Vec3::Zero();
  std::array<int, 3> gt_rotation_bins{};
  int gt_gripper = 0;
  int gt_collision = 0;
  // Unit direction of unobstructed sight from the target (through the wall
  // gap, horizontal); zero when nothing occludes.
  Vec3 revealing_dir = Vec3::Zero();
  std::vector<RgbdView> fixed_views;  // 3 static sensors + 1 wrist sensor
  int64_t task_id = 0;
  int64_t instruction_id = 0;
  uint64_t seed = 0;
};

// Deterministic in (cfg, task_id, seed). Visibility contracts are enforced
// by rendering the sensors and counting exact target-colored pixels; scenes
// are resampled up to 100 times before reporting generation failure.
Scene generate_scene(const RunConfig& cfg, int64_t task_id, uint64_t seed);

// Backprojects all sensor views, crops to the workspace and (when above
// cfg.cloud_keep_points) downsamples with a seed derived from the scene.
PointCloud aggregate_scene_cloud(const RunConfig& cfg, const Scene& scene);

// Pixels whose color matches exactly and whose depth is valid. The renderer
// copies point colors verbatim, so exact matching is sound.
int count_color_pixels(const std::vector<double>& rgb, const std::vector<double>& depth,
                       const Vec3& color);

// Writes <prefix>.json (metadata) and <prefix>.ply (cloud).
void save_scene(const Scene& scene, const std::string& prefix);

// The three static sensor cameras shared by every scene.
std::vector<VirtualCamera> static_sensor_cameras(const RunConfig& cfg);

}  // namespace tavp
