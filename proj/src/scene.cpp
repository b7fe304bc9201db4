#include "tavp/scene.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace tavp {

namespace {

constexpr double kDeg = kPi / 180.0;
constexpr double kTargetRadius = 0.035;

const std::array<Vec3, 8>& palette() {
  static const std::array<Vec3, 8> p = {
      Vec3(1.0, 0.1, 0.1),  Vec3(0.1, 1.0, 0.1),  Vec3(0.15, 0.35, 1.0), Vec3(1.0, 0.85, 0.1),
      Vec3(1.0, 0.15, 1.0), Vec3(0.1, 1.0, 1.0),  Vec3(1.0, 0.55, 0.1),  Vec3(0.9, 0.9, 0.95)};
  return p;
}

const Vec3 kTableColor(0.55, 0.45, 0.35);
const Vec3 kWallColor(0.5, 0.5, 0.52);

void add_sphere(PointCloud& c, Rng& rng, const Vec3& center, double radius, const Vec3& color,
                int n) {
  for (int i = 0; i < n; ++i) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    const double len = d.norm();
    if (len < 1e-9) {
      --i;
      continue;
    }
    c.points.push_back(center + d * (radius / len));
    c.colors.push_back(color);
  }
}

void add_table(PointCloud& c, Rng& rng, int n) {
  for (int i = 0; i < n; ++i) {
    c.points.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                          rng.uniform(0.0, 0.004));
    c.colors.push_back(kTableColor);
  }
}

// Cylindrical wall around `axis_xy` covering every azimuth except the gap
// (alpha - gamma/2, alpha + gamma/2).
void add_ring(PointCloud& c, Rng& rng, const Vec3& axis, double rho, double z_top, double alpha,
              double gamma, int n) {
  for (int i = 0; i < n; ++i) {
    const double az = alpha + gamma / 2.0 + rng.uniform(0.0, kTwoPi - gamma);
    const double r = rho + rng.uniform(-0.004, 0.004);
    c.points.emplace_back(axis.x() + r * std::cos(az), axis.y() + r * std::sin(az),
                          rng.uniform(0.0, z_top));
    c.colors.push_back(kWallColor);
  }
}

void add_disk(PointCloud& c, Rng& rng, const Vec3& center_xy, double radius, double z, int n) {
  for (int i = 0; i < n; ++i) {
    const double r = radius * std::sqrt(rng.uniform(0.0, 1.0));
    const double az = rng.uniform(0.0, kTwoPi);
    c.points.emplace_back(center_xy.x() + r * std::cos(az), center_xy.y() + r * std::sin(az),
                          z + rng.uniform(0.0, 0.003));
    c.colors.push_back(kWallColor);
  }
}

VirtualCamera sensor_camera(const Vec3& position, const Vec3& look_target, const RunConfig& cfg) {
  VirtualCamera cam;
  cam.intrinsics = make_intrinsics(cfg.fixed_view_resolution, cfg.fixed_view_resolution,
                                   cfg.fov_y_deg);
  cam.extrinsics = look_at_extrinsics(position, Vec3(0, 0, 1), look_target);
  return cam;
}

RgbdView to_rgbd(const RenderedView& r) {
  RgbdView v;
  v.width = r.width;
  v.height = r.height;
  v.rgb = r.rgb;
  v.depth = r.depth;
  v.intrinsics = r.camera.intrinsics;
  v.extrinsics = r.camera.extrinsics;
  return v;
}

}  // namespace

TaskSpec TaskSpec::from_id(const RunConfig& cfg, int64_t task_id) {
  if (task_id < 0 || task_id >= cfg.n_tasks())
    fail(ErrorKind::InvalidInput, "task id " + std::to_string(task_id) + " outside roster of " +
                                      std::to_string(cfg.n_tasks()));
  TaskSpec s;
  s.task_id = task_id;
  if (task_id < cfg.variants_occluded) {
    s.family = "reach_occluded";
    s.variant = task_id;
    s.target_color = palette()[static_cast<size_t>(s.variant % 8)];
  } else if (task_id < cfg.variants_occluded + cfg.variants_clear) {
    s.family = "reach_clear";
    s.variant = task_id - cfg.variants_occluded;
    s.target_color = palette()[static_cast<size_t>((5 + s.variant) % 8)];
  } else {
    s.family = "two_target";
    s.variant = task_id - cfg.variants_occluded - cfg.variants_clear;
    // Variant pairs swap the roles of the same two colors, so only the
    // instruction distinguishes the scenes.
    s.target_color = palette()[static_cast<size_t>(s.variant % 2)];
    s.distractor_color = palette()[static_cast<size_t>((s.variant + 1) % 2)];
  }
  s.rot_bins = {static_cast<int>((7 * task_id + 3) % kRotationBins),
                static_cast<int>((11 * task_id + 5) % kRotationBins),
                static_cast<int>((13 * task_id + 9) % kRotationBins)};
  s.gripper = static_cast<int>(task_id % 2);
  s.collision = static_cast<int>((task_id / 2) % 2);
  return s;
}

std::vector<VirtualCamera> static_sensor_cameras(const RunConfig& cfg) {
  // Elevation 0.8 rad from vertical: steep enough that the lid overhang
  // provably blocks every ray into the walled enclosure.
  const Vec3 look(0.0, 0.0, 0.08);
  std::vector<VirtualCamera> cams;
  for (double phi : {1.5 * kPi, kPi / 6.0, 5.0 * kPi / 6.0}) {
    const Vec3 pos = spherical_to_cartesian(0.8, phi, 1.15);
    cams.push_back(sensor_camera(pos, look, cfg));
  }
  return cams;
}

int count_color_pixels(const std::vector<double>& rgb, const std::vector<double>& depth,
                       const Vec3& color) {
  int n = 0;
  for (size_t i = 0; i < depth.size(); ++i) {
    if (depth[i] <= 0.0) continue;
    if (rgb[3 * i] == color.x() && rgb[3 * i + 1] == color.y() && rgb[3 * i + 2] == color.z())
      ++n;
  }
  return n;
}

Scene generate_scene(const RunConfig& cfg, int64_t task_id, uint64_t seed) {
  const TaskSpec spec = TaskSpec::from_id(cfg, task_id);
  const std::vector<VirtualCamera> statics = static_sensor_cameras(cfg);
  const Workspace ws{Vec3(-cfg.workspace_xy, -cfg.workspace_xy, cfg.workspace_z_min),
                     Vec3(cfg.workspace_xy, cfg.workspace_xy, cfg.workspace_z_max)};

  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, "scene", static_cast<uint64_t>(attempt)));
    Scene scene;
    scene.task_id = task_id;
    scene.instruction_id = task_id;
    scene.seed = seed;
    scene.gt_rotation_bins = spec.rot_bins;
    scene.gt_gripper = spec.gripper;
    scene.gt_collision = spec.collision;
    scene.target_pos =
        Vec3(rng.uniform(-0.18, 0.18), rng.uniform(-0.18, 0.18), rng.uniform(0.06, 0.12));

    add_table(scene.cloud, rng, 2600);
    add_sphere(scene.cloud, rng, scene.target_pos, kTargetRadius, spec.target_color, 750);

    double wrist_azimuth = rng.uniform(0.0, kTwoPi);
    if (spec.family == "reach_occluded") {
      const double rho = rng.uniform(0.095, 0.12);
      const double gamma = rng.uniform(70.0 * kDeg, 90.0 * kDeg);
      const double alpha = rng.uniform(0.0, kTwoPi);
      const double z_top = scene.target_pos.z() + rng.uniform(0.06, 0.09);
      add_ring(scene.cloud, rng, scene.target_pos, rho, z_top, alpha, gamma, 2600);
      // Lid overhang of 5 cm: rays that clear the wall still cross the lid
      // plane inside its radius.
      add_disk(scene.cloud, rng, scene.target_pos, rho + 0.05, z_top, 1100);
      scene.revealing_dir = Vec3(std::cos(alpha), std::sin(alpha), 0.0);
      wrist_azimuth = alpha + rng.uniform(-1.0, 1.0) * (gamma / 2.0 - 10.0 * kDeg);
    } else if (spec.family == "two_target") {
      Vec3 d;
      bool placed = false;
      for (int t = 0; t < 50 && !placed; ++t) {
        d = Vec3(rng.uniform(-0.18, 0.18), rng.uniform(-0.18, 0.18), rng.uniform(0.06, 0.12));
        placed = (d - scene.target_pos).norm() >= 0.15;
      }
      if (!placed) continue;
      add_sphere(scene.cloud, rng, d, kTargetRadius, spec.distractor_color, 750);
    }

    // Wrist sensor: near-horizontal, inside the gap cone for occluded scenes.
    const double elev = rng.uniform(2.0 * kDeg, 6.0 * kDeg);
    const double dist = rng.uniform(0.6, 0.9);
    const Vec3 wrist_pos =
        scene.target_pos + dist * Vec3(std::cos(elev) * std::cos(wrist_azimuth),
                                       std::cos(elev) * std::sin(wrist_azimuth), std::sin(elev));
    const Vec3 wrist_look =
        scene.target_pos + Vec3(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01),
                                rng.uniform(-0.01, 0.01));
    std::vector<VirtualCamera> sensors = statics;
    sensors.push_back(sensor_camera(wrist_pos, wrist_look, cfg));

    bool ok = true;
    std::vector<RenderedView> renders;
    for (const auto& cam : sensors) renders.push_back(render_pointcloud(scene.cloud, cam, cfg.point_radius_px));
    for (size_t i = 0; i < 3 && ok; ++i) {
      const int hits = count_color_pixels(renders[i].rgb, renders[i].depth, spec.target_color);
      ok = (spec.family == "reach_occluded") ? (hits == 0) : (hits >= 3);
    }
    if (ok) ok = count_color_pixels(renders[3].rgb, renders[3].depth, spec.target_color) >= 5;
    if (ok && spec.family == "two_target") {
      int best = 0;
      for (size_t i = 0; i < 3; ++i)
        best = std::max(best,
                        count_color_pixels(renders[i].rgb, renders[i].depth, spec.distractor_color));
      ok = best >= 3;
    }
    if (ok) {
      for (const auto& p : scene.cloud.points) {
        if (!ws.contains(p)) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) continue;

    for (const auto& r : renders) scene.fixed_views.push_back(to_rgbd(r));
    return scene;
  }
  fail(ErrorKind::GenerationFailed, "no valid scene for task " + std::to_string(task_id) +
                                        " after 100 attempts (seed " + std::to_string(seed) + ")");
}

PointCloud aggregate_scene_cloud(const RunConfig& cfg, const Scene& scene) {
  std::vector<PointCloud> parts;
  parts.reserve(scene.fixed_views.size());
  for (const auto& v : scene.fixed_views) parts.push_back(backproject_rgbd(v));
  const Workspace ws{Vec3(-cfg.workspace_xy, -cfg.workspace_xy, cfg.workspace_z_min),
                     Vec3(cfg.workspace_xy, cfg.workspace_xy, cfg.workspace_z_max)};
  PointCloud merged = aggregate(parts, ws);
  if (merged.size() > static_cast<size_t>(cfg.cloud_keep_points)) {
    Rng rng(derive_seed(scene.seed, "aggregate"));
    merged = downsample(merged, static_cast<size_t>(cfg.cloud_keep_points), rng);
  }
  return merged;
}

void save_scene(const Scene& scene, const std::string& prefix) {
  nlohmann::json j;
  j["task_id"] = scene.task_id;
  j["instruction_id"] = scene.instruction_id;
  j["seed"] = scene.seed;
  j["target_pos"] = {scene.target_pos.x(), scene.target_pos.y(), scene.target_pos.z()};
  j["gt_rotation_bins"] = scene.gt_rotation_bins;
  j["gt_gripper"] = scene.gt_gripper;
  j["gt_collision"] = scene.gt_collision;
  j["revealing_dir"] = {scene.revealing_dir.x(), scene.revealing_dir.y(),
                        scene.revealing_dir.z()};
  j["n_points"] = scene.cloud.size();
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& v : scene.fixed_views) {
    const Vec3& c = v.extrinsics.center;
    sensors.push_back({c.x(), c.y(), c.z()});
  }
  j["sensor_centers"] = sensors;
  j["cloud_ply"] = prefix.substr(prefix.find_last_of('/') + 1) + ".ply";

  std::ofstream out(prefix + ".json");
  if (!out) fail(ErrorKind::LoadError, "cannot write scene json at " + prefix);
  out << j.dump(2) << "\n";
  write_ply(scene.cloud, prefix + ".ply");
}

}  // namespace tavp
