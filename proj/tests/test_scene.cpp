#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "tavp/scene.hpp"

using namespace tavp;

namespace {

RunConfig desk_config() {
  RunConfig cfg;
  cfg.fixed_view_resolution = 48;
  cfg.cloud_keep_points = 1500;
  cfg.n_points = 256;
  return cfg;
}

bool same_view(const RgbdView& a, const RgbdView& b) {
  return a.rgb == b.rgb && a.depth == b.depth && a.extrinsics.center == b.extrinsics.center;
}

}  // namespace

TEST_CASE("task roster decodes families, colors and distinct labels") {
  const RunConfig cfg = desk_config();
  REQUIRE(cfg.n_tasks() == 9);
  std::set<std::tuple<int, int, int, int, int>> labels;
  for (int64_t id = 0; id < cfg.n_tasks(); ++id) {
    const TaskSpec s = TaskSpec::from_id(cfg, id);
    CHECK(s.task_id == id);
    if (id < 5) CHECK(s.family == "reach_occluded");
    if (id == 5 || id == 6) CHECK(s.family == "reach_clear");
    if (id >= 7) CHECK(s.family == "two_target");
    for (int b : s.rot_bins) {
      CHECK(b >= 0);
      CHECK(b < kRotationBins);
    }
    labels.insert({s.rot_bins[0], s.rot_bins[1], s.rot_bins[2], s.gripper, s.collision});
  }
  CHECK(labels.size() == 9);  // every task has its own action labels

  // The two-target pair shares colors with roles swapped.
  const TaskSpec a = TaskSpec::from_id(cfg, 7);
  const TaskSpec b = TaskSpec::from_id(cfg, 8);
  CHECK(a.target_color == b.distractor_color);
  CHECK(a.distractor_color == b.target_color);

  CHECK_THROWS_AS(TaskSpec::from_id(cfg, 9), Error);
  CHECK_THROWS_AS(TaskSpec::from_id(cfg, -1), Error);
}

TEST_CASE("scene generation is deterministic in (task, seed)") {
  const RunConfig cfg = desk_config();
  const Scene a = generate_scene(cfg, 0, 77);
  const Scene b = generate_scene(cfg, 0, 77);
  REQUIRE(a.cloud.size() == b.cloud.size());
  CHECK(a.cloud.points == b.cloud.points);
  CHECK(a.cloud.colors == b.cloud.colors);
  CHECK(a.target_pos == b.target_pos);
  REQUIRE(a.fixed_views.size() == 4);
  for (size_t i = 0; i < 4; ++i) CHECK(same_view(a.fixed_views[i], b.fixed_views[i]));

  const Scene c = generate_scene(cfg, 0, 78);
  CHECK(a.target_pos != c.target_pos);
}

TEST_CASE("occluded scenes hide the target from every static sensor") {
  const RunConfig cfg = desk_config();
  for (uint64_t seed = 0; seed < 25; ++seed) {
    const int64_t task = static_cast<int64_t>(seed % 5);
    const Scene s = generate_scene(cfg, task, seed);
    const TaskSpec spec = TaskSpec::from_id(cfg, task);

    for (size_t i = 0; i < 3; ++i)
      CHECK(count_color_pixels(s.fixed_views[i].rgb, s.fixed_views[i].depth, spec.target_color) ==
            0);
    // The wrist sensor peeks through the gap.
    CHECK(count_color_pixels(s.fixed_views[3].rgb, s.fixed_views[3].depth, spec.target_color) >=
          5);
    CHECK(std::abs(s.revealing_dir.norm() - 1.0) < 1e-12);
    CHECK(s.revealing_dir.z() == 0.0);
    // The wrist really sits inside the revealing cone.
    const Vec3 to_wrist = (s.fixed_views[3].extrinsics.center - s.target_pos).normalized();
    CHECK(to_wrist.dot(s.revealing_dir) > std::cos(40.0 * kPi / 180.0));
  }
}

TEST_CASE("clear scenes keep the target visible everywhere") {
  const RunConfig cfg = desk_config();
  for (uint64_t seed = 0; seed < 12; ++seed) {
    const int64_t task = 5 + static_cast<int64_t>(seed % 2);
    const Scene s = generate_scene(cfg, task, seed);
    const TaskSpec spec = TaskSpec::from_id(cfg, task);
    for (size_t i = 0; i < 3; ++i)
      CHECK(count_color_pixels(s.fixed_views[i].rgb, s.fixed_views[i].depth, spec.target_color) >=
            3);
    CHECK(s.revealing_dir == Vec3::Zero());
  }
}

TEST_CASE("two-target scenes keep both spheres apart and visible") {
  const RunConfig cfg = desk_config();
  for (uint64_t seed = 0; seed < 12; ++seed) {
    const int64_t task = 7 + static_cast<int64_t>(seed % 2);
    const Scene s = generate_scene(cfg, task, seed);
    const TaskSpec spec = TaskSpec::from_id(cfg, task);
    int target_best = 0, distractor_best = 0;
    for (size_t i = 0; i < 3; ++i) {
      target_best = std::max(
          target_best, count_color_pixels(s.fixed_views[i].rgb, s.fixed_views[i].depth,
                                          spec.target_color));
      distractor_best = std::max(
          distractor_best, count_color_pixels(s.fixed_views[i].rgb, s.fixed_views[i].depth,
                                              spec.distractor_color));
    }
    CHECK(target_best >= 3);
    CHECK(distractor_best >= 3);

    // Find the distractor centroid from its colored cloud points.
    Vec3 centroid = Vec3::Zero();
    int n = 0;
    for (size_t i = 0; i < s.cloud.size(); ++i) {
      if (s.cloud.colors[i] == spec.distractor_color) {
        centroid += s.cloud.points[i];
        ++n;
      }
    }
    REQUIRE(n > 0);
    centroid /= n;
    CHECK((centroid - s.target_pos).norm() >= 0.14);
  }
}

TEST_CASE("every generated point stays inside the workspace") {
  const RunConfig cfg = desk_config();
  const Workspace ws;
  for (uint64_t seed = 100; seed < 140; ++seed) {
    const Scene s = generate_scene(cfg, static_cast<int64_t>(seed % 9), seed);
    CHECK_FALSE(s.cloud.empty());
    for (const auto& p : s.cloud.points) {
      if (!ws.contains(p)) {
        CAPTURE(p.x());
        CAPTURE(p.y());
        CAPTURE(p.z());
        FAIL_CHECK("point escaped the workspace");
        break;
      }
    }
    Workspace tight;
    tight.min.z() = -1.0;  // targets always float above the table
    CHECK(s.target_pos.z() >= 0.05);
  }
}

TEST_CASE("aggregated sensor cloud keeps target evidence even when occluded") {
  const RunConfig cfg = desk_config();
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_scene(cfg, 1, 200 + seed);
    const TaskSpec spec = TaskSpec::from_id(cfg, 1);
    const PointCloud agg = aggregate_scene_cloud(cfg, s);
    CHECK(agg.size() <= static_cast<size_t>(cfg.cloud_keep_points));
    CHECK_FALSE(agg.empty());
    int target_points = 0;
    const Workspace ws;
    for (size_t i = 0; i < agg.size(); ++i) {
      CHECK(ws.contains(agg.points[i]));
      if (agg.colors[i] == spec.target_color) ++target_points;
    }
    // Without the wrist sensor this would be zero for occluded scenes and
    // no viewpoint could ever ground the target.
    CHECK(target_points > 0);
  }

  // Determinism of the aggregate too.
  const Scene s = generate_scene(cfg, 1, 205);
  const PointCloud a = aggregate_scene_cloud(cfg, s);
  const PointCloud b = aggregate_scene_cloud(cfg, s);
  CHECK(a.points == b.points);
}

TEST_CASE("impossible visibility demands fail after bounded resampling") {
  RunConfig cfg = desk_config();
  cfg.fixed_view_resolution = 8;  // target footprint shrinks below the pixel floor
  cfg.point_radius_px = 0;
  try {
    generate_scene(cfg, 5, 1);
    FAIL("expected generation failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GenerationFailed);
    CHECK(std::string(e.what()).find("100") != std::string::npos);
  }
}

TEST_CASE("scene serialization writes readable json plus a ply sidecar") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::current_path() / "scratch_scene";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const RunConfig cfg = desk_config();
  const Scene s = generate_scene(cfg, 7, 3);
  save_scene(s, (dir / "scene0").string());

  std::ifstream jf(dir / "scene0.json");
  REQUIRE(jf.good());
  const auto j = nlohmann::json::parse(jf);
  CHECK(j["task_id"] == 7);
  CHECK(j["seed"] == 3);
  CHECK(j["target_pos"].size() == 3);
  CHECK(j["sensor_centers"].size() == 4);
  CHECK(std::abs(j["target_pos"][0].get<double>() - s.target_pos.x()) == 0.0);

  const PointCloud back = read_ply((dir / "scene0.ply").string());
  REQUIRE(back.size() == s.cloud.size());
  CHECK(back.points == s.cloud.points);
}
