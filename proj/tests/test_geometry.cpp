#include <doctest.h>

#include "tavp/geometry.hpp"

using namespace tavp;

namespace {

// Independent spherical inversion used as the round-trip oracle.
void cartesian_to_spherical(const Vec3& p, double& theta, double& phi, double& r) {
  r = p.norm();
  theta = std::acos(p.z() / r);
  phi = std::atan2(p.y(), p.x());
  if (phi < 0.0) phi += kTwoPi;
}

}  // namespace

TEST_CASE("squash_pose at zero raw input hits range midpoints") {
  RadialBounds bounds;
  const CameraPose5 pose = squash_pose({0, 0, 0, 0, 0}, bounds);
  CHECK(pose.theta == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(pose.phi == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(pose.r == doctest::Approx(1.025).epsilon(1e-12));
  CHECK(pose.theta_up == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(pose.phi_up == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("squash_pose saturates to range ends at +-40") {
  RadialBounds bounds;
  const CameraPose5 hi = squash_pose({40, 40, 40, 40, 40}, bounds);
  CHECK(std::abs(hi.theta - kPi) < 1e-8);
  CHECK(std::abs(hi.phi - kTwoPi) < 1e-8);
  CHECK(std::abs(hi.r - bounds.r_max) < 1e-8);
  const CameraPose5 lo = squash_pose({-40, -40, -40, -40, -40}, bounds);
  CHECK(std::abs(lo.theta) < 1e-8);
  CHECK(std::abs(lo.r - bounds.r_min) < 1e-8);
}

TEST_CASE("squash_pose rejects inverted radial bounds") {
  RadialBounds bad{0.9, 0.5};
  CHECK_THROWS_AS(squash_pose({0, 0, 0, 0, 0}, bad), Error);
  try {
    squash_pose({0, 0, 0, 0, 0}, bad);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
    CHECK(std::string(e.what()).find("r_min") != std::string::npos);
    CHECK(std::string(e.what()).find("r_max") != std::string::npos);
  }
}

TEST_CASE("unsquash_pose inverts squash_pose") {
  RadialBounds bounds;
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    std::array<double, 5> raw;
    for (auto& x : raw) x = rng.uniform(-6.0, 6.0);
    const CameraPose5 pose = squash_pose(raw, bounds);
    const auto back = unsquash_pose(pose, bounds);
    for (int j = 0; j < 5; ++j) CHECK(back[j] == doctest::Approx(raw[j]).epsilon(1e-8));
  }
}

TEST_CASE("spherical positions round-trip through an independent inversion") {
  Rng rng(11);
  RadialBounds bounds;
  for (int i = 0; i < 500; ++i) {
    std::array<double, 5> raw;
    for (auto& x : raw) x = rng.normal();
    const CameraPose5 pose = squash_pose(raw, bounds);
    const Vec3 p = spherical_to_cartesian(pose.theta, pose.phi, pose.r);
    double theta, phi, r;
    cartesian_to_spherical(p, theta, phi, r);
    CHECK(theta == doctest::Approx(pose.theta).epsilon(1e-9));
    CHECK(r == doctest::Approx(pose.r).epsilon(1e-9));
    // Azimuth is undefined on the poles.
    if (pose.theta > 1e-6 && pose.theta < kPi - 1e-6)
      CHECK(std::abs(std::remainder(phi - pose.phi, kTwoPi)) < 1e-9);
  }
}

TEST_CASE("look_at extrinsics are orthonormal with det +1 and center the target") {
  Rng rng(23);
  RadialBounds bounds;
  for (int i = 0; i < 2000; ++i) {
    std::array<double, 5> raw;
    for (auto& x : raw) x = rng.uniform(-8.0, 8.0);
    const CameraPose5 pose = squash_pose(raw, bounds);
    const VirtualCamera cam = make_camera(pose, 33, 33, 60.0);

    const Mat3& r = cam.extrinsics.rotation;
    const Mat3 should_be_identity = r * r.transpose();
    CHECK((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-9));

    double u, v, depth;
    REQUIRE(project_point(cam, Vec3::Zero(), u, v, depth));
    CHECK(std::abs(u - cam.intrinsics.cx) < 1e-6);
    CHECK(std::abs(v - cam.intrinsics.cy) < 1e-6);
    CHECK(depth == doctest::Approx(pose.r).epsilon(1e-9));
  }
}

TEST_CASE("camera +z looking at origin with +y up is the identity frame") {
  const CameraExtrinsics ext = look_at_extrinsics(Vec3(0, 0, 1), Vec3(0, 1, 0));
  CHECK((ext.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ext.center.isApprox(Vec3(0, 0, 1)));
}

TEST_CASE("degenerate up hints fall back to world axes") {
  // Up hint parallel to the viewing direction: world +y should take over.
  const CameraExtrinsics a = look_at_extrinsics(Vec3(0, 0, 2), Vec3(0, 0, -1));
  CHECK(a.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a.rotation.row(1).transpose() - Vec3(0, 1, 0)).norm() < 1e-9);

  // Viewing along y as well: world +x fallback.
  const CameraExtrinsics b = look_at_extrinsics(Vec3(0, 2, 0), Vec3(0, -1, 0));
  CHECK(b.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((b.rotation.row(1).transpose() - Vec3(1, 0, 0)).norm() < 1e-9);
}

TEST_CASE("look_at rejects a camera on the target") {
  CHECK_THROWS_AS(look_at_extrinsics(Vec3::Zero(), Vec3(0, 1, 0)), Error);
}

TEST_CASE("intrinsics follow the vertical field of view") {
  const CameraIntrinsics intr = make_intrinsics(64, 64, 90.0);
  CHECK(intr.fy == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(intr.fx == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(intr.cx == doctest::Approx(31.5));
}

TEST_CASE("project and backproject are inverse at the pixel level") {
  const CameraPose5 pose = squash_pose({0.3, -0.8, 0.2, 0.1, -0.5}, RadialBounds{});
  const VirtualCamera cam = make_camera(pose, 65, 65, 70.0);
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    double u, v, d;
    REQUIRE(project_point(cam, p, u, v, d));
    const Vec3 cam_pt = backproject_pixel(cam.intrinsics, u, v, d);
    const Vec3 world = cam.extrinsics.camera_to_world(cam_pt);
    CHECK((world - p).norm() < 1e-10);
  }
}

TEST_CASE("points behind the camera do not project") {
  const VirtualCamera cam = make_camera(squash_pose({0, 0, 0, 0, 0}, RadialBounds{}), 33, 33, 60.0);
  double u, v, d;
  const Vec3 behind = cam.extrinsics.center * 2.0;  // past the camera, away from origin
  CHECK_FALSE(project_point(cam, behind, u, v, d));
}
