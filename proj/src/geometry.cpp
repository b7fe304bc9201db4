#include "tavp/geometry.hpp"

#include <cmath>

namespace tavp {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

static double logit(double p) { return std::log(p / (1.0 - p)); }

CameraPose5 squash_pose(const std::array<double, 5>& raw, const RadialBounds& bounds,
                        double theta_cap) {
  bounds.validate();
  if (!(theta_cap > 0.0) || theta_cap > kPi + 1e-12)
    fail(ErrorKind::InvalidInput, "theta_cap must lie in (0, pi]");
  CameraPose5 pose;
  pose.theta = theta_cap * sigmoid(raw[0]);
  pose.phi = kTwoPi * sigmoid(raw[1]);
  pose.r = bounds.r_min + (bounds.r_max - bounds.r_min) * sigmoid(raw[2]);
  pose.theta_up = kPi * sigmoid(raw[3]);
  pose.phi_up = kTwoPi * sigmoid(raw[4]);
  return pose;
}

std::array<double, 5> unsquash_pose(const CameraPose5& pose, const RadialBounds& bounds,
                                    double theta_cap) {
  bounds.validate();
  return {logit(pose.theta / theta_cap), logit(pose.phi / kTwoPi),
          logit((pose.r - bounds.r_min) / (bounds.r_max - bounds.r_min)),
          logit(pose.theta_up / kPi), logit(pose.phi_up / kTwoPi)};
}

CameraPose5 stratify_azimuth(CameraPose5 pose, int64_t k, int64_t n) {
  if (n < 1 || k < 0 || k >= n) fail(ErrorKind::InvalidInput, "camera index out of range");
  pose.phi = std::fmod(pose.phi + kTwoPi * static_cast<double>(k) / static_cast<double>(n), kTwoPi);
  return pose;
}

Vec3 spherical_to_cartesian(double theta, double phi, double r) {
  const double st = std::sin(theta);
  return Vec3(r * st * std::cos(phi), r * st * std::sin(phi), r * std::cos(theta));
}

Vec3 up_vector(double theta_up, double phi_up) {
  const double st = std::sin(theta_up);
  return Vec3(st * std::cos(phi_up), st * std::sin(phi_up), std::cos(theta_up));
}

CameraExtrinsics look_at_extrinsics(const Vec3& position, const Vec3& up_raw, const Vec3& target) {
  const Vec3 to_target = target - position;
  const double dist = to_target.norm();
  if (!(dist > 1e-12))
    fail(ErrorKind::InvalidInput, "look_at_extrinsics: camera position coincides with target");
  const Vec3 f = to_target / dist;

  // Gram-Schmidt the up hint against the view direction, with fallbacks for
  // degenerate hints.
  Vec3 u = up_raw - up_raw.dot(f) * f;
  if (u.norm() < 1e-6) {
    const Vec3 wy(0.0, 1.0, 0.0);
    u = wy - wy.dot(f) * f;
    if (u.norm() < 1e-6) {
      const Vec3 wx(1.0, 0.0, 0.0);
      u = wx - wx.dot(f) * f;
    }
  }
  u.normalize();
  const Vec3 right = f.cross(u);

  CameraExtrinsics ext;
  ext.rotation.row(0) = right;
  ext.rotation.row(1) = u;
  ext.rotation.row(2) = -f;
  ext.center = position;
  return ext;
}

CameraIntrinsics make_intrinsics(int width, int height, double fov_y_deg) {
  if (width <= 0 || height <= 0 || !(fov_y_deg > 0.0) || fov_y_deg >= 180.0)
    fail(ErrorKind::InvalidInput, "make_intrinsics: bad resolution or field of view");
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  const double f = (height / 2.0) / std::tan(fov_y_deg * kPi / 360.0);
  intr.fx = f;
  intr.fy = f;
  intr.cx = (width - 1) / 2.0;
  intr.cy = (height - 1) / 2.0;
  return intr;
}

VirtualCamera make_camera(const CameraPose5& pose, int width, int height, double fov_y_deg,
                          const Vec3& target) {
  VirtualCamera cam;
  cam.intrinsics = make_intrinsics(width, height, fov_y_deg);
  const Vec3 position = target + spherical_to_cartesian(pose.theta, pose.phi, pose.r);
  cam.extrinsics = look_at_extrinsics(position, up_vector(pose.theta_up, pose.phi_up), target);
  return cam;
}

bool project_point(const VirtualCamera& cam, const Vec3& p, double& u, double& v, double& depth) {
  const Vec3 pc = cam.extrinsics.world_to_camera(p);
  depth = -pc.z();
  if (!(depth > 1e-9)) return false;
  u = cam.intrinsics.cx + cam.intrinsics.fx * pc.x() / depth;
  v = cam.intrinsics.cy - cam.intrinsics.fy * pc.y() / depth;
  return true;
}

Vec3 backproject_pixel(const CameraIntrinsics& intr, double u, double v, double depth) {
  return Vec3((u - intr.cx) * depth / intr.fx, -(v - intr.cy) * depth / intr.fy, -depth);
}

}  // namespace tavp
