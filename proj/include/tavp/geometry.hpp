#pragma once

#include <Eigen/Dense>
#include <array>

#include "tavp/common.hpp"

namespace tavp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Spherical look-at pose: polar angle theta in [0, pi], azimuth phi in
// [0, 2pi], radius r, plus a spherical parameterization of the raw up vector.
struct CameraPose5 {
  double theta = 0.0;
  double phi = 0.0;
  double r = 1.0;
  double theta_up = 0.0;
  double phi_up = 0.0;
};

struct RadialBounds {
  double r_min = 0.75;
  double r_max = 1.3;

  void validate() const {
    if (!(r_min > 0.0) || !(r_max > r_min))
      fail(ErrorKind::InvalidInput, "radial bounds require 0 < r_min < r_max, got r_min=" +
                                        std::to_string(r_min) + " r_max=" + std::to_string(r_max));
  }
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

// rotation maps world to camera coordinates (rows are the camera axes);
// center is the camera position in world coordinates. Camera frame:
// x = right, y = up, z = -forward (the camera looks down its -z axis).
struct CameraExtrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();

  Vec3 world_to_camera(const Vec3& p) const { return rotation * (p - center); }
  Vec3 camera_to_world(const Vec3& p) const { return rotation.transpose() * p + center; }
};

struct VirtualCamera {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

// Maps an unbounded 5-vector to a valid pose through sigmoids:
// theta = theta_cap*s(x0), phi = 2pi*s(x1), r = r_min + (r_max-r_min)*s(x2),
// theta_up = pi*s(x3), phi_up = 2pi*s(x4).
CameraPose5 squash_pose(const std::array<double, 5>& raw, const RadialBounds& bounds,
                        double theta_cap = kPi);

// Inverse of squash_pose on the open interior of the ranges.
std::array<double, 5> unsquash_pose(const CameraPose5& pose, const RadialBounds& bounds,
                                    double theta_cap = kPi);

// Rotates camera k of an n-camera rig by k/n of a turn in azimuth, so the
// rig's default headings tile the circle instead of stacking at one bearing
// and each camera regresses bearings near its own sector center, away from
// the sigmoid's saturated wrap point.
CameraPose5 stratify_azimuth(CameraPose5 pose, int64_t k, int64_t n);

// Camera position on the sphere around the origin.
Vec3 spherical_to_cartesian(double theta, double phi, double r);

// Unit up-vector hint from its spherical parameterization.
Vec3 up_vector(double theta_up, double phi_up);

// Orthonormal look-at frame with det(R) = +1. The raw up vector is
// Gram-Schmidt orthogonalized against the viewing direction; if it is
// degenerate (parallel to the view axis within 1e-6) world +y is used,
// then world +x.
CameraExtrinsics look_at_extrinsics(const Vec3& position, const Vec3& up_raw,
                                    const Vec3& target = Vec3::Zero());

// Full camera from a squashed pose. The camera sits at pose position relative
// to `target` and looks at `target`.
VirtualCamera make_camera(const CameraPose5& pose, int width, int height, double fov_y_deg,
                          const Vec3& target = Vec3::Zero());

CameraIntrinsics make_intrinsics(int width, int height, double fov_y_deg);

// Projects a world point. Returns false if the point is not strictly in
// front of the camera; u/v are continuous pixel coordinates (pixel centers
// at integer coordinates).
bool project_point(const VirtualCamera& cam, const Vec3& p, double& u, double& v, double& depth);

// Camera-frame point for pixel (u,v) at positive depth d along the view ray.
Vec3 backproject_pixel(const CameraIntrinsics& intr, double u, double v, double depth);

double sigmoid(double x);

}  // namespace tavp
