#pragma once

#include <string>
#include <vector>

#include "tavp/geometry.hpp"

namespace tavp {

// Column-matched position/color arrays. Colors are in [0, 1].
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void validate() const;
};

// One posed RGB-D sensor image. rgb is row-major H*W*3, depth row-major H*W,
// both with pixel (0,0) at the top-left. depth <= 0 marks an invalid pixel.
struct RgbdView {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;
  std::vector<double> depth;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;

  void validate() const;
};

// Axis-aligned workspace bounds, inclusive on both ends.
struct Workspace {
  Vec3 min = Vec3(-0.45, -0.45, -0.02);
  Vec3 max = Vec3(0.45, 0.45, 0.55);

  bool contains(const Vec3& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y() &&
           p.z() >= min.z() && p.z() <= max.z();
  }
};

// Lifts every valid pixel into world coordinates; point count equals the
// number of pixels with depth > 0.
PointCloud backproject_rgbd(const RgbdView& view);

// Concatenates the given clouds and keeps only points inside the workspace.
// Throws EmptyScene when nothing survives the crop.
PointCloud aggregate(const std::vector<PointCloud>& clouds, const Workspace& ws);

// Uniform downsampling to exactly n points: without replacement when the
// input has at least n points, with replacement otherwise. Every output
// point is a copy of an input point.
PointCloud downsample(const PointCloud& cloud, size_t n, Rng& rng);

// p' = (p - center) * scale, then crop to |p'_i| <= half_extent. Colors are
// preserved. half_extent may be +infinity.
PointCloud recenter_scale_crop(const PointCloud& cloud, const Vec3& center, double scale,
                               double half_extent);

// ASCII PLY with double x/y/z and uchar red/green/blue. Positions are
// printed with %.17g and round-trip bit-exactly; colors quantize to 8 bits.
void write_ply(const PointCloud& cloud, const std::string& path);
PointCloud read_ply(const std::string& path);

}  // namespace tavp
