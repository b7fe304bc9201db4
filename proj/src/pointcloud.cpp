#include "tavp/pointcloud.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tavp {

void PointCloud::validate() const {
  if (points.size() != colors.size())
    fail(ErrorKind::InvalidInput, "point cloud has mismatched position/color counts");
  for (size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite() || !colors[i].allFinite())
      fail(ErrorKind::InvalidInput, "point cloud contains non-finite values at index " +
                                        std::to_string(i));
  }
}

void RgbdView::validate() const {
  if (width <= 0 || height <= 0) fail(ErrorKind::InvalidInput, "rgbd view has empty resolution");
  const size_t n = static_cast<size_t>(width) * height;
  if (rgb.size() != 3 * n || depth.size() != n)
    fail(ErrorKind::ShapeMismatch, "rgbd view buffers do not match resolution");
}

PointCloud backproject_rgbd(const RgbdView& view) {
  view.validate();
  PointCloud out;
  out.points.reserve(view.depth.size());
  out.colors.reserve(view.depth.size());
  for (int v = 0; v < view.height; ++v) {
    for (int u = 0; u < view.width; ++u) {
      const size_t idx = static_cast<size_t>(v) * view.width + u;
      const double d = view.depth[idx];
      if (!(d > 0.0)) continue;
      const Vec3 pc = backproject_pixel(view.intrinsics, u, v, d);
      out.points.push_back(view.extrinsics.camera_to_world(pc));
      out.colors.emplace_back(view.rgb[3 * idx], view.rgb[3 * idx + 1], view.rgb[3 * idx + 2]);
    }
  }
  return out;
}

PointCloud aggregate(const std::vector<PointCloud>& clouds, const Workspace& ws) {
  PointCloud out;
  for (const auto& c : clouds) {
    for (size_t i = 0; i < c.size(); ++i) {
      if (ws.contains(c.points[i])) {
        out.points.push_back(c.points[i]);
        out.colors.push_back(c.colors[i]);
      }
    }
  }
  if (out.empty()) fail(ErrorKind::EmptyScene, "aggregate: no points inside the workspace");
  return out;
}

PointCloud downsample(const PointCloud& cloud, size_t n, Rng& rng) {
  if (cloud.empty()) fail(ErrorKind::EmptyScene, "downsample: empty input cloud");
  if (n == 0) fail(ErrorKind::InvalidInput, "downsample: n must be positive");
  PointCloud out;
  out.points.reserve(n);
  out.colors.reserve(n);
  if (cloud.size() >= n) {
    // Partial Fisher-Yates over an index vector; first n entries are a
    // uniform sample without replacement.
    std::vector<uint32_t> idx(cloud.size());
    std::iota(idx.begin(), idx.end(), 0u);
    for (size_t i = 0; i < n; ++i) {
      const size_t j = i + static_cast<size_t>(rng.bounded(idx.size() - i));
      std::swap(idx[i], idx[j]);
      out.points.push_back(cloud.points[idx[i]]);
      out.colors.push_back(cloud.colors[idx[i]]);
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      const size_t j = static_cast<size_t>(rng.bounded(cloud.size()));
      out.points.push_back(cloud.points[j]);
      out.colors.push_back(cloud.colors[j]);
    }
  }
  return out;
}

PointCloud recenter_scale_crop(const PointCloud& cloud, const Vec3& center, double scale,
                               double half_extent) {
  if (!(scale > 0.0)) fail(ErrorKind::InvalidInput, "recenter_scale_crop: scale must be positive");
  if (std::isnan(half_extent) || half_extent < 0.0)
    fail(ErrorKind::InvalidInput, "recenter_scale_crop: bad half_extent");
  PointCloud out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = (cloud.points[i] - center) * scale;
    if (std::abs(p.x()) <= half_extent && std::abs(p.y()) <= half_extent &&
        std::abs(p.z()) <= half_extent) {
      out.points.push_back(p);
      out.colors.push_back(cloud.colors[i]);
    }
  }
  return out;
}

static int color_byte(double c) {
  const double v = c < 0.0 ? 0.0 : (c > 1.0 ? 1.0 : c);
  return static_cast<int>(std::lround(v * 255.0));
}

void write_ply(const PointCloud& cloud, const std::string& path) {
  cloud.validate();
  std::ofstream f(path);
  if (!f) fail(ErrorKind::InvalidInput, "write_ply: cannot open " + path);
  f << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
    << "\nproperty double x\nproperty double y\nproperty double z\n"
       "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char line[128];
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const Vec3& c = cloud.colors[i];
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %d %d %d\n", p.x(), p.y(), p.z(),
                  color_byte(c.x()), color_byte(c.y()), color_byte(c.z()));
    f << line;
  }
  if (!f) fail(ErrorKind::InvalidInput, "write_ply: write failed for " + path);
}

PointCloud read_ply(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::LoadError, "read_ply: cannot open " + path);
  std::string line;
  size_t n = 0;
  bool header_done = false;
  if (!std::getline(f, line) || line != "ply") fail(ErrorKind::LoadError, "read_ply: not a PLY file");
  while (std::getline(f, line)) {
    if (line.rfind("element vertex ", 0) == 0) {
      n = static_cast<size_t>(std::strtoull(line.c_str() + 15, nullptr, 10));
    } else if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) fail(ErrorKind::LoadError, "read_ply: truncated header");
  PointCloud out;
  out.points.reserve(n);
  out.colors.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (!std::getline(f, line)) fail(ErrorKind::LoadError, "read_ply: truncated vertex data");
    double x, y, z;
    int r, g, b;
    if (std::sscanf(line.c_str(), "%lf %lf %lf %d %d %d", &x, &y, &z, &r, &g, &b) != 6)
      fail(ErrorKind::LoadError, "read_ply: malformed vertex line " + std::to_string(i));
    out.points.emplace_back(x, y, z);
    out.colors.emplace_back(r / 255.0, g / 255.0, b / 255.0);
  }
  return out;
}

}  // namespace tavp
