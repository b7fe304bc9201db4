#pragma once

#include <string>
#include <vector>

#include "tavp/pointcloud.hpp"

namespace tavp {

// Re-rendered RGB + depth image. valid is false when no point fell inside
// the frustum; depth is 0 at pixels no splat touched.
struct RenderedView {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;    // H*W*3
  std::vector<double> depth;  // H*W
  bool valid = false;
  VirtualCamera camera;
};

// Per-view probability map over pixels. When valid, values sum to 1.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  bool valid = false;

  double at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
};

// Z-buffered square-splat renderer. Each point whose continuous projection
// rounds to a pixel inside the image paints a (2*radius_px+1)^2 square;
// nearest depth wins, earlier points win exact ties.
RenderedView render_pointcloud(const PointCloud& cloud, const VirtualCamera& cam, int radius_px);

// Truncated-Gaussian ground-truth heatmap of a world point: pixels within
// trunc_sigmas*sigma_px of the projection get exp(-d^2/(2 sigma^2)) mass,
// renormalized to sum 1. Invalid when the point projects behind the camera
// or outside the image.
Heatmap gt_heatmap(const Vec3& world_point, const VirtualCamera& cam, double sigma_px,
                   double trunc_sigmas);

// Scores each 3D candidate by summing bilinear heatmap samples at its
// projection over all valid views; candidates outside every frustum score 0.
// Returns the index of the best candidate, lowest index on ties.
// Throws NoSignal when no view is valid.
size_t score_3d_candidates(const std::vector<Vec3>& candidates,
                           const std::vector<Heatmap>& heatmaps,
                           const std::vector<VirtualCamera>& cams,
                           std::vector<double>* scores_out = nullptr);

// Bilinear sample of a heatmap at continuous pixel coordinates, 0 outside.
double sample_heatmap(const Heatmap& map, double u, double v);

// Binary PPM (P6) dump of the rgb channels for debugging.
void write_ppm(const RenderedView& view, const std::string& path);

}  // namespace tavp
