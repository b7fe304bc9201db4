#include "tavp/render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace tavp {

RenderedView render_pointcloud(const PointCloud& cloud, const VirtualCamera& cam, int radius_px) {
  if (radius_px < 0) fail(ErrorKind::InvalidInput, "render_pointcloud: negative splat radius");
  const int w = cam.intrinsics.width;
  const int h = cam.intrinsics.height;
  if (w <= 0 || h <= 0) fail(ErrorKind::InvalidInput, "render_pointcloud: empty resolution");

  RenderedView view;
  view.width = w;
  view.height = h;
  view.camera = cam;
  view.rgb.assign(static_cast<size_t>(w) * h * 3, 0.0);
  view.depth.assign(static_cast<size_t>(w) * h, 0.0);
  std::vector<double> zbuf(static_cast<size_t>(w) * h, std::numeric_limits<double>::infinity());

  for (size_t i = 0; i < cloud.size(); ++i) {
    double u, v, d;
    if (!project_point(cam, cloud.points[i], u, v, d)) continue;
    const int cu = static_cast<int>(std::lround(u));
    const int cv = static_cast<int>(std::lround(v));
    if (cu < 0 || cu >= w || cv < 0 || cv >= h) continue;
    view.valid = true;
    for (int dv = -radius_px; dv <= radius_px; ++dv) {
      const int py = cv + dv;
      if (py < 0 || py >= h) continue;
      for (int du = -radius_px; du <= radius_px; ++du) {
        const int px = cu + du;
        if (px < 0 || px >= w) continue;
        const size_t idx = static_cast<size_t>(py) * w + px;
        if (d < zbuf[idx]) {
          zbuf[idx] = d;
          view.depth[idx] = d;
          view.rgb[3 * idx] = cloud.colors[i].x();
          view.rgb[3 * idx + 1] = cloud.colors[i].y();
          view.rgb[3 * idx + 2] = cloud.colors[i].z();
        }
      }
    }
  }
  return view;
}

Heatmap gt_heatmap(const Vec3& world_point, const VirtualCamera& cam, double sigma_px,
                   double trunc_sigmas) {
  if (!(sigma_px > 0.0) || !(trunc_sigmas > 0.0))
    fail(ErrorKind::InvalidInput, "gt_heatmap: sigma_px and trunc_sigmas must be positive");
  const int w = cam.intrinsics.width;
  const int h = cam.intrinsics.height;
  Heatmap map;
  map.width = w;
  map.height = h;
  map.values.assign(static_cast<size_t>(w) * h, 0.0);

  double u, v, d;
  if (!project_point(cam, world_point, u, v, d)) return map;
  if (u < 0.0 || u > w - 1.0 || v < 0.0 || v > h - 1.0) return map;

  const double radius = trunc_sigmas * sigma_px;
  const int u0 = std::max(0, static_cast<int>(std::floor(u - radius)));
  const int u1 = std::min(w - 1, static_cast<int>(std::ceil(u + radius)));
  const int v0 = std::max(0, static_cast<int>(std::floor(v - radius)));
  const int v1 = std::min(h - 1, static_cast<int>(std::ceil(v + radius)));

  // Weights are computed relative to the nearest squared distance so
  // arbitrarily small sigma still leaves a nonzero weight after exp
  // underflow, and the nearest pixel is always kept so the sigma -> 0 limit
  // is a one-hot map.
  double min_d2 = std::numeric_limits<double>::infinity();
  for (int py = v0; py <= v1; ++py)
    for (int px = u0; px <= u1; ++px) {
      const double d2 = (px - u) * (px - u) + (py - v) * (py - v);
      if (d2 < min_d2) min_d2 = d2;
    }
  const double cutoff = std::max(radius * radius, min_d2);

  const double inv = 1.0 / (2.0 * sigma_px * sigma_px);
  double sum = 0.0;
  for (int py = v0; py <= v1; ++py) {
    for (int px = u0; px <= u1; ++px) {
      const double d2 = (px - u) * (px - u) + (py - v) * (py - v);
      if (d2 > cutoff) continue;
      const double g = std::exp(-(d2 - min_d2) * inv);
      map.values[static_cast<size_t>(py) * w + px] = g;
      sum += g;
    }
  }
  if (sum <= 0.0) return map;
  for (auto& x : map.values) x /= sum;
  map.valid = true;
  return map;
}

double sample_heatmap(const Heatmap& map, double u, double v) {
  if (u < 0.0 || u > map.width - 1.0 || v < 0.0 || v > map.height - 1.0) return 0.0;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, map.width - 1);
  const int y1 = std::min(y0 + 1, map.height - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  const double a = map.at(y0, x0) * (1.0 - fx) + map.at(y0, x1) * fx;
  const double b = map.at(y1, x0) * (1.0 - fx) + map.at(y1, x1) * fx;
  return a * (1.0 - fy) + b * fy;
}

size_t score_3d_candidates(const std::vector<Vec3>& candidates,
                           const std::vector<Heatmap>& heatmaps,
                           const std::vector<VirtualCamera>& cams,
                           std::vector<double>* scores_out) {
  if (candidates.empty()) fail(ErrorKind::InvalidInput, "score_3d_candidates: no candidates");
  if (heatmaps.size() != cams.size())
    fail(ErrorKind::ShapeMismatch, "score_3d_candidates: heatmap/camera count mismatch");
  size_t n_valid = 0;
  for (const auto& m : heatmaps)
    if (m.valid) ++n_valid;
  if (n_valid == 0) fail(ErrorKind::NoSignal, "score_3d_candidates: no valid heatmap");

  size_t best = 0;
  double best_score = -1.0;
  if (scores_out) scores_out->assign(candidates.size(), 0.0);
  for (size_t c = 0; c < candidates.size(); ++c) {
    double s = 0.0;
    for (size_t k = 0; k < cams.size(); ++k) {
      if (!heatmaps[k].valid) continue;
      double u, v, d;
      if (!project_point(cams[k], candidates[c], u, v, d)) continue;
      s += sample_heatmap(heatmaps[k], u, v);
    }
    if (scores_out) (*scores_out)[c] = s;
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

void write_ppm(const RenderedView& view, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidInput, "write_ppm: cannot open " + path);
  f << "P6\n" << view.width << " " << view.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(view.width) * 3);
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double val = view.rgb[(static_cast<size_t>(y) * view.width + x) * 3 + c];
        val = val < 0.0 ? 0.0 : (val > 1.0 ? 1.0 : val);
        row[3 * x + c] = static_cast<unsigned char>(std::lround(val * 255.0));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!f) fail(ErrorKind::InvalidInput, "write_ppm: write failed for " + path);
}

}  // namespace tavp
