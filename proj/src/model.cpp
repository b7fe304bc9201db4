#include "tavp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tavp {

using net::MlpSpec;
using net::ParamStore;
using net::Tape;
using net::Tensor;

namespace {

// World-frame focus the canonical raw renders look at, and the lattice the
// coarse stage scores; sized for the tabletop band where targets can live.
const Vec3 kCoarseLook(0.0, 0.0, 0.1);
constexpr double kCoarseXY = 0.24;
constexpr double kCoarseZLo = 0.02;
constexpr double kCoarseZHi = 0.20;

MlpSpec patch_spec(const RunConfig& c) {
  return {{5, c.patch_hidden, c.patch_feat_dim}, false};
}
MlpSpec view_proj_spec(const RunConfig& c) {
  return {{c.patch_feat_dim, c.embed_dim}, false};
}
MlpSpec scorer_spec(const RunConfig& c) {
  return {{c.patch_feat_dim, c.patch_hidden, 1}, false};
}
MlpSpec head_spec(const RunConfig& c, int64_t out) {
  return {{2 * c.embed_dim, c.head_hidden, out}, false};
}

Tensor one_hot(int64_t n, int64_t hot) {
  Tensor t({n});
  t.data[static_cast<size_t>(hot)] = 1.0;
  return t;
}

// i/(n-1) lattice coordinate, midpoint for single-sample axes.
double lattice_frac(int64_t i, int64_t n) {
  return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5;
}

std::vector<double> host_softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (auto& x : out) x /= z;
  return out;
}

}  // namespace

TavpModel::TavpModel(const RunConfig& cfg) : cfg_(cfg), moe_(MoeSettings::from(cfg)) {
  cfg_.validate();
}

void TavpModel::ensure_perception(ParamStore& p, const std::string& prefix) const {
  net::ensure_mlp(p, prefix + "enc.patch", patch_spec(cfg_));
  net::ensure_mlp(p, prefix + "enc.view", view_proj_spec(cfg_));
  moe_.ensure(p, prefix);
  net::ensure_film(p, prefix + "head.fine_film", cfg_.embed_dim, cfg_.patch_feat_dim);
  net::ensure_mlp(p, prefix + "head.fine", scorer_spec(cfg_));
  net::ensure_film(p, prefix + "head.coarse_film", cfg_.embed_dim, cfg_.patch_feat_dim);
  net::ensure_mlp(p, prefix + "head.coarse", scorer_spec(cfg_));
  net::ensure_mlp(p, prefix + "head.rot", head_spec(cfg_, 3 * kRotationBins));
  net::ensure_mlp(p, prefix + "head.gri", head_spec(cfg_, 1));
  net::ensure_mlp(p, prefix + "head.col", head_spec(cfg_, 1));
}

void TavpModel::ensure_policy(ParamStore& p) const {
  net::ensure_mlp(p, "mvep.pt", {{6, cfg_.mvep_hidden1, cfg_.mvep_hidden2}, true});
  net::ensure_mlp(p, "mvep.emb", {{cfg_.mvep_hidden2, cfg_.mvep_embed}, true});
  net::ensure_mlp(p, "mvep.head", {{cfg_.mvep_embed, cfg_.k * 10}, false});
  net::ensure_mlp(p, "value.head", {{cfg_.mvep_embed, cfg_.value_hidden, 1}, false});
}

std::vector<std::string> TavpModel::perception_prefixes(const std::string& prefix) {
  return {prefix + "enc.", prefix + "moe.", prefix + "head."};
}

std::vector<std::string> TavpModel::policy_prefixes() { return {"mvep.", "value."}; }

Tensor TavpModel::patch_features(const RenderedView& view) const {
  const int64_t g = grid();
  const int64_t stride = cfg_.patch_stride;
  Tensor out({g * g, 5});
  for (int64_t gy = 0; gy < g; ++gy) {
    const int64_t y0 = gy * stride;
    const int64_t y1 = std::min<int64_t>(y0 + stride, view.height);
    for (int64_t gx = 0; gx < g; ++gx) {
      const int64_t x0 = gx * stride;
      const int64_t x1 = std::min<int64_t>(x0 + stride, view.width);
      double r = 0.0, gc = 0.0, b = 0.0;
      int64_t n = 0;
      for (int64_t y = y0; y < y1; ++y) {
        for (int64_t x = x0; x < x1; ++x) {
          const size_t i = static_cast<size_t>(y * view.width + x);
          r += view.rgb[3 * i];
          gc += view.rgb[3 * i + 1];
          b += view.rgb[3 * i + 2];
          ++n;
        }
      }
      const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
      double* row = &out.data[static_cast<size_t>((gy * g + gx) * 5)];
      row[0] = r * inv;
      row[1] = gc * inv;
      row[2] = b * inv;
      row[3] = (static_cast<double>(x0 + x1 - 1) / 2.0) / std::max(1, view.width - 1);
      row[4] = (static_cast<double>(y0 + y1 - 1) / 2.0) / std::max(1, view.height - 1);
    }
  }
  return out;
}

std::vector<CameraPose5> TavpModel::canonical_poses() const {
  const double r = r_mid();
  CameraPose5 front{kPi / 2.0, 1.5 * kPi, r, 0.0, 0.0};
  CameraPose5 left{kPi / 2.0, kPi, r, 0.0, 0.0};
  CameraPose5 top{0.0, 0.0, r, 0.0, 0.0};  // up hint degenerates, falls back to +y
  return {front, left, top};
}

VirtualCamera TavpModel::fine_camera(const CameraPose5& pose) const {
  const int res = static_cast<int>(cfg_.resolution);
  return make_camera(pose, res, res, cfg_.fov_y_deg, Vec3::Zero());
}

SceneBundle TavpModel::make_bundle(Scene&& scene) const {
  SceneBundle b;
  b.agg = aggregate_scene_cloud(cfg_, scene);
  const int res = static_cast<int>(cfg_.resolution);
  for (const auto& pose : canonical_poses()) {
    VirtualCamera cam = make_camera(pose, res, res, cfg_.fov_y_deg, kCoarseLook);
    const RenderedView r = render_pointcloud(b.agg, cam, static_cast<int>(cfg_.point_radius_px));
    b.canonical_cams.push_back(cam);
    b.canonical_feats.push_back(patch_features(r));
  }
  b.scene = std::move(scene);
  b.scene.cloud = PointCloud{};
  b.scene.fixed_views.clear();
  b.scene.fixed_views.shrink_to_fit();
  return b;
}

PointCloud TavpModel::crop_cloud(const PointCloud& agg, const Vec3& focus) const {
  PointCloud crop = recenter_scale_crop(agg, focus, cfg_.crop_scale, cfg_.half_extent);
  // A focus that fell outside the content leaves nothing to look at; keep
  // the recentered cloud uncropped rather than aborting the episode.
  if (crop.empty())
    crop = recenter_scale_crop(agg, focus, cfg_.crop_scale,
                               std::numeric_limits<double>::infinity());
  return crop;
}

SceneForward TavpModel::scene_forward(Tape& t, ParamStore& p, const ForwardSpec& spec) const {
  if (!spec.bundle) fail(ErrorKind::InvalidInput, "scene_forward needs a bundle");
  const SceneBundle& bundle = *spec.bundle;
  const Scene& scene = bundle.scene;
  const std::string& prefix = spec.prefix;
  const int64_t g = grid();
  const int64_t res = cfg_.resolution;

  SceneForward out;

  // Canonical patch tokens feed both routing and the coarse head.
  std::vector<Tape::Id> canon_tokens;
  std::vector<Tape::Id> canon_view_tokens;
  for (const auto& feats : bundle.canonical_feats) {
    const Tape::Id tok = net::mlp_forward(t, t.input(feats), p, prefix + "enc.patch",
                                          patch_spec(cfg_));
    canon_tokens.push_back(tok);
    canon_view_tokens.push_back(net::mlp_forward(t, t.rows_mean(tok), p, prefix + "enc.view",
                                                 view_proj_spec(cfg_)));
  }
  const Tape::Id tokens_mat = t.reshape(
      t.concat(std::span<const Tape::Id>(canon_view_tokens.data(), canon_view_tokens.size())),
      {static_cast<int64_t>(canon_view_tokens.size()), cfg_.embed_dim});
  out.routing = moe_.forward(t, p, tokens_mat, scene.task_id, prefix);
  const Tape::Id ctx = out.routing.context;

  // Coarse grounding over the canonical world views.
  std::vector<Heatmap> coarse_maps(canon_tokens.size());
  std::vector<Tape::Id> coarse_ce;
  for (size_t v = 0; v < canon_tokens.size(); ++v) {
    const Tape::Id mod = net::film_rows(t, canon_tokens[v], ctx, p, prefix + "head.coarse_film");
    const Tape::Id logits = net::mlp_forward(t, mod, p, prefix + "head.coarse", scorer_spec(cfg_));
    const Tape::Id up = t.reshape(
        t.bilinear_upsample(t.reshape(logits, {g, g}), res, res), {res * res});
    Heatmap& m = coarse_maps[v];
    m.width = static_cast<int>(res);
    m.height = static_cast<int>(res);
    m.values = host_softmax(t.value(up).data);
    m.valid = true;
    if (spec.with_coarse_loss) {
      const Heatmap gt = gt_heatmap(scene.target_pos, bundle.canonical_cams[v], cfg_.sigma_px,
                                    cfg_.trunc_sigmas);
      if (gt.valid)
        coarse_ce.push_back(t.cross_entropy_logits(up, Tensor::from({res * res}, gt.values)));
    }
  }
  if (spec.with_coarse_loss && !coarse_ce.empty())
    out.losses.l_coarse =
        t.mean_of(std::span<const Tape::Id>(coarse_ce.data(), coarse_ce.size()));

  if (spec.oracle_coarse) {
    out.focus = scene.target_pos;
  } else {
    std::vector<Vec3> candidates;
    candidates.reserve(static_cast<size_t>(cfg_.coarse_grid_xy * cfg_.coarse_grid_xy *
                                           cfg_.coarse_grid_z));
    for (int64_t iz = 0; iz < cfg_.coarse_grid_z; ++iz) {
      const double z = kCoarseZLo + (kCoarseZHi - kCoarseZLo) * lattice_frac(iz, cfg_.coarse_grid_z);
      for (int64_t iy = 0; iy < cfg_.coarse_grid_xy; ++iy) {
        const double y = -kCoarseXY + 2.0 * kCoarseXY * lattice_frac(iy, cfg_.coarse_grid_xy);
        for (int64_t ix = 0; ix < cfg_.coarse_grid_xy; ++ix) {
          const double x = -kCoarseXY + 2.0 * kCoarseXY * lattice_frac(ix, cfg_.coarse_grid_xy);
          candidates.emplace_back(x, y, z);
        }
      }
    }
    const size_t best = score_3d_candidates(candidates, coarse_maps, bundle.canonical_cams);
    out.focus = candidates[best];
  }

  out.frame = CropFrame{out.focus, cfg_.crop_scale};
  const PointCloud crop = crop_cloud(bundle.agg, out.focus);
  const Vec3 local_target = out.frame.to_local(scene.target_pos);

  // Fine views: render the crop from every requested pose.
  std::vector<Tape::Id> heat_ce;
  std::vector<Tape::Id> valid_view_tokens;
  out.prediction.view_heatmaps.resize(spec.fine_poses.size());
  std::vector<Heatmap> position_maps(spec.fine_poses.size());
  for (size_t k = 0; k < spec.fine_poses.size(); ++k) {
    const VirtualCamera cam = fine_camera(spec.fine_poses[k]);
    out.fine_cams.push_back(cam);
    const RenderedView render = render_pointcloud(crop, cam, static_cast<int>(cfg_.point_radius_px));
    const Heatmap gt = gt_heatmap(local_target, cam, cfg_.sigma_px, cfg_.trunc_sigmas);
    out.gt_maps.push_back(gt);
    out.view_valid.push_back(render.valid && gt.valid);
    if (!render.valid) continue;

    const Tape::Id tok = net::mlp_forward(t, t.input(patch_features(render)), p,
                                          prefix + "enc.patch", patch_spec(cfg_));
    valid_view_tokens.push_back(net::mlp_forward(t, t.rows_mean(tok), p, prefix + "enc.view",
                                                 view_proj_spec(cfg_)));
    const Tape::Id mod = net::film_rows(t, tok, ctx, p, prefix + "head.fine_film");
    const Tape::Id logits = net::mlp_forward(t, mod, p, prefix + "head.fine", scorer_spec(cfg_));
    const Tape::Id up = t.reshape(
        t.bilinear_upsample(t.reshape(logits, {g, g}), res, res), {res * res});

    Heatmap& m = out.prediction.view_heatmaps[k];
    m.width = static_cast<int>(res);
    m.height = static_cast<int>(res);
    m.values = host_softmax(t.value(up).data);
    m.valid = true;
    position_maps[k] = m;
    if (gt.valid)
      heat_ce.push_back(t.cross_entropy_logits(up, Tensor::from({res * res}, gt.values)));
  }
  if (heat_ce.empty())
    fail(ErrorKind::NoSignal, "no fine view produced a usable ground-truth heatmap");
  out.losses.l_hf = t.mean_of(std::span<const Tape::Id>(heat_ce.data(), heat_ce.size()));

  // Action heads on the routed context plus the mean fine view token.
  const Tape::Id tok_mat = t.reshape(
      t.concat(std::span<const Tape::Id>(valid_view_tokens.data(), valid_view_tokens.size())),
      {static_cast<int64_t>(valid_view_tokens.size()), cfg_.embed_dim});
  const Tape::Id head_in = t.concat(std::array<Tape::Id, 2>{ctx, t.rows_mean(tok_mat)});
  const Tape::Id rot_logits =
      net::mlp_forward(t, head_in, p, prefix + "head.rot", head_spec(cfg_, 3 * kRotationBins));
  const Tape::Id gri_logit =
      net::mlp_forward(t, head_in, p, prefix + "head.gri", head_spec(cfg_, 1));
  const Tape::Id col_logit =
      net::mlp_forward(t, head_in, p, prefix + "head.col", head_spec(cfg_, 1));

  std::array<Tape::Id, 3> rot_ce;
  for (int a = 0; a < 3; ++a) {
    const Tape::Id part = t.slice(rot_logits, a * kRotationBins, kRotationBins);
    rot_ce[a] = t.cross_entropy_logits(
        part, one_hot(kRotationBins, scene.gt_rotation_bins[static_cast<size_t>(a)]));
    out.prediction.rotation_bins[static_cast<size_t>(a)] = host_softmax(t.value(part).data);
  }
  out.losses.l_rot = t.mean_of(std::span<const Tape::Id>(rot_ce.data(), 3));
  out.losses.l_gri = t.bce_logit(gri_logit, static_cast<double>(scene.gt_gripper));
  out.losses.l_col = t.bce_logit(col_logit, static_cast<double>(scene.gt_collision));
  out.prediction.gripper_prob = sigmoid(t.value(gri_logit).data[0]);
  out.prediction.collision_prob = sigmoid(t.value(col_logit).data[0]);

  out.losses.total = t.add(t.add(out.losses.l_hf, out.losses.l_rot),
                           t.add(out.losses.l_gri, out.losses.l_col));
  if (out.losses.l_coarse >= 0) out.losses.total = t.add(out.losses.total, out.losses.l_coarse);

  // Triangulated position over a fine lattice in crop coordinates.
  {
    std::vector<Vec3> candidates;
    const double b = cfg_.half_extent;
    candidates.reserve(static_cast<size_t>(cfg_.fine_grid * cfg_.fine_grid * cfg_.fine_grid));
    for (int64_t iz = 0; iz < cfg_.fine_grid; ++iz)
      for (int64_t iy = 0; iy < cfg_.fine_grid; ++iy)
        for (int64_t ix = 0; ix < cfg_.fine_grid; ++ix)
          candidates.emplace_back(-b + 2.0 * b * lattice_frac(ix, cfg_.fine_grid),
                                  -b + 2.0 * b * lattice_frac(iy, cfg_.fine_grid),
                                  -b + 2.0 * b * lattice_frac(iz, cfg_.fine_grid));
    const size_t best = score_3d_candidates(candidates, position_maps, out.fine_cams);
    out.prediction.position = out.frame.to_world(candidates[best]);
  }
  return out;
}

PolicyOut TavpModel::policy_forward(Tape& t, ParamStore& p, const Tensor& points) const {
  if (points.shape.size() != 2 || points.shape[1] != 6)
    fail(ErrorKind::ShapeMismatch, "policy input must be [n,6]");
  const Tape::Id per_point = net::mlp_forward(t, t.input(points), p, "mvep.pt",
                                              {{6, cfg_.mvep_hidden1, cfg_.mvep_hidden2}, true});
  const Tape::Id pooled = t.rows_max(per_point);
  const Tape::Id trunk = net::mlp_forward(t, pooled, p, "mvep.emb",
                                          {{cfg_.mvep_hidden2, cfg_.mvep_embed}, true});
  const Tape::Id head = net::mlp_forward(t, trunk, p, "mvep.head",
                                         {{cfg_.mvep_embed, cfg_.k * 10}, false});
  PolicyOut out;
  out.mu = t.slice(head, 0, cfg_.k * 5);
  out.log_sigma = t.clamp(t.slice(head, cfg_.k * 5, cfg_.k * 5), net::kLogSigmaMin,
                          net::kLogSigmaMax);
  out.value = net::mlp_forward(t, trunk, p, "value.head",
                               {{cfg_.mvep_embed, cfg_.value_hidden, 1}, false});
  return out;
}

Tensor TavpModel::policy_points(const PointCloud& crop, Rng& rng) const {
  const PointCloud sample = downsample(crop, static_cast<size_t>(cfg_.n_points), rng);
  Tensor out({cfg_.n_points, 6});
  for (int64_t i = 0; i < cfg_.n_points; ++i) {
    const auto& pt = sample.points[static_cast<size_t>(i)];
    const auto& cl = sample.colors[static_cast<size_t>(i)];
    double* row = &out.data[static_cast<size_t>(i * 6)];
    row[0] = pt.x();
    row[1] = pt.y();
    row[2] = pt.z();
    row[3] = cl.x();
    row[4] = cl.y();
    row[5] = cl.z();
  }
  return out;
}

LossVector action_losses(const ActionPrediction& pred, const Scene& scene,
                         const std::vector<Heatmap>& gt_maps, double prob_eps) {
  LossVector out;
  auto logp = [&](double p) { return std::log(std::clamp(p, prob_eps, 1.0)); };

  int n_views = 0;
  double hf = 0.0;
  for (size_t k = 0; k < gt_maps.size() && k < pred.view_heatmaps.size(); ++k) {
    const Heatmap& gt = gt_maps[k];
    const Heatmap& pm = pred.view_heatmaps[k];
    if (!gt.valid || !pm.valid) continue;
    double ce = 0.0;
    for (size_t i = 0; i < gt.values.size(); ++i)
      if (gt.values[i] > 0.0) ce -= gt.values[i] * logp(pm.values[i]);
    hf += ce;
    ++n_views;
  }
  if (n_views == 0) fail(ErrorKind::NoSignal, "no valid view/ground-truth heatmap pair");
  out.l_hf = hf / n_views;

  double rot = 0.0;
  for (int a = 0; a < 3; ++a)
    rot -= logp(pred.rotation_bins[static_cast<size_t>(a)]
                    [static_cast<size_t>(scene.gt_rotation_bins[static_cast<size_t>(a)])]);
  out.l_rot = rot / 3.0;

  out.l_gri = scene.gt_gripper ? -logp(pred.gripper_prob) : -logp(1.0 - pred.gripper_prob);
  out.l_col = scene.gt_collision ? -logp(pred.collision_prob) : -logp(1.0 - pred.collision_prob);
  return out;
}

LossVector loss_values(const Tape& t, const SceneLosses& l) {
  LossVector v;
  v.l_hf = t.value(l.l_hf).data[0];
  v.l_rot = t.value(l.l_rot).data[0];
  v.l_gri = t.value(l.l_gri).data[0];
  v.l_col = t.value(l.l_col).data[0];
  return v;
}

bool action_success(const ActionPrediction& pred, const Scene& scene, double tau) {
  if ((pred.position - scene.target_pos).norm() > tau) return false;
  for (int a = 0; a < 3; ++a) {
    const auto& dist = pred.rotation_bins[static_cast<size_t>(a)];
    const int64_t arg = static_cast<int64_t>(
        std::max_element(dist.begin(), dist.end()) - dist.begin());
    if (arg != scene.gt_rotation_bins[static_cast<size_t>(a)]) return false;
  }
  if ((pred.gripper_prob > 0.5) != (scene.gt_gripper == 1)) return false;
  if ((pred.collision_prob > 0.5) != (scene.gt_collision == 1)) return false;
  return true;
}

}  // namespace tavp
