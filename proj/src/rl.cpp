#include "tavp/rl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tavp {

using net::Tape;
using net::Tensor;

void WelfordState::update(double x) {
  ++count;
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

double WelfordState::variance() const {
  return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
}

double WelfordState::stddev() const { return std::sqrt(variance()); }

double welford_update_normalize(WelfordState& s, double x) {
  s.update(x);
  if (s.count < 2) return 0.0;
  return (x - s.mean) / std::max(s.stddev(), 1e-8);
}

double reward_r0(const LossVector& reference, const LossVector& tavp) {
  const auto a = reference.as_array();
  const auto b = tavp.as_array();
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] - b[i];
  return acc / static_cast<double>(a.size());
}

double reward_r1(const std::vector<Heatmap>& maps) {
  if (maps.empty()) fail(ErrorKind::InvalidInput, "reward_r1 needs at least one heatmap");
  size_t fallback_pixels = 0;
  for (const Heatmap& m : maps)
    if (m.valid) fallback_pixels = std::max(fallback_pixels, m.values.size());
  if (fallback_pixels == 0) fail(ErrorKind::NoSignal, "reward_r1 saw no valid heatmap");

  double acc = 0.0;
  for (const Heatmap& m : maps) {
    if (!m.valid) {
      acc += std::log(static_cast<double>(fallback_pixels));
      continue;
    }
    double h = 0.0;
    for (double p : m.values)
      if (p > 0.0) h -= p * std::log(p);
    acc += h;
  }
  return -acc / static_cast<double>(maps.size());
}

double reward_r2(const std::vector<Vec3>& positions) {
  const size_t k = positions.size();
  if (k < 2) fail(ErrorKind::InvalidInput, "reward_r2 needs at least two positions");
  double acc = 0.0;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double ni = positions[i].norm();
      const double nj = positions[j].norm();
      const double c = (ni > 0.0 && nj > 0.0) ? positions[i].dot(positions[j]) / (ni * nj) : 0.0;
      acc += 1.0 - c;
    }
  return acc / static_cast<double>(k * (k - 1));
}

RewardComponents aggregate_reward(double r0, double r1, double r2,
                                  const std::array<double, 3>& weights,
                                  std::array<WelfordState, 3>& norms) {
  RewardComponents c;
  c.r0 = r0;
  c.r1 = r1;
  c.r2 = r2;
  c.z0 = welford_update_normalize(norms[0], r0);
  c.z1 = welford_update_normalize(norms[1], r1);
  c.z2 = welford_update_normalize(norms[2], r2);
  c.total = std::clamp(weights[0] * c.z0 + weights[1] * c.z1 + weights[2] * c.z2, -10.0, 10.0);
  return c;
}

namespace {

// Forward pass of the frozen perception over the given fine poses; no
// gradients are taken, the tape only carries values.
struct ProbeResult {
  LossVector losses;
  std::vector<Heatmap> maps;
  std::vector<Vec3> cam_positions;
};

ProbeResult probe(const TavpModel& model, net::ParamStore& p, const SceneBundle& bundle,
                  const std::vector<CameraPose5>& poses, const std::string& prefix) {
  Tape t;
  ForwardSpec spec;
  spec.bundle = &bundle;
  spec.fine_poses = poses;
  spec.oracle_coarse = model.config().oracle_coarse;
  spec.prefix = prefix;
  const SceneForward out = model.scene_forward(t, p, spec);
  ProbeResult r;
  r.losses = loss_values(t, out.losses);
  r.maps = out.prediction.view_heatmaps;
  for (const auto& cam : out.fine_cams) r.cam_positions.push_back(cam.extrinsics.center);
  return r;
}

}  // namespace

SceneContext make_scene_context(const TavpModel& model, net::ParamStore& p,
                                const SceneBundle& bundle, int64_t scene_index,
                                const std::string& prefix) {
  Tape t;
  ForwardSpec spec;
  spec.bundle = &bundle;
  spec.fine_poses = model.canonical_poses();
  spec.oracle_coarse = model.config().oracle_coarse;
  spec.prefix = prefix;
  const SceneForward out = model.scene_forward(t, p, spec);

  SceneContext ctx;
  ctx.scene_index = scene_index;
  ctx.focus = out.focus;
  ctx.ref_losses = loss_values(t, out.losses);
  const PointCloud crop = model.crop_cloud(bundle.agg, out.focus);
  Rng rng(derive_seed(bundle.scene.seed, "policy_points"));
  ctx.points = model.policy_points(crop, rng);
  return ctx;
}

RewardComponents pseudo_env_probe(const TavpModel& model, net::ParamStore& p,
                                  const SceneBundle& bundle, const SceneContext& ctx,
                                  const std::vector<CameraPose5>& poses,
                                  std::array<WelfordState, 3>& norms,
                                  const std::string& prefix) {
  const ProbeResult r = probe(model, p, bundle, poses, prefix);
  const std::array<double, 3> w = {model.config().reward_w0, model.config().reward_w1,
                                   model.config().reward_w2};
  return aggregate_reward(reward_r0(ctx.ref_losses, r.losses), reward_r1(r.maps),
                          reward_r2(r.cam_positions), w, norms);
}

Transition pseudo_env_step(const TavpModel& model, net::ParamStore& p,
                           const SceneBundle& bundle, const SceneContext& ctx,
                           std::array<WelfordState, 3>& norms, Rng& rng,
                           const std::string& prefix) {
  const RunConfig& cfg = model.config();
  const int64_t dims = cfg.k * 5;

  Tape t;
  const PolicyOut po = model.policy_forward(t, p, ctx.points);
  Tensor x({dims});
  {
    const Tensor& mu = t.value(po.mu);
    const Tensor& ls = t.value(po.log_sigma);
    for (int64_t i = 0; i < dims; ++i) {
      const size_t s = static_cast<size_t>(i);
      x.data[s] = mu.data[s] + std::exp(ls.data[s]) * rng.normal();
    }
  }
  const Tape::Id lp = net::gaussian_log_prob(t, po.mu, po.log_sigma, x);

  Transition tr;
  tr.scene_index = ctx.scene_index;
  tr.task_id = bundle.scene.task_id;
  tr.points = ctx.points;
  tr.raw_action = x.data;
  tr.old_log_prob = t.value(lp).data[0];
  tr.old_value = t.value(po.value).data[0];

  const RadialBounds bounds{cfg.r_min, cfg.r_max};
  for (int64_t k = 0; k < cfg.k; ++k) {
    std::array<double, 5> raw;
    for (int i = 0; i < 5; ++i) raw[static_cast<size_t>(i)] = x.data[static_cast<size_t>(5 * k + i)];
    CameraPose5 pose = squash_pose(raw, bounds, cfg.theta_cap);
    if (cfg.azimuth_stratify) pose = stratify_azimuth(pose, k, cfg.k);
    tr.poses.push_back(pose);
  }

  tr.components = pseudo_env_probe(model, p, bundle, ctx, tr.poses, norms, prefix);
  tr.reward = tr.components.total;
  return tr;
}

PpoTerms ppo_loss(Tape& t, net::ParamStore& p, const TavpModel& model,
                  const std::vector<Transition>& buffer, const RunConfig& cfg) {
  if (buffer.empty()) fail(ErrorKind::InvalidInput, "ppo_loss needs a nonempty buffer");
  std::vector<Tape::Id> surrogates, value_errs, entropies;
  PpoTerms terms;
  for (const Transition& tr : buffer) {
    const PolicyOut po = model.policy_forward(t, p, tr.points);
    const Tensor x = Tensor::from({cfg.k * 5}, tr.raw_action);
    const Tape::Id lp = net::gaussian_log_prob(t, po.mu, po.log_sigma, x);
    const Tape::Id ratio = t.exp_op(t.add_const(lp, -tr.old_log_prob));
    terms.ratios.push_back(t.value(ratio).data[0]);
    const double adv = tr.reward - tr.old_value;
    const Tape::Id clipped = t.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    surrogates.push_back(t.minimum(t.scale(ratio, adv), t.scale(clipped, adv)));
    value_errs.push_back(t.square(t.add_const(po.value, -tr.reward)));
    entropies.push_back(net::gaussian_entropy(t, po.log_sigma));
  }
  terms.policy_term = t.neg(t.mean_of(surrogates));
  terms.value_term = t.scale(t.mean_of(value_errs), cfg.value_coef);
  terms.loss = t.add(terms.policy_term, terms.value_term);
  const Tape::Id mean_entropy = t.mean_of(entropies);
  terms.entropy = t.value(mean_entropy).data[0];
  if (cfg.entropy_coef != 0.0)
    terms.loss = t.add(terms.loss, t.scale(mean_entropy, -cfg.entropy_coef));
  return terms;
}

PpoStats ppo_update(const TavpModel& model, net::ParamStore& p, net::Adam& opt,
                    const std::vector<Transition>& buffer, const RunConfig& cfg, double lr) {
  const std::vector<std::string> names = p.names_with_prefix(TavpModel::policy_prefixes());
  PpoStats stats;
  for (int64_t epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    Tape t;
    const PpoTerms terms = ppo_loss(t, p, model, buffer, cfg);
    const double loss = t.value(terms.loss).data[0];
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "ppo loss diverged at epoch " << epoch << ": policy="
         << t.value(terms.policy_term).data[0] << " value=" << t.value(terms.value_term).data[0]
         << " entropy=" << terms.entropy << " buffer=" << buffer.size();
      fail(ErrorKind::Divergence, os.str());
    }

    double ratio_sum = 0.0;
    int64_t clipped = 0;
    double dev = 0.0;
    for (double r : terms.ratios) {
      ratio_sum += r;
      if (std::abs(r - 1.0) > cfg.clip_eps) ++clipped;
      dev = std::max(dev, std::abs(r - 1.0));
    }
    if (epoch == 0) stats.first_epoch_ratio_dev = dev;
    stats.mean_ratio = ratio_sum / static_cast<double>(terms.ratios.size());
    stats.clip_fraction =
        static_cast<double>(clipped) / static_cast<double>(terms.ratios.size());
    stats.policy_loss = t.value(terms.policy_term).data[0];
    stats.value_loss = t.value(terms.value_term).data[0];
    stats.entropy = terms.entropy;
    stats.total_loss = loss;

    p.zero_grads();
    t.backward(terms.loss);
    t.accumulate_param_grads();
    opt.step(p, names, lr);
  }
  return stats;
}

}  // namespace tavp
