#include "tavp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace tavp {

using net::ParamStore;
using net::Tape;
using net::Tensor;

namespace {

// Everything stage 2 must leave untouched.
std::vector<std::string> non_policy_prefixes() {
  return {"enc.", "moe.", "head.", "instr.", "shadow."};
}

SceneBundle bundle_for(const TavpModel& model, uint64_t seed, const char* label, int64_t i) {
  const RunConfig& cfg = model.config();
  const int64_t task = i % cfg.n_tasks();
  return model.make_bundle(
      generate_scene(cfg, task, derive_seed(seed, label, static_cast<uint64_t>(i))));
}

std::vector<CameraPose5> policy_mean_poses(const TavpModel& model, ParamStore& p,
                                           const Tensor& points) {
  Tape t;
  const PolicyOut po = model.policy_forward(t, p, points);
  const Tensor& mu = t.value(po.mu);
  const RunConfig& cfg = model.config();
  const RadialBounds bounds{cfg.r_min, cfg.r_max};
  std::vector<CameraPose5> poses;
  for (int64_t k = 0; k < cfg.k; ++k) {
    std::array<double, 5> raw;
    for (int i = 0; i < 5; ++i)
      raw[static_cast<size_t>(i)] = mu.data[static_cast<size_t>(5 * k + i)];
    CameraPose5 pose = squash_pose(raw, bounds, cfg.theta_cap);
    if (cfg.azimuth_stratify) pose = stratify_azimuth(pose, k, cfg.k);
    poses.push_back(pose);
  }
  return poses;
}

void check_arch(const CheckpointMeta& meta, const RunConfig& cfg, const std::string& path) {
  if (meta.arch != arch_fingerprint(cfg))
    fail(ErrorKind::CheckpointShape,
         "checkpoint " + path + " was trained with a different architecture");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Shared supervised loop body for stages 1 and 3. Returns the last batch loss.
struct SupervisedEpochLog {
  double loss = 0.0, hf = 0.0, rot = 0.0, gri = 0.0, col = 0.0, coarse = 0.0;
  int64_t used = 0, skipped = 0;
};

}  // namespace

std::vector<SceneBundle> build_train_bundles(const TavpModel& model, uint64_t seed,
                                             int64_t count) {
  std::vector<SceneBundle> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) out.push_back(bundle_for(model, seed, "train", i));
  return out;
}

std::vector<SceneBundle> build_eval_bundles(const TavpModel& model, uint64_t seed,
                                            int64_t count) {
  std::vector<SceneBundle> out;
  out.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) out.push_back(bundle_for(model, seed, "eval", i));
  return out;
}

StageResult run_stage1(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                       MetricsSink& sink) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TavpModel model(cfg);
  ParamStore p;
  p.set_seed(derive_seed(seed, "params"));
  model.ensure_perception(p);
  model.ensure_policy(p);  // untouched here; keeps the manifest constant across stages

  std::vector<SceneBundle> bundles = build_train_bundles(model, seed, cfg.train_scenes);
  const std::vector<std::string> names = p.names_with_prefix(TavpModel::perception_prefixes());
  net::Adam opt;
  const int64_t warmup =
      static_cast<int64_t>(std::llround(cfg.stage1_warmup_frac * cfg.stage1_steps));

  double last_loss = 0.0;
  for (int64_t step = 0; step < cfg.stage1_steps; ++step) {
    Tape t;
    std::vector<Tape::Id> totals;
    SupervisedEpochLog log;
    for (int64_t j = 0; j < cfg.stage1_batch; ++j) {
      const size_t idx =
          static_cast<size_t>((step * cfg.stage1_batch + j) % cfg.train_scenes);
      ForwardSpec spec;
      spec.bundle = &bundles[idx];
      spec.fine_poses = model.canonical_poses();
      spec.oracle_coarse = step < warmup;
      spec.with_coarse_loss = true;
      SceneForward out;
      try {
        out = model.scene_forward(t, p, spec);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoSignal) throw;
        ++log.skipped;
        continue;
      }
      totals.push_back(out.losses.total);
      const LossVector v = loss_values(t, out.losses);
      log.hf += v.l_hf;
      log.rot += v.l_rot;
      log.gri += v.l_gri;
      log.col += v.l_col;
      if (out.losses.l_coarse >= 0) log.coarse += t.value(out.losses.l_coarse).data[0];
      ++log.used;
      sink.log_routing(step, "stage1", out.routing.task, out.routing.gate, out.routing.experts,
                       out.routing.weights);
    }
    if (totals.empty())
      fail(ErrorKind::NoSignal, "stage1 step " + std::to_string(step) + " had no usable scene");

    const Tape::Id loss = t.mean_of(totals);
    const double lv = t.value(loss).data[0];
    if (!std::isfinite(lv))
      fail(ErrorKind::Divergence, "stage1 loss diverged at step " + std::to_string(step));
    p.zero_grads();
    t.backward(loss);
    t.accumulate_param_grads();
    opt.step(p, names, net::scheduled_lr(cfg.stage1_lr, cfg.lr_schedule, step, cfg.stage1_steps));

    const double n = static_cast<double>(log.used);
    sink.log(step, "stage1", "loss", lv);
    sink.log(step, "stage1", "loss_hf", log.hf / n);
    sink.log(step, "stage1", "loss_rot", log.rot / n);
    sink.log(step, "stage1", "loss_gri", log.gri / n);
    sink.log(step, "stage1", "loss_col", log.col / n);
    sink.log(step, "stage1", "loss_coarse", log.coarse / n);
    sink.log(step, "stage1", "skipped_scenes", static_cast<double>(log.skipped));
    last_loss = lv;
  }

  // Frozen reference for the stage-2 pseudo-environment.
  p.copy_prefix("enc.", "shadow.enc.");
  p.copy_prefix("moe.", "shadow.moe.");
  p.copy_prefix("head.", "shadow.head.");

  StageResult res;
  res.checkpoint_path = out_dir + "/stage1.ckpt";
  CheckpointMeta meta;
  meta.stage = 1;
  meta.arch = arch_fingerprint(cfg);
  save_checkpoint(res.checkpoint_path, meta, p);
  res.store_hash = p.content_hash();
  res.final_metric = last_loss;
  sink.flush();
  return res;
}

StageResult run_stage2(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                       const std::string& stage1_ckpt, MetricsSink& sink) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TavpModel model(cfg);
  ParamStore p;
  const CheckpointMeta parent = load_checkpoint(stage1_ckpt, p);
  if (parent.stage != 1)
    fail(ErrorKind::InvalidInput,
         "stage2 expects a stage-1 checkpoint, got stage " + std::to_string(parent.stage));
  check_arch(parent, cfg, stage1_ckpt);
  const uint64_t h1 = p.content_hash();
  const uint64_t frozen_before = p.content_hash(non_policy_prefixes());

  std::vector<SceneBundle> bundles = build_train_bundles(model, seed, cfg.train_scenes);
  std::vector<SceneContext> contexts;
  contexts.reserve(bundles.size());
  for (size_t i = 0; i < bundles.size(); ++i)
    contexts.push_back(make_scene_context(model, p, bundles[i], static_cast<int64_t>(i)));

  std::array<WelfordState, 3> norms;
  net::Adam opt;
  Rng rng(derive_seed(seed, "stage2"));
  int64_t cursor = 0;
  double final_reward = 0.0;
  for (int64_t update = 0; update < cfg.stage2_updates; ++update) {
    std::vector<Transition> buffer;
    int64_t attempts = 0, skipped = 0;
    while (static_cast<int64_t>(buffer.size()) < cfg.batch_size &&
           attempts < 4 * cfg.batch_size) {
      const size_t i = static_cast<size_t>(cursor) % bundles.size();
      ++cursor;
      ++attempts;
      try {
        buffer.push_back(pseudo_env_step(model, p, bundles[i], contexts[i], norms, rng));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoSignal) throw;
        ++skipped;
      }
    }
    if (buffer.empty())
      fail(ErrorKind::NoSignal, "stage2 update " + std::to_string(update) +
                                    " collected no usable transition");

    const double lr = net::scheduled_lr(cfg.lr, cfg.lr_schedule, update, cfg.stage2_updates);
    const PpoStats stats = ppo_update(model, p, opt, buffer, cfg, lr);

    double reward = 0, r0 = 0, r1 = 0, r2 = 0, z0 = 0, z1 = 0, z2 = 0;
    for (const Transition& tr : buffer) {
      reward += tr.reward;
      r0 += tr.components.r0;
      r1 += tr.components.r1;
      r2 += tr.components.r2;
      z0 += tr.components.z0;
      z1 += tr.components.z1;
      z2 += tr.components.z2;
    }
    const double n = static_cast<double>(buffer.size());
    sink.log(update, "stage2", "reward", reward / n);
    sink.log(update, "stage2", "reward_r0_raw", r0 / n);
    sink.log(update, "stage2", "reward_r1_raw", r1 / n);
    sink.log(update, "stage2", "reward_r2_raw", r2 / n);
    sink.log(update, "stage2", "reward_r0_norm", z0 / n);
    sink.log(update, "stage2", "reward_r1_norm", z1 / n);
    sink.log(update, "stage2", "reward_r2_norm", z2 / n);
    sink.log(update, "stage2", "clip_fraction", stats.clip_fraction);
    sink.log(update, "stage2", "mean_ratio", stats.mean_ratio);
    sink.log(update, "stage2", "policy_loss", stats.policy_loss);
    sink.log(update, "stage2", "value_loss", stats.value_loss);
    sink.log(update, "stage2", "ppo_loss", stats.total_loss);
    sink.log(update, "stage2", "skipped_rollouts", static_cast<double>(skipped));
    final_reward = reward / n;
  }

  if (p.content_hash(non_policy_prefixes()) != frozen_before)
    fail(ErrorKind::FreezeViolation, "stage 2 modified parameters outside mvep./value.");

  StageResult res;
  res.checkpoint_path = out_dir + "/stage2.ckpt";
  CheckpointMeta meta;
  meta.stage = 2;
  meta.arch = arch_fingerprint(cfg);
  meta.parents = {h1};
  save_checkpoint(res.checkpoint_path, meta, p);
  res.store_hash = p.content_hash();
  res.final_metric = final_reward;
  sink.flush();
  return res;
}

StageResult run_stage3(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                       const std::string& stage2_ckpt, MetricsSink& sink) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TavpModel model(cfg);
  ParamStore p;
  const CheckpointMeta parent = load_checkpoint(stage2_ckpt, p);
  if (parent.stage != 2)
    fail(ErrorKind::InvalidInput,
         "stage3 expects a stage-2 checkpoint, got stage " + std::to_string(parent.stage));
  check_arch(parent, cfg, stage2_ckpt);
  const uint64_t h2 = p.content_hash();
  const uint64_t policy_before = p.content_hash(TavpModel::policy_prefixes());

  std::vector<SceneBundle> bundles = build_train_bundles(model, seed, cfg.train_scenes);
  // The policy is frozen, so each scene's dynamic views are fixed for the
  // whole stage: the mean poses over the crop the stage-2 perception chose.
  std::vector<std::vector<CameraPose5>> poses;
  poses.reserve(bundles.size());
  for (size_t i = 0; i < bundles.size(); ++i) {
    const SceneContext ctx = make_scene_context(model, p, bundles[i], static_cast<int64_t>(i));
    poses.push_back(policy_mean_poses(model, p, ctx.points));
  }

  const std::vector<std::string> names = p.names_with_prefix(TavpModel::perception_prefixes());
  net::Adam opt;
  double last_loss = 0.0;
  for (int64_t step = 0; step < cfg.stage3_steps; ++step) {
    Tape t;
    std::vector<Tape::Id> totals;
    SupervisedEpochLog log;
    for (int64_t j = 0; j < cfg.stage1_batch; ++j) {
      const size_t idx =
          static_cast<size_t>((step * cfg.stage1_batch + j) % cfg.train_scenes);
      ForwardSpec spec;
      spec.bundle = &bundles[idx];
      spec.fine_poses = poses[idx];
      spec.with_coarse_loss = true;
      SceneForward out;
      try {
        out = model.scene_forward(t, p, spec);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoSignal) throw;
        ++log.skipped;
        continue;
      }
      totals.push_back(out.losses.total);
      const LossVector v = loss_values(t, out.losses);
      log.hf += v.l_hf;
      log.rot += v.l_rot;
      log.gri += v.l_gri;
      log.col += v.l_col;
      if (out.losses.l_coarse >= 0) log.coarse += t.value(out.losses.l_coarse).data[0];
      ++log.used;
      sink.log_routing(step, "stage3", out.routing.task, out.routing.gate, out.routing.experts,
                       out.routing.weights);
    }
    if (totals.empty())
      fail(ErrorKind::NoSignal, "stage3 step " + std::to_string(step) + " had no usable scene");

    const Tape::Id loss = t.mean_of(totals);
    const double lv = t.value(loss).data[0];
    if (!std::isfinite(lv))
      fail(ErrorKind::Divergence, "stage3 loss diverged at step " + std::to_string(step));
    p.zero_grads();
    t.backward(loss);
    t.accumulate_param_grads();
    opt.step(p, names, net::scheduled_lr(cfg.stage3_lr, cfg.lr_schedule, step, cfg.stage3_steps));

    const double n = static_cast<double>(log.used);
    sink.log(step, "stage3", "loss", lv);
    sink.log(step, "stage3", "loss_hf", log.hf / n);
    sink.log(step, "stage3", "loss_rot", log.rot / n);
    sink.log(step, "stage3", "loss_gri", log.gri / n);
    sink.log(step, "stage3", "loss_col", log.col / n);
    sink.log(step, "stage3", "loss_coarse", log.coarse / n);
    sink.log(step, "stage3", "skipped_scenes", static_cast<double>(log.skipped));
    last_loss = lv;
  }

  if (p.content_hash(TavpModel::policy_prefixes()) != policy_before)
    fail(ErrorKind::FreezeViolation, "stage 3 modified mvep./value. parameters");

  StageResult res;
  res.checkpoint_path = out_dir + "/stage3.ckpt";
  CheckpointMeta meta;
  meta.stage = 3;
  meta.arch = arch_fingerprint(cfg);
  meta.parents = parent.parents;
  meta.parents.push_back(h2);
  save_checkpoint(res.checkpoint_path, meta, p);
  res.store_hash = p.content_hash();
  res.final_metric = last_loss;
  sink.flush();
  return res;
}

EvalMode eval_mode_from(const std::string& name) {
  if (name == "fixed") return EvalMode::Fixed;
  if (name == "dynamic") return EvalMode::Dynamic;
  if (name == "random") return EvalMode::Random;
  fail(ErrorKind::InvalidInput, "unknown eval mode '" + name + "' (fixed|dynamic|random)");
}

std::string eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::Fixed: return "fixed";
    case EvalMode::Dynamic: return "dynamic";
    default: return "random";
  }
}

EvalReport run_eval(const RunConfig& cfg, uint64_t seed, const std::string& out_dir,
                    const std::string& ckpt, EvalMode mode, MetricsSink& sink) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  TavpModel model(cfg);
  ParamStore p;
  const CheckpointMeta meta = load_checkpoint(ckpt, p);
  check_arch(meta, cfg, ckpt);
  model.ensure_perception(p);
  model.ensure_policy(p);

  const std::vector<SceneBundle> bundles = build_eval_bundles(model, seed, cfg.eval_scenes);
  Rng random_rng(derive_seed(seed, "eval_random"));

  EvalReport rep;
  rep.mode = eval_mode_name(mode);
  rep.scenes = static_cast<int64_t>(bundles.size());
  const int64_t n_tasks = cfg.n_tasks();
  rep.per_task_success.assign(static_cast<size_t>(n_tasks), 0.0);
  rep.per_task_count.assign(static_cast<size_t>(n_tasks), 0);

  double margin_sum = 0.0, diversity_sum = 0.0, radius_sum = 0.0;
  int64_t forward_ok = 0;
  double reveal_angle_sum = 0.0;
  int64_t reveal_total = 0, reveal_hits = 0;

  for (size_t i = 0; i < bundles.size(); ++i) {
    const SceneBundle& b = bundles[i];
    const size_t task = static_cast<size_t>(b.scene.task_id);
    ++rep.per_task_count[task];

    // Draw random poses unconditionally so the stream stays aligned with the
    // scene index regardless of per-scene outcomes.
    std::vector<CameraPose5> random_poses;
    for (int64_t k = 0; k < cfg.k; ++k)
      random_poses.push_back(CameraPose5{random_rng.uniform(0.0, cfg.theta_cap),
                                         random_rng.uniform(0.0, kTwoPi),
                                         random_rng.uniform(cfg.r_min, cfg.r_max),
                                         random_rng.uniform(0.0, kPi),
                                         random_rng.uniform(0.0, kTwoPi)});

    SceneContext ctx;
    std::vector<CameraPose5> poses;
    try {
      ctx = make_scene_context(model, p, b, static_cast<int64_t>(i));
      switch (mode) {
        case EvalMode::Fixed: poses = model.canonical_poses(); break;
        case EvalMode::Dynamic: poses = policy_mean_poses(model, p, ctx.points); break;
        case EvalMode::Random: poses = random_poses; break;
      }

      Tape t;
      ForwardSpec spec;
      spec.bundle = &b;
      spec.fine_poses = poses;
      spec.oracle_coarse = cfg.oracle_coarse || cfg.eval_oracle != "none";
      const SceneForward out = model.scene_forward(t, p, spec);

      ActionPrediction pred = out.prediction;
      if (cfg.eval_oracle == "full") {
        pred.position = b.scene.target_pos;
        for (int a = 0; a < 3; ++a) {
          auto& dist = pred.rotation_bins[static_cast<size_t>(a)];
          dist.assign(kRotationBins, 0.0);
          dist[static_cast<size_t>(b.scene.gt_rotation_bins[static_cast<size_t>(a)])] = 1.0;
        }
        pred.gripper_prob = b.scene.gt_gripper ? 1.0 : 0.0;
        pred.collision_prob = b.scene.gt_collision ? 1.0 : 0.0;
      }
      if (action_success(pred, b.scene, cfg.success_tau)) rep.per_task_success[task] += 1.0;

      margin_sum += reward_r0(ctx.ref_losses, loss_values(t, out.losses));
      std::vector<Vec3> centers;
      double radius = 0.0;
      for (const auto& cam : out.fine_cams) {
        centers.push_back(cam.extrinsics.center);
        radius += cam.extrinsics.center.norm();
      }
      diversity_sum += reward_r2(centers);
      radius_sum += radius / static_cast<double>(centers.size());
      ++forward_ok;

      if (b.scene.revealing_dir.norm() > 0.0) {
        double best = 180.0;
        for (const Vec3& c : centers) {
          const double cosv =
              std::clamp(c.normalized().dot(b.scene.revealing_dir), -1.0, 1.0);
          best = std::min(best, std::acos(cosv) * 180.0 / kPi);
        }
        reveal_angle_sum += best;
        ++reveal_total;
        if (best <= 30.0) ++reveal_hits;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoSignal) throw;
      ++rep.skipped;  // counted as a failure for its task
    }
  }

  double success_sum = 0.0;
  for (size_t task = 0; task < rep.per_task_success.size(); ++task) {
    success_sum += rep.per_task_success[task];
    if (rep.per_task_count[task] > 0)
      rep.per_task_success[task] /= static_cast<double>(rep.per_task_count[task]);
  }
  rep.mean_success = rep.scenes > 0 ? success_sum / static_cast<double>(rep.scenes) : 0.0;
  if (forward_ok > 0) {
    rep.mean_r0_margin = margin_sum / static_cast<double>(forward_ok);
    rep.mean_diversity = diversity_sum / static_cast<double>(forward_ok);
    rep.mean_radius = radius_sum / static_cast<double>(forward_ok);
  }
  if (reveal_total > 0) {
    rep.mean_reveal_angle_deg = reveal_angle_sum / static_cast<double>(reveal_total);
    rep.reveal_within_30deg =
        static_cast<double>(reveal_hits) / static_cast<double>(reveal_total);
  }
  rep.wall_clock_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();

  // Byte-stable artifact: no wall clock, sorted keys.
  nlohmann::json j;
  j["mode"] = rep.mode;
  j["scenes"] = rep.scenes;
  j["skipped"] = rep.skipped;
  j["per_task_success"] = rep.per_task_success;
  j["per_task_count"] = rep.per_task_count;
  j["mean_success"] = rep.mean_success;
  j["mean_r0_margin"] = rep.mean_r0_margin;
  j["mean_diversity"] = rep.mean_diversity;
  j["mean_radius"] = rep.mean_radius;
  j["mean_reveal_angle_deg"] = rep.mean_reveal_angle_deg;
  j["reveal_within_30deg"] = rep.reveal_within_30deg;
  std::ofstream out(out_dir + "/eval_report.json", std::ios::binary);
  out << j.dump(2) << "\n";

  const std::string stage = "eval_" + rep.mode;
  sink.log(0, stage, "mean_success", rep.mean_success);
  sink.log(0, stage, "mean_r0_margin", rep.mean_r0_margin);
  sink.log(0, stage, "mean_diversity", rep.mean_diversity);
  sink.log(0, stage, "reveal_within_30deg", rep.reveal_within_30deg);
  sink.log(0, stage, "skipped_scenes", static_cast<double>(rep.skipped));
  sink.flush();
  return rep;
}

AblationReport run_ablate(const RunConfig& cfg, const std::vector<uint64_t>& seeds,
                          const std::string& out_dir) {
  if (seeds.empty()) fail(ErrorKind::InvalidInput, "ablate needs at least one seed");
  std::filesystem::create_directories(out_dir);
  AblationReport rep;

  for (const bool moe : {true, false}) {
    for (const uint64_t seed : seeds) {
      RunConfig c = cfg;
      c.use_taskmoe = moe;
      const std::string dir =
          out_dir + "/" + (moe ? "moe" : "nomoe") + "_seed" + std::to_string(seed);
      MetricsSink sink(dir);
      const StageResult s1 = run_stage1(c, seed, dir, sink);
      const StageResult s2 = run_stage2(c, seed, dir, s1.checkpoint_path, sink);
      const StageResult s3 = run_stage3(c, seed, dir, s2.checkpoint_path, sink);

      AblationRun run;
      run.seed = seed;
      run.use_taskmoe = moe;
      run.dynamic_success =
          run_eval(c, seed, dir, s3.checkpoint_path, EvalMode::Dynamic, sink).mean_success;
      run.random_success =
          run_eval(c, seed, dir, s3.checkpoint_path, EvalMode::Random, sink).mean_success;
      run.fixed_success =
          run_eval(c, seed, dir, s3.checkpoint_path, EvalMode::Fixed, sink).mean_success;
      rep.runs.push_back(run);
    }
  }

  std::vector<double> dyn_moe, rand_moe, dyn_plain;
  for (const AblationRun& run : rep.runs) {
    if (run.use_taskmoe) {
      dyn_moe.push_back(run.dynamic_success);
      rand_moe.push_back(run.random_success);
    } else {
      dyn_plain.push_back(run.dynamic_success);
    }
  }
  rep.median_dynamic_with_moe = median(dyn_moe);
  rep.median_random_with_moe = median(rand_moe);
  rep.median_dynamic_without_moe = median(dyn_plain);
  rep.dynamic_margin = rep.median_dynamic_with_moe - rep.median_random_with_moe;
  rep.moe_margin = rep.median_dynamic_with_moe - rep.median_dynamic_without_moe;

  nlohmann::json j;
  j["median_dynamic_with_moe"] = rep.median_dynamic_with_moe;
  j["median_random_with_moe"] = rep.median_random_with_moe;
  j["median_dynamic_without_moe"] = rep.median_dynamic_without_moe;
  j["dynamic_margin"] = rep.dynamic_margin;
  j["moe_margin"] = rep.moe_margin;
  j["runs"] = nlohmann::json::array();
  for (const AblationRun& run : rep.runs) {
    nlohmann::json r;
    r["seed"] = run.seed;
    r["use_taskmoe"] = run.use_taskmoe;
    r["dynamic_success"] = run.dynamic_success;
    r["random_success"] = run.random_success;
    r["fixed_success"] = run.fixed_success;
    j["runs"].push_back(r);
  }
  std::ofstream out(out_dir + "/ablate_report.json", std::ios::binary);
  out << j.dump(2) << "\n";
  return rep;
}

}  // namespace tavp
