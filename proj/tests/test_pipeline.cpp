#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tavp/pipeline.hpp"

using namespace tavp;
using net::ParamStore;
using net::Tape;

namespace {

RunConfig pipe_config() {
  RunConfig c;
  c.resolution = 32;
  c.patch_stride = 8;
  c.fixed_view_resolution = 48;
  c.cloud_keep_points = 1200;
  c.n_points = 64;
  c.embed_dim = 32;
  c.n_experts = 6;
  c.top_k = 2;
  c.patch_feat_dim = 8;
  c.patch_hidden = 8;
  c.head_hidden = 16;
  c.mvep_hidden1 = 16;
  c.mvep_hidden2 = 32;
  c.mvep_embed = 32;
  c.value_hidden = 8;
  c.coarse_grid_xy = 7;
  c.coarse_grid_z = 5;
  c.fine_grid = 7;
  c.train_scenes = 4;
  c.eval_scenes = 4;
  c.stage1_steps = 3;
  c.stage1_batch = 2;
  c.stage1_lr = 1e-3;
  c.stage2_updates = 2;
  c.batch_size = 4;
  c.ppo_epochs = 2;
  c.lr = 1e-3;
  c.stage3_steps = 3;
  c.stage3_lr = 1e-3;
  return c;
}

std::string scratch_dir(const std::string& leaf) {
  const std::string dir = (std::filesystem::temp_directory_path() / "tavp_pipe" / leaf).string();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Values of one metric in file order from metrics.csv.
std::vector<double> metric_series(const std::string& dir, const std::string& stage,
                                  const std::string& metric) {
  std::ifstream in(dir + "/metrics.csv");
  REQUIRE(in.good());
  std::vector<double> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string step, st, m, v;
    std::getline(ss, step, ',');
    std::getline(ss, st, ',');
    std::getline(ss, m, ',');
    std::getline(ss, v, ',');
    if (st == stage && m == metric) out.push_back(std::stod(v));
  }
  return out;
}

double mean_of(const std::vector<double>& v, size_t lo, size_t hi) {
  double s = 0.0;
  for (size_t i = lo; i < hi; ++i) s += v[i];
  return s / static_cast<double>(hi - lo);
}

}  // namespace

TEST_CASE("bundle pools cycle the task roster deterministically") {
  const RunConfig cfg = pipe_config();
  TavpModel model(cfg);
  const auto train = build_train_bundles(model, 7, 2 * cfg.n_tasks());
  for (size_t i = 0; i < train.size(); ++i)
    CHECK(train[i].scene.task_id == static_cast<int64_t>(i) % cfg.n_tasks());

  const auto again = build_train_bundles(model, 7, 2 * cfg.n_tasks());
  REQUIRE(again.size() == train.size());
  for (size_t i = 0; i < train.size(); ++i) {
    CHECK(again[i].scene.seed == train[i].scene.seed);
    REQUIRE(again[i].agg.points.size() == train[i].agg.points.size());
    CHECK(again[i].agg.points[0] == train[i].agg.points[0]);
  }

  // Held-out scenes come from a disjoint seed stream.
  const auto eval = build_eval_bundles(model, 7, cfg.n_tasks());
  for (size_t i = 0; i < eval.size(); ++i) CHECK(eval[i].scene.seed != train[i].scene.seed);
}

TEST_CASE("stage1 overfits a single scene") {
  // Convergence needs per-pixel logits (stride 1) and a sharp ground truth:
  // with a coarser stride the bilinear upsample cannot peak between lattice
  // nodes, and a wide gt Gaussian keeps the cross-entropy floor high. Odd
  // resolution puts the principal point on a pixel center, so the fine views
  // (which look straight at the crop origin) get a near-one-hot target.
  RunConfig cfg = pipe_config();
  cfg.resolution = 33;
  cfg.patch_stride = 1;
  cfg.sigma_px = 0.25;
  cfg.trunc_sigmas = 4.0;
  cfg.patch_hidden = 32;
  cfg.patch_feat_dim = 16;
  cfg.train_scenes = 1;
  cfg.stage1_batch = 1;
  cfg.stage1_steps = 500;
  cfg.stage1_lr = 1e-2;
  cfg.stage1_warmup_frac = 1.0;  // keep the fine crop centred on the target
  const std::string dir = scratch_dir("overfit");
  MetricsSink sink(dir);
  const StageResult res = run_stage1(cfg, 10, dir, sink);

  const std::vector<double> losses = metric_series(dir, "stage1", "loss");
  REQUIRE(losses.size() == 500);
  CHECK(losses.back() < 0.1 * losses.front());
  CHECK(res.final_metric == losses.back());

  // The converged coarse grounding lands on the lattice node next to the
  // target, and the fine position head on the node next to it in the crop.
  TavpModel model(cfg);
  ParamStore p;
  load_checkpoint(res.checkpoint_path, p);
  const SceneBundle bundle = model.make_bundle(generate_scene(cfg, 0, derive_seed(5, "train", 0)));
  ForwardSpec spec;
  spec.bundle = &bundle;
  spec.fine_poses = model.canonical_poses();
  Tape t;
  const SceneForward out = model.scene_forward(t, p, spec);
  const double coarse_step = 2.0 * 0.24 / static_cast<double>(cfg.coarse_grid_xy - 1);
  CHECK((out.focus - bundle.scene.target_pos).norm() <= 2.0 * coarse_step);
  const double fine_step = 2.0 * cfg.half_extent / static_cast<double>(cfg.fine_grid - 1);
  CHECK((out.prediction.position - bundle.scene.target_pos).norm() <= 2.0 * fine_step);
}

TEST_CASE("stage1 writes a reloadable checkpoint and a shadow snapshot") {
  const RunConfig cfg = pipe_config();
  const std::string dir = scratch_dir("stage1");
  MetricsSink sink(dir);
  const StageResult res = run_stage1(cfg, 11, dir, sink);
  CHECK(res.checkpoint_path == dir + "/stage1.ckpt");
  CHECK(std::filesystem::exists(res.checkpoint_path));
  CHECK(std::isfinite(res.final_metric));

  ParamStore p;
  const CheckpointMeta meta = load_checkpoint(res.checkpoint_path, p);
  CHECK(meta.stage == 1);
  CHECK(meta.arch == arch_fingerprint(cfg));
  CHECK(meta.parents.empty());
  CHECK(p.content_hash() == res.store_hash);

  // The shadow copy is the perception exactly as checkpointed.
  for (const std::string& name : p.names_with_prefix({"enc.", "moe.", "head."})) {
    const net::Tensor& live = p.value(name);
    const net::Tensor& shadow = p.value("shadow." + name);
    REQUIRE(live.data.size() == shadow.data.size());
    for (size_t i = 0; i < live.data.size(); ++i) CHECK(live.data[i] == shadow.data[i]);
  }

  // Reload into a fresh store and compare a full forward bit for bit.
  TavpModel model(cfg);
  ParamStore q;
  load_checkpoint(res.checkpoint_path, q);
  const SceneBundle bundle = build_eval_bundles(model, 11, 1).front();
  ForwardSpec spec;
  spec.bundle = &bundle;
  spec.fine_poses = model.canonical_poses();
  spec.with_coarse_loss = true;
  Tape t1, t2;
  const SceneForward a = model.scene_forward(t1, p, spec);
  const SceneForward b = model.scene_forward(t2, q, spec);
  CHECK(t1.value(a.losses.total).data[0] == t2.value(b.losses.total).data[0]);
  CHECK(a.prediction.position == b.prediction.position);

  CHECK(metric_series(dir, "stage1", "loss").size() == static_cast<size_t>(cfg.stage1_steps));
}

TEST_CASE("stage2 moves only the policy parameters and records its parent") {
  const RunConfig cfg = pipe_config();
  const std::string dir = scratch_dir("stage2");
  MetricsSink sink(dir);
  const StageResult s1 = run_stage1(cfg, 13, dir, sink);
  const StageResult s2 = run_stage2(cfg, 13, dir, s1.checkpoint_path, sink);

  ParamStore before, after;
  load_checkpoint(s1.checkpoint_path, before);
  const CheckpointMeta meta = load_checkpoint(s2.checkpoint_path, after);
  CHECK(meta.stage == 2);
  REQUIRE(meta.parents.size() == 1);
  CHECK(meta.parents[0] == s1.store_hash);

  const std::vector<std::string> frozen = {"enc.", "moe.", "head.", "instr.", "shadow."};
  CHECK(before.content_hash(frozen) == after.content_hash(frozen));
  CHECK(before.content_hash(TavpModel::policy_prefixes()) !=
        after.content_hash(TavpModel::policy_prefixes()));

  CHECK(metric_series(dir, "stage2", "reward").size() ==
        static_cast<size_t>(cfg.stage2_updates));
  // Rollout and update share one log-prob expression, so epoch 0 never clips.
  for (double ratio : metric_series(dir, "stage2", "mean_ratio")) CHECK(std::isfinite(ratio));
}

TEST_CASE("three-stage chain freezes the policy in stage3 and records lineage") {
  const RunConfig cfg = pipe_config();
  const std::string dir = scratch_dir("chain");
  MetricsSink sink(dir);
  const StageResult s1 = run_stage1(cfg, 17, dir, sink);
  const StageResult s2 = run_stage2(cfg, 17, dir, s1.checkpoint_path, sink);
  const StageResult s3 = run_stage3(cfg, 17, dir, s2.checkpoint_path, sink);

  ParamStore p2, p3;
  load_checkpoint(s2.checkpoint_path, p2);
  const CheckpointMeta meta = load_checkpoint(s3.checkpoint_path, p3);
  CHECK(meta.stage == 3);
  REQUIRE(meta.parents.size() == 2);
  CHECK(meta.parents[0] == s1.store_hash);
  CHECK(meta.parents[1] == s2.store_hash);

  CHECK(p2.content_hash(TavpModel::policy_prefixes()) ==
        p3.content_hash(TavpModel::policy_prefixes()));
  CHECK(p2.content_hash({"enc.", "moe.", "head."}) != p3.content_hash({"enc.", "moe.", "head."}));
  // The stage-1 shadow rides along untouched.
  CHECK(p2.content_hash({"shadow."}) == p3.content_hash({"shadow."}));
}

TEST_CASE("stage2 reward rises and stage3 improves the held-out loss") {
  // All-occluded roster so viewpoint choice genuinely matters for the reward.
  RunConfig cfg = pipe_config();
  cfg.patch_stride = 4;
  cfg.variants_occluded = 3;
  cfg.variants_clear = 0;
  cfg.variants_two_target = 0;
  cfg.n_gates = 2;
  cfg.train_scenes = 18;
  cfg.eval_scenes = 12;
  cfg.stage1_steps = 60;
  cfg.stage1_batch = 4;
  cfg.stage1_lr = 2e-3;
  cfg.stage2_updates = 16;
  cfg.batch_size = 12;
  cfg.ppo_epochs = 3;
  cfg.lr = 5e-3;
  cfg.stage3_steps = 150;
  cfg.stage3_lr = 2e-3;

  const std::string dir = scratch_dir("learning");
  MetricsSink sink(dir);
  const StageResult s1 = run_stage1(cfg, 37, dir, sink);
  const StageResult s2 = run_stage2(cfg, 37, dir, s1.checkpoint_path, sink);
  const StageResult s3 = run_stage3(cfg, 37, dir, s2.checkpoint_path, sink);

  const std::vector<double> rewards = metric_series(dir, "stage2", "reward");
  REQUIRE(rewards.size() == static_cast<size_t>(cfg.stage2_updates));
  const size_t fifth = rewards.size() / 5;
  CHECK(mean_of(rewards, rewards.size() - fifth, rewards.size()) >
        mean_of(rewards, 0, fifth));

  // Fine-tuning on policy viewpoints must not hurt the held-out loss under
  // the same viewpoint selection.
  TavpModel model(cfg);
  const auto heldout = [&](const std::string& ckpt) {
    ParamStore p;
    load_checkpoint(ckpt, p);
    const auto bundles = build_eval_bundles(model, 37, cfg.eval_scenes);
    const RadialBounds bounds{cfg.r_min, cfg.r_max};
    double sum = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < bundles.size(); ++i) {
      const SceneContext ctx = make_scene_context(model, p, bundles[i], static_cast<int64_t>(i));
      Tape tp;
      const PolicyOut po = model.policy_forward(tp, p, ctx.points);
      std::vector<CameraPose5> poses;
      for (int64_t k = 0; k < cfg.k; ++k) {
        std::array<double, 5> raw;
        for (int j = 0; j < 5; ++j)
          raw[static_cast<size_t>(j)] = tp.value(po.mu).data[static_cast<size_t>(5 * k + j)];
        poses.push_back(squash_pose(raw, bounds, cfg.theta_cap));
      }
      ForwardSpec spec;
      spec.bundle = &bundles[i];
      spec.fine_poses = poses;
      spec.with_coarse_loss = true;
      Tape t;
      try {
        sum += t.value(model.scene_forward(t, p, spec).losses.total).data[0];
        ++n;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoSignal) throw;
      }
    }
    REQUIRE(n > 0);
    return sum / static_cast<double>(n);
  };
  CHECK(heldout(s3.checkpoint_path) <= heldout(s2.checkpoint_path));
}

TEST_CASE("checkpoint stage and architecture are validated on load") {
  const RunConfig cfg = pipe_config();
  const std::string dir = scratch_dir("validate");
  MetricsSink sink(dir);
  const StageResult s1 = run_stage1(cfg, 19, dir, sink);

  CHECK_THROWS_AS(run_stage3(cfg, 19, dir, s1.checkpoint_path, sink), Error);

  RunConfig other = cfg;
  other.embed_dim = 16;
  MetricsSink sink2(scratch_dir("validate2"));
  CHECK_THROWS_AS(run_stage2(other, 19, dir, s1.checkpoint_path, sink2), Error);
}

TEST_CASE("eval mode names round-trip and reject unknown strings") {
  CHECK(eval_mode_from("fixed") == EvalMode::Fixed);
  CHECK(eval_mode_from("dynamic") == EvalMode::Dynamic);
  CHECK(eval_mode_from("random") == EvalMode::Random);
  CHECK(eval_mode_name(EvalMode::Fixed) == "fixed");
  CHECK(eval_mode_name(EvalMode::Dynamic) == "dynamic");
  CHECK(eval_mode_name(EvalMode::Random) == "random");
  CHECK_THROWS_AS(eval_mode_from("oracle"), Error);
}

TEST_CASE("full-oracle evaluation scores every scene as a success") {
  RunConfig cfg = pipe_config();
  cfg.eval_oracle = "full";
  const std::string dir = scratch_dir("eval_oracle");
  MetricsSink sink(dir);
  const StageResult s1 = run_stage1(cfg, 23, dir, sink);
  const EvalReport rep = run_eval(cfg, 23, dir, s1.checkpoint_path, EvalMode::Fixed, sink);
  CHECK(rep.mode == "fixed");
  CHECK(rep.scenes == cfg.eval_scenes);
  CHECK(rep.skipped == 0);
  CHECK(rep.mean_success == 1.0);
  for (size_t task = 0; task < rep.per_task_count.size(); ++task)
    if (rep.per_task_count[task] > 0) CHECK(rep.per_task_success[task] == 1.0);
  CHECK(std::filesystem::exists(dir + "/eval_report.json"));
}

TEST_CASE("same seed gives byte-identical metrics, checkpoints, and reports") {
  const RunConfig cfg = pipe_config();
  const std::string a = scratch_dir("det_a");
  const std::string b = scratch_dir("det_b");
  for (const std::string& dir : {a, b}) {
    MetricsSink sink(dir);
    const StageResult s1 = run_stage1(cfg, 29, dir, sink);
    const StageResult s2 = run_stage2(cfg, 29, dir, s1.checkpoint_path, sink);
    run_eval(cfg, 29, dir, s2.checkpoint_path, EvalMode::Dynamic, sink);
    run_eval(cfg, 29, dir + "/rand", s2.checkpoint_path, EvalMode::Random, sink);
  }
  CHECK(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv"));
  CHECK(slurp(a + "/routing_stats.jsonl") == slurp(b + "/routing_stats.jsonl"));
  CHECK(slurp(a + "/stage1.ckpt") == slurp(b + "/stage1.ckpt"));
  CHECK(slurp(a + "/stage2.ckpt") == slurp(b + "/stage2.ckpt"));
  CHECK(slurp(a + "/eval_report.json") == slurp(b + "/eval_report.json"));
  CHECK(slurp(a + "/rand/eval_report.json") == slurp(b + "/rand/eval_report.json"));
}

TEST_CASE("ablation runner aggregates medians over seeds and router settings") {
  RunConfig cfg = pipe_config();
  cfg.train_scenes = 2;
  cfg.eval_scenes = 2;
  cfg.stage1_steps = 2;
  cfg.stage2_updates = 1;
  cfg.batch_size = 2;
  cfg.stage3_steps = 2;
  const std::string dir = scratch_dir("ablate");
  const AblationReport rep = run_ablate(cfg, {31}, dir);
  REQUIRE(rep.runs.size() == 2);
  CHECK(rep.runs[0].use_taskmoe);
  CHECK(!rep.runs[1].use_taskmoe);
  CHECK(rep.median_dynamic_with_moe == rep.runs[0].dynamic_success);
  CHECK(rep.median_dynamic_without_moe == rep.runs[1].dynamic_success);
  CHECK(rep.moe_margin ==
        rep.median_dynamic_with_moe - rep.median_dynamic_without_moe);
  CHECK(rep.dynamic_margin == rep.median_dynamic_with_moe - rep.median_random_with_moe);
  CHECK(std::filesystem::exists(dir + "/ablate_report.json"));
  CHECK(std::filesystem::exists(dir + "/moe_seed31/stage3.ckpt"));
  CHECK(std::filesystem::exists(dir + "/nomoe_seed31/stage3.ckpt"));
  CHECK_THROWS_AS(run_ablate(cfg, {}, dir), Error);
}
