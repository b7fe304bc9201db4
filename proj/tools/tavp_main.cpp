#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tavp/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "master seed")->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-aware view planning over point-cloud scenes"};
  app.require_subcommand(1);

  CommonArgs s1, s2, s3, ev, ab;
  std::string s2_ckpt, s3_ckpt, ev_ckpt;
  std::string ev_mode = "dynamic";
  std::vector<uint64_t> ab_seeds;

  CLI::App* stage1 = app.add_subcommand("stage1", "supervised training on the fixed views");
  add_common(stage1, s1);

  CLI::App* stage2 = app.add_subcommand("stage2", "viewpoint policy training");
  add_common(stage2, s2);
  stage2->add_option("--ckpt", s2_ckpt, "stage-1 checkpoint (default <out>/stage1.ckpt)");

  CLI::App* stage3 = app.add_subcommand("stage3", "fine-tune on the learned viewpoints");
  add_common(stage3, s3);
  stage3->add_option("--ckpt", s3_ckpt, "stage-2 checkpoint (default <out>/stage2.ckpt)");

  CLI::App* eval = app.add_subcommand("eval", "held-out evaluation of a checkpoint");
  add_common(eval, ev);
  eval->add_option("--ckpt", ev_ckpt, "checkpoint (default <out>/stage3.ckpt)");
  eval->add_option("--mode", ev_mode, "viewpoint mode: fixed|dynamic|random")
      ->check(CLI::IsMember({"fixed", "dynamic", "random"}));

  CLI::App* ablate = app.add_subcommand("ablate", "three-stage runs with and without the router");
  add_common(ablate, ab);
  ablate->add_option("--seeds", ab_seeds, "extra seeds for the ablation (default: --seed only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (stage1->parsed()) {
      const tavp::RunConfig cfg = tavp::load_config(s1.config_path);
      tavp::MetricsSink sink(s1.out_dir);
      const tavp::StageResult res = tavp::run_stage1(cfg, s1.seed, s1.out_dir, sink);
      std::printf("stage1 done: %s (loss %.6f)\n", res.checkpoint_path.c_str(),
                  res.final_metric);
    } else if (stage2->parsed()) {
      const tavp::RunConfig cfg = tavp::load_config(s2.config_path);
      if (s2_ckpt.empty()) s2_ckpt = s2.out_dir + "/stage1.ckpt";
      tavp::MetricsSink sink(s2.out_dir);
      const tavp::StageResult res = tavp::run_stage2(cfg, s2.seed, s2.out_dir, s2_ckpt, sink);
      std::printf("stage2 done: %s (reward %.6f)\n", res.checkpoint_path.c_str(),
                  res.final_metric);
    } else if (stage3->parsed()) {
      const tavp::RunConfig cfg = tavp::load_config(s3.config_path);
      if (s3_ckpt.empty()) s3_ckpt = s3.out_dir + "/stage2.ckpt";
      tavp::MetricsSink sink(s3.out_dir);
      const tavp::StageResult res = tavp::run_stage3(cfg, s3.seed, s3.out_dir, s3_ckpt, sink);
      std::printf("stage3 done: %s (loss %.6f)\n", res.checkpoint_path.c_str(),
                  res.final_metric);
    } else if (eval->parsed()) {
      const tavp::RunConfig cfg = tavp::load_config(ev.config_path);
      if (ev_ckpt.empty()) ev_ckpt = ev.out_dir + "/stage3.ckpt";
      tavp::MetricsSink sink(ev.out_dir);
      const tavp::EvalReport rep = tavp::run_eval(cfg, ev.seed, ev.out_dir, ev_ckpt,
                                                  tavp::eval_mode_from(ev_mode), sink);
      std::printf("eval %s: success %.4f over %lld scenes (%lld skipped)\n", rep.mode.c_str(),
                  rep.mean_success, static_cast<long long>(rep.scenes),
                  static_cast<long long>(rep.skipped));
    } else if (ablate->parsed()) {
      const tavp::RunConfig cfg = tavp::load_config(ab.config_path);
      std::vector<uint64_t> seeds{ab.seed};
      for (uint64_t s : ab_seeds)
        if (s != ab.seed) seeds.push_back(s);
      const tavp::AblationReport rep = tavp::run_ablate(cfg, seeds, ab.out_dir);
      std::printf("ablate done: dynamic %.4f vs random %.4f (router margin %.4f)\n",
                  rep.median_dynamic_with_moe, rep.median_random_with_moe, rep.moe_margin);
    }
  } catch (const tavp::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
