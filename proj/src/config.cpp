#include "tavp/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace tavp {

namespace {

struct Field {
  enum Kind { kInt, kDouble, kString, kBool } kind;
  const char* name;
  int64_t RunConfig::* i = nullptr;
  double RunConfig::* d = nullptr;
  std::string RunConfig::* s = nullptr;
  bool RunConfig::* b = nullptr;
  bool arch = false;  // participates in the architecture fingerprint
};

Field fi(const char* n, int64_t RunConfig::*p, bool arch = false) {
  Field f;
  f.kind = Field::kInt;
  f.name = n;
  f.i = p;
  f.arch = arch;
  return f;
}
Field fd(const char* n, double RunConfig::*p) {
  Field f;
  f.kind = Field::kDouble;
  f.name = n;
  f.d = p;
  return f;
}
Field fs(const char* n, std::string RunConfig::*p) {
  Field f;
  f.kind = Field::kString;
  f.name = n;
  f.s = p;
  return f;
}
Field fb(const char* n, bool RunConfig::*p, bool arch = false) {
  Field f;
  f.kind = Field::kBool;
  f.name = n;
  f.b = p;
  f.arch = arch;
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> v = {
      fi("k", &RunConfig::k, true),
      fd("r_min", &RunConfig::r_min),
      fd("r_max", &RunConfig::r_max),
      fd("theta_cap", &RunConfig::theta_cap),
      fb("azimuth_stratify", &RunConfig::azimuth_stratify),
      fi("resolution", &RunConfig::resolution),
      fd("fov_y_deg", &RunConfig::fov_y_deg),
      fi("point_radius_px", &RunConfig::point_radius_px),
      fd("sigma_px", &RunConfig::sigma_px),
      fd("trunc_sigmas", &RunConfig::trunc_sigmas),
      fi("n_points", &RunConfig::n_points),
      fi("cloud_keep_points", &RunConfig::cloud_keep_points),
      fi("fixed_view_resolution", &RunConfig::fixed_view_resolution),
      fd("workspace_xy", &RunConfig::workspace_xy),
      fd("workspace_z_min", &RunConfig::workspace_z_min),
      fd("workspace_z_max", &RunConfig::workspace_z_max),
      fd("half_extent", &RunConfig::half_extent),
      fd("crop_scale", &RunConfig::crop_scale),
      fi("n_gates", &RunConfig::n_gates, true),
      fi("n_experts", &RunConfig::n_experts, true),
      fi("top_k", &RunConfig::top_k, true),
      fi("embed_dim", &RunConfig::embed_dim, true),
      fb("use_taskmoe", &RunConfig::use_taskmoe, true),
      fi("variants_occluded", &RunConfig::variants_occluded, true),
      fi("variants_clear", &RunConfig::variants_clear, true),
      fi("variants_two_target", &RunConfig::variants_two_target, true),
      fi("patch_stride", &RunConfig::patch_stride),
      fi("patch_feat_dim", &RunConfig::patch_feat_dim, true),
      fi("patch_hidden", &RunConfig::patch_hidden, true),
      fi("head_hidden", &RunConfig::head_hidden, true),
      fi("mvep_hidden1", &RunConfig::mvep_hidden1, true),
      fi("mvep_hidden2", &RunConfig::mvep_hidden2, true),
      fi("mvep_embed", &RunConfig::mvep_embed, true),
      fi("value_hidden", &RunConfig::value_hidden, true),
      fi("coarse_grid_xy", &RunConfig::coarse_grid_xy),
      fi("coarse_grid_z", &RunConfig::coarse_grid_z),
      fi("fine_grid", &RunConfig::fine_grid),
      fd("prob_eps", &RunConfig::prob_eps),
      fd("clip_eps", &RunConfig::clip_eps),
      fi("ppo_epochs", &RunConfig::ppo_epochs),
      fd("value_coef", &RunConfig::value_coef),
      fd("entropy_coef", &RunConfig::entropy_coef),
      fi("batch_size", &RunConfig::batch_size),
      fd("lr", &RunConfig::lr),
      fs("lr_schedule", &RunConfig::lr_schedule),
      fi("train_scenes", &RunConfig::train_scenes),
      fi("eval_scenes", &RunConfig::eval_scenes),
      fi("stage1_steps", &RunConfig::stage1_steps),
      fi("stage1_batch", &RunConfig::stage1_batch),
      fd("stage1_lr", &RunConfig::stage1_lr),
      fd("stage1_warmup_frac", &RunConfig::stage1_warmup_frac),
      fi("stage2_updates", &RunConfig::stage2_updates),
      fi("stage3_steps", &RunConfig::stage3_steps),
      fd("stage3_lr", &RunConfig::stage3_lr),
      fd("reward_w0", &RunConfig::reward_w0),
      fd("reward_w1", &RunConfig::reward_w1),
      fd("reward_w2", &RunConfig::reward_w2),
      fd("success_tau", &RunConfig::success_tau),
      fb("oracle_coarse", &RunConfig::oracle_coarse),
      fs("eval_oracle", &RunConfig::eval_oracle),
  };
  return v;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void range_error(const std::string& msg) { fail(ErrorKind::ConfigRange, msg); }

}  // namespace

void RunConfig::validate() const {
  if (k < 1) range_error("k must be >= 1");
  if (!(r_min > 0.0) || !(r_max > r_min))
    range_error("radial bounds require 0 < r_min < r_max, got r_min=" + std::to_string(r_min) +
                " r_max=" + std::to_string(r_max));
  if (!(theta_cap > 0.0) || theta_cap > kPi + 1e-12) range_error("theta_cap must lie in (0, pi]");
  if (resolution < 4) range_error("resolution must be >= 4");
  if (!(fov_y_deg > 0.0) || fov_y_deg >= 180.0) range_error("fov_y_deg must lie in (0, 180)");
  if (point_radius_px < 0) range_error("point_radius_px must be >= 0");
  if (!(sigma_px > 0.0)) range_error("sigma_px must be positive");
  if (!(trunc_sigmas > 0.0)) range_error("trunc_sigmas must be positive");
  if (n_points < 8) range_error("n_points must be >= 8");
  if (cloud_keep_points < n_points) range_error("cloud_keep_points must be >= n_points");
  if (fixed_view_resolution < 8) range_error("fixed_view_resolution must be >= 8");
  if (!(workspace_xy > 0.0)) range_error("workspace_xy must be positive");
  if (!(workspace_z_max > workspace_z_min)) range_error("workspace_z_max must exceed workspace_z_min");
  if (!(half_extent > 0.0)) range_error("half_extent must be positive");
  if (!(crop_scale > 0.0)) range_error("crop_scale must be positive");
  if (n_gates < 1) range_error("n_gates must be >= 1");
  if (n_experts < 1) range_error("n_experts must be >= 1");
  if (top_k < 1 || top_k > n_experts) range_error("top_k must lie in [1, n_experts]");
  if (embed_dim < 4) range_error("embed_dim must be >= 4");
  if (variants_occluded < 0 || variants_clear < 0 || variants_two_target < 0)
    range_error("task variant counts must be non-negative");
  if (n_tasks() < 1) range_error("task roster is empty");
  if (n_gates >= n_tasks())
    range_error("n_gates must be smaller than the task count, got n_gates=" +
                std::to_string(n_gates) + " n_tasks=" + std::to_string(n_tasks()));
  if (patch_stride < 1 || patch_stride > resolution)
    range_error("patch_stride must lie in [1, resolution]");
  if (patch_feat_dim < 1 || patch_hidden < 1 || head_hidden < 1 || mvep_hidden1 < 1 ||
      mvep_hidden2 < 1 || mvep_embed < 1 || value_hidden < 1)
    range_error("model dims must be positive");
  if (coarse_grid_xy < 2 || coarse_grid_z < 2 || fine_grid < 2)
    range_error("candidate grids need at least 2 steps per axis");
  if (!(prob_eps > 0.0) || prob_eps >= 1.0) range_error("prob_eps must lie in (0, 1)");
  if (!(clip_eps > 0.0) || clip_eps >= 1.0) range_error("clip_eps must lie in (0, 1)");
  if (ppo_epochs < 1) range_error("ppo_epochs must be >= 1");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0))
    range_error("value_coef and entropy_coef must be non-negative");
  if (batch_size < 1) range_error("batch_size must be >= 1");
  if (!(lr > 0.0) || !(stage1_lr > 0.0) || !(stage3_lr > 0.0)) range_error("learning rates must be positive");
  if (lr_schedule != "cosine" && lr_schedule != "constant")
    range_error("lr_schedule must be cosine or constant");
  if (train_scenes < 1 || eval_scenes < 1) range_error("scene counts must be >= 1");
  if (stage1_steps < 1 || stage1_batch < 1 || stage2_updates < 1 || stage3_steps < 1)
    range_error("stage schedules must be >= 1");
  if (!(stage1_warmup_frac >= 0.0) || stage1_warmup_frac > 1.0)
    range_error("stage1_warmup_frac must lie in [0, 1]");
  if (!(success_tau > 0.0)) range_error("success_tau must be positive");
  if (eval_oracle != "none" && eval_oracle != "coarse" && eval_oracle != "full")
    range_error("eval_oracle must be none, coarse or full");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::ConfigParse, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (key == f.name) field = &f;
    if (!field)
      fail(ErrorKind::ConfigUnknownKey,
           "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    char* end = nullptr;
    switch (field->kind) {
      case Field::kInt: {
        const long long v = std::strtoll(value.c_str(), &end, 10);
        if (value.empty() || *end != '\0')
          fail(ErrorKind::ConfigParse, "config key '" + key + "': expected integer, got '" + value + "'");
        cfg.*(field->i) = v;
        break;
      }
      case Field::kDouble: {
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0')
          fail(ErrorKind::ConfigParse, "config key '" + key + "': expected number, got '" + value + "'");
        cfg.*(field->d) = v;
        break;
      }
      case Field::kBool: {
        if (value == "true" || value == "1")
          cfg.*(field->b) = true;
        else if (value == "false" || value == "0")
          cfg.*(field->b) = false;
        else
          fail(ErrorKind::ConfigParse, "config key '" + key + "': expected bool, got '" + value + "'");
        break;
      }
      case Field::kString:
        cfg.*(field->s) = value;
        break;
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::LoadError, "cannot open config file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  char line[160];
  for (const auto& f : fields()) {
    switch (f.kind) {
      case Field::kInt:
        std::snprintf(line, sizeof(line), "%s = %lld\n", f.name,
                      static_cast<long long>(cfg.*(f.i)));
        break;
      case Field::kDouble:
        std::snprintf(line, sizeof(line), "%s = %.17g\n", f.name, cfg.*(f.d));
        break;
      case Field::kBool:
        std::snprintf(line, sizeof(line), "%s = %s\n", f.name, (cfg.*(f.b)) ? "true" : "false");
        break;
      case Field::kString:
        std::snprintf(line, sizeof(line), "%s = %s\n", f.name, (cfg.*(f.s)).c_str());
        break;
    }
    out += line;
  }
  return out;
}

bool config_equal(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

uint64_t arch_fingerprint(const RunConfig& cfg) {
  std::string repr;
  char line[160];
  for (const auto& f : fields()) {
    if (!f.arch) continue;
    if (f.kind == Field::kInt)
      std::snprintf(line, sizeof(line), "%s=%lld;", f.name, static_cast<long long>(cfg.*(f.i)));
    else
      std::snprintf(line, sizeof(line), "%s=%d;", f.name, static_cast<int>(cfg.*(f.b)));
    repr += line;
  }
  return fnv1a(repr);
}

}  // namespace tavp
