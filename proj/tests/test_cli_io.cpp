#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "tavp/checkpoint.hpp"
#include "tavp/config.hpp"
#include "tavp/metrics.hpp"

using namespace tavp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::current_path() / ("scratch_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("empty config text yields the documented defaults") {
  const RunConfig cfg = parse_config_text("");
  CHECK(cfg.k == 3);
  CHECK(cfg.r_min == doctest::Approx(0.75));
  CHECK(cfg.r_max == doctest::Approx(1.3));
  CHECK(cfg.resolution == 224);
  CHECK(cfg.fov_y_deg == doctest::Approx(60.0));
  CHECK(cfg.sigma_px == doctest::Approx(1.5));
  CHECK(cfg.n_points == 2048);
  CHECK(cfg.workspace_xy == doctest::Approx(0.45));
  CHECK(cfg.workspace_z_min == doctest::Approx(-0.02));
  CHECK(cfg.workspace_z_max == doctest::Approx(0.55));
  CHECK(cfg.n_gates == 8);
  CHECK(cfg.n_experts == 16);
  CHECK(cfg.top_k == 2);
  CHECK(cfg.embed_dim == 512);
  CHECK(cfg.use_taskmoe);
  CHECK(cfg.clip_eps == doctest::Approx(0.2));
  CHECK(cfg.ppo_epochs == 4);
  CHECK(cfg.value_coef == doctest::Approx(0.5));
  CHECK(cfg.entropy_coef == doctest::Approx(0.0));
  CHECK(cfg.batch_size == 96);
  CHECK(cfg.lr == doctest::Approx(2e-6));
  CHECK(cfg.lr_schedule == "cosine");
  // More task variants than gates, so at least two tasks share a gate.
  CHECK(cfg.n_tasks() == 9);
  CHECK(cfg.n_tasks() > cfg.n_gates);
  CHECK(cfg.heatmap_grid() == 28);
}

TEST_CASE("config parser handles comments, blanks and overrides") {
  const RunConfig cfg = parse_config_text(
      "# camera count\n"
      "k = 4\n"
      "\n"
      "  r_max = 2.5   # wider orbit\n"
      "use_taskmoe = false\n"
      "lr_schedule = constant\n");
  CHECK(cfg.k == 4);
  CHECK(cfg.r_max == doctest::Approx(2.5));
  CHECK_FALSE(cfg.use_taskmoe);
  CHECK(cfg.lr_schedule == "constant");
  CHECK(cfg.resolution == 224);  // untouched keys keep defaults
}

TEST_CASE("unknown keys are hard errors naming the line") {
  try {
    parse_config_text("k = 3\nresolutoin = 64\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigUnknownKey);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("resolutoin") != std::string::npos);
  }
}

TEST_CASE("malformed values name the key") {
  try {
    parse_config_text("batch_size = ninety\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigParse);
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
  CHECK(kind_of([] { parse_config_text("just a line without equals\n"); }) ==
        ErrorKind::ConfigParse);
}

TEST_CASE("range validation names the offending fields") {
  try {
    parse_config_text("r_min = 1.5\nr_max = 0.5\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigRange);
    const std::string msg = e.what();
    CHECK(msg.find("r_min") != std::string::npos);
    CHECK(msg.find("r_max") != std::string::npos);
  }
  CHECK(kind_of([] { parse_config_text("n_gates = 9\n"); }) == ErrorKind::ConfigRange);
  CHECK(kind_of([] { parse_config_text("top_k = 99\n"); }) == ErrorKind::ConfigRange);
  CHECK(kind_of([] { parse_config_text("eval_oracle = sometimes\n"); }) ==
        ErrorKind::ConfigRange);
  CHECK(kind_of([] { parse_config_text("stage1_warmup_frac = 1.5\n"); }) ==
        ErrorKind::ConfigRange);
}

TEST_CASE("serialize and parse round-trip exactly") {
  RunConfig cfg;
  cfg.r_max = 4.0 / 3.0;  // needs all 17 digits
  cfg.lr = 7e-7;
  cfg.k = 5;
  cfg.n_gates = 4;
  cfg.eval_oracle = "coarse";
  const RunConfig back = parse_config_text(serialize_config(cfg));
  CHECK(config_equal(cfg, back));
  CHECK(back.r_max == cfg.r_max);  // bit-exact
  CHECK(config_equal(parse_config_text(""), parse_config_text(serialize_config(RunConfig{}))));
}

TEST_CASE("load_config reports missing files") {
  CHECK(kind_of([] { load_config("/nonexistent/path/tavp.cfg"); }) == ErrorKind::LoadError);
}

TEST_CASE("arch fingerprint tracks architecture, not schedules") {
  RunConfig a, b;
  b.lr = 1e-3;
  b.stage1_steps = 7;
  b.train_scenes = 3;
  CHECK(arch_fingerprint(a) == arch_fingerprint(b));
  RunConfig c;
  c.embed_dim = 64;
  CHECK(arch_fingerprint(a) != arch_fingerprint(c));
  RunConfig d;
  d.use_taskmoe = false;
  CHECK(arch_fingerprint(a) != arch_fingerprint(d));
  RunConfig e;
  e.k = 2;
  CHECK(arch_fingerprint(a) != arch_fingerprint(e));
}

TEST_CASE("checkpoints restore parameters bit-exactly with their lineage") {
  const fs::path dir = scratch_dir("ckpt");
  net::ParamStore store;
  store.set_seed(41);
  store.create_he("enc.w0", {16, 5}, 5);
  store.create_he("enc.b0", {16}, 5);
  store.create_gaussian("instr.table", {9, 32}, 0.5);

  CheckpointMeta meta;
  meta.stage = 2;
  meta.arch = arch_fingerprint(RunConfig{});
  meta.parents = {store.content_hash({"enc."}), 0xdeadbeefull};
  const std::string path = (dir / "a.tavp").string();
  save_checkpoint(path, meta, store);

  net::ParamStore loaded;
  const CheckpointMeta got = load_checkpoint(path, loaded);
  CHECK(got.stage == 2);
  CHECK(got.arch == meta.arch);
  REQUIRE(got.parents.size() == 2);
  CHECK(got.parents[0] == meta.parents[0]);
  CHECK(got.parents[1] == 0xdeadbeefull);
  REQUIRE(loaded.entries().size() == 3);
  // Manifest order preserved and values identical to the last bit.
  for (size_t i = 0; i < 3; ++i) {
    CHECK(loaded.entries()[i].name == store.entries()[i].name);
    CHECK(loaded.entries()[i].value.shape == store.entries()[i].value.shape);
    CHECK(loaded.entries()[i].value.data == store.entries()[i].value.data);
  }
  CHECK(loaded.content_hash() == store.content_hash());
}

TEST_CASE("checkpoint loading rejects corruption precisely") {
  const fs::path dir = scratch_dir("ckpt_bad");
  net::ParamStore store;
  store.set_seed(7);
  store.create_he("head.w0", {4, 4}, 4);
  CheckpointMeta meta;
  meta.stage = 1;
  save_checkpoint((dir / "good.tavp").string(), meta, store);
  const std::string bytes = slurp(dir / "good.tavp");

  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    std::ofstream(dir / "bad.tavp", std::ios::binary) << b;
    net::ParamStore s;
    CHECK(kind_of([&] { load_checkpoint((dir / "bad.tavp").string(), s); }) ==
          ErrorKind::CheckpointMagic);
  }
  SUBCASE("unsupported version") {
    std::string b = bytes;
    b[4] = 9;  // version lives right after the magic
    std::ofstream(dir / "bad.tavp", std::ios::binary) << b;
    net::ParamStore s;
    CHECK(kind_of([&] { load_checkpoint((dir / "bad.tavp").string(), s); }) ==
          ErrorKind::CheckpointVersion);
  }
  SUBCASE("truncated blob") {
    std::ofstream(dir / "bad.tavp", std::ios::binary) << bytes.substr(0, bytes.size() - 9);
    net::ParamStore s;
    CHECK(kind_of([&] { load_checkpoint((dir / "bad.tavp").string(), s); }) ==
          ErrorKind::CheckpointTruncated);
  }
  SUBCASE("shape disagreement names the tensor") {
    net::ParamStore other;
    other.create("head.w0", {2, 8});
    try {
      load_checkpoint((dir / "good.tavp").string(), other);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CheckpointShape);
      CHECK(std::string(e.what()).find("head.w0") != std::string::npos);
    }
  }
}

TEST_CASE("metrics files separate stable and wall-clock records") {
  const fs::path dir = scratch_dir("metrics");
  {
    MetricsSink sink(dir.string());
    sink.log(0, "stage1", "loss_total", 1.5);
    sink.log(0, "stage1", "loss_hf", 0.25);
    sink.log(1, "stage1", "loss_total", 0.125);
    sink.log(0, "stage2", "reward_mean", -0.5);  // new stage restarts the counter
    sink.log_routing(1, "stage2", 4, 2, {7, 3}, {0.75, 0.25});
    sink.flush();

    CHECK(kind_of([&] { sink.log(0, "stage1", "loss_total", 0.0); }) ==
          ErrorKind::InvalidInput);
  }
  const std::string csv = slurp(dir / "metrics.csv");
  CHECK(csv ==
        "step,stage,metric,value\n"
        "0,stage1,loss_total,1.5\n"
        "0,stage1,loss_hf,0.25\n"
        "1,stage1,loss_total,0.125\n"
        "0,stage2,reward_mean,-0.5\n");

  const std::string jsonl = slurp(dir / "metrics.jsonl");
  CHECK(jsonl.find("wall_clock_ms") != std::string::npos);
  CHECK(jsonl.find("\"metric\":\"reward_mean\"") != std::string::npos);

  const std::string routing = slurp(dir / "routing_stats.jsonl");
  CHECK(routing ==
        "{\"experts\":[7,3],\"gate\":2,\"stage\":\"stage2\",\"step\":1,\"task\":4,"
        "\"weights\":[0.75,0.25]}\n");
}

TEST_CASE("stable double formatting round-trips") {
  for (double v : {1.0 / 3.0, 2e-6, -0.0, 1e300, 0.1}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
