#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "app/commands.hpp"
#include "app/run_config.hpp"
#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace ccan;
using ccan::testing::ScratchDir;
using ccan::testing::slurp;

namespace {

RunConfig small_run(const ScratchDir& dir, const std::string& name) {
  RunConfig c;
  c.load_text(R"(
    model.J = 2
    model.M = 16
    model.D_l = 32
    model.D_f = 16
    model.p_do = 0.5
    train.epochs = 2
    train.batch_size = 8
    train.lr = 1e-3
    synth.n_bags = 40
  )");
  c.set("run.root", dir.path().string());
  c.set("run.name", name);
  return c;
}

}  // namespace

TEST_SUITE("app") {

TEST_CASE("defaults mirror the library defaults") {
  const RunConfig c;
  const CCANConfig m = c.model_config();
  CHECK(m.stages == CCANConfig{}.stages);
  CHECK(m.latents == 512);
  CHECK(m.latent_dim == 512);
  CHECK(m.feature_dim == 2048);
  CHECK(m.stages == 6);
  CHECK(m.compression == 2);
  CHECK(m.token_dropout == 0.9);
  CHECK(m.f_max == 10.0);
  CHECK(m.frequencies == 6);
  CHECK(c.model_kind() == ModelKind::kCCAN);
  const TrainConfig t = c.train_config();
  CHECK(t.epochs == 100);
  CHECK(t.batch_size == 30);
  CHECK(t.lr_max == 5e-6);
  CHECK(t.fractions == TrainConfig{}.fractions);
  CHECK(c.run_dir() == "runs/default");
  CHECK(c.split_path() == "runs/default/split.csv");
  CHECK(c.manifest_path() == "runs/default/data/manifest.csv");
}

TEST_CASE("later sources override earlier ones") {
  ScratchDir dir("app_precedence");
  {
    std::ofstream out(dir.file("a.cfg"));
    out << "# comment\ntrain.epochs = 7\nmodel.M = 64   # trailing\n";
  }
  RunConfig c;
  c.load_file(dir.file("a.cfg"));
  CHECK(c.train_config().epochs == 7);
  c.set("train.epochs", "9");
  CHECK(c.train_config().epochs == 9);
  CHECK(c.model_config().latents == 64);
  CHECK(c.dump().find("train.epochs = 9") != std::string::npos);
  CHECK_THROWS_AS(c.load_file(dir.file("missing.cfg")), IoError);
}

TEST_CASE("bad keys and values are config errors") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("model.nope", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("model.M", "abc"), ConfigError);
  CHECK_THROWS_AS(c.set("model.p_do", "x"), ConfigError);
  CHECK_THROWS_AS(c.set("model.raw_coords", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.set("train.fractions", "0.1,zz"), ConfigError);
  CHECK_THROWS_AS(c.load_text("no equals sign"), ConfigError);
  try {
    c.set("model.M", "abc");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.M") != std::string::npos);
  }
  c.set("model.M", "6");
  c.set("model.J", "3");
  CHECK_THROWS_AS(c.model_config(), ConfigError);
}

TEST_CASE("seed comes from the environment") {
  ::setenv("CCAN_SEED", "1234", 1);
  CHECK(RunConfig().get_u64("run.seed") == 1234);
  ::setenv("CCAN_SEED", "-5", 1);
  CHECK_THROWS_AS(RunConfig(), ConfigError);
  ::unsetenv("CCAN_SEED");
  CHECK(RunConfig().get_u64("run.seed") == 0);
}

TEST_CASE("unknown command lists the valid ones") {
  std::ostringstream log;
  try {
    dispatch("fly", RunConfig(), log);
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    for (const auto& name : command_names()) CHECK(std::string(e.what()).find(name) != std::string::npos);
  }
}

TEST_CASE("synth, split, train, eval, explain and embed on a small run") {
  ScratchDir dir("app_pipeline");
  RunConfig c = small_run(dir, "r");
  std::ostringstream log;
  for (const char* cmd : {"synth", "split", "train", "eval"}) dispatch(cmd, c, log);
  const std::filesystem::path run = dir.path() / "r";
  CHECK(std::filesystem::exists(run / "data" / "manifest.csv"));
  CHECK(std::filesystem::exists(run / "split.csv"));
  CHECK(std::filesystem::exists(run / "config.train.txt"));
  CHECK(std::filesystem::exists(run / "fold0" / "checkpoint.ccan"));
  CHECK(slurp((run / "fold0" / "history.csv").string()).rfind("epoch,train_loss,val_auc\n", 0) == 0);
  CHECK(std::filesystem::exists(run / "fold0" / "eval_test.csv"));

  c.set("explain.bag", "B0000");
  CHECK_THROWS_AS(dispatch("explain", c, log), UsageError);
  c.set("explain.checkpoint", (run / "fold0" / "checkpoint.ccan").string());
  c.set("explain.bag", (run / "data" / "bags" / "B0000.ccfb").string());
  c.set("explain.out", (run / "explain" / "B0000").string());
  dispatch("explain", c, log);
  CHECK(std::filesystem::exists(run / "explain" / "B0000.csv"));
  CHECK(std::filesystem::exists(run / "explain" / "B0000.pgm"));

  c.set("embed.out", (run / "embed.csv").string());
  dispatch("embed", c, log);
  const std::string embed = slurp((run / "embed.csv").string());
  CHECK(std::count(embed.begin(), embed.end(), '\n') == 1 + 2 * 40);
}

TEST_CASE("explain rejects non-CCAN checkpoints") {
  ScratchDir dir("app_explain_kind");
  RunConfig c = small_run(dir, "r");
  c.set("model.kind", "mean-pool");
  c.set("train.epochs", "1");
  std::ostringstream log;
  for (const char* cmd : {"synth", "split", "train"}) dispatch(cmd, c, log);
  c.set("explain.bag", (dir.path() / "r" / "data" / "bags" / "B0001.ccfb").string());
  c.set("explain.checkpoint", (dir.path() / "r" / "fold0" / "checkpoint.ccan").string());
  CHECK_THROWS_AS(dispatch("explain", c, log), UsageError);
}

TEST_CASE("bench command writes a scaling CSV") {
  ScratchDir dir("app_bench");
  RunConfig c = small_run(dir, "b");
  c.set("bench.Ns", "20,40");
  c.set("bench.repeats", "5");
  c.set("bench.warmups", "0");
  c.set("bench.out", dir.file("scaling.csv"));
  std::ostringstream log;
  dispatch("bench", c, log);
  CHECK(slurp(dir.file("scaling.csv")).rfind("model,n,", 0) == 0);
}

}
