#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metashift/trainer.hpp"

using namespace metashift;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("metashift_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig quick_config(const std::string& out_dir, std::int64_t iterations) {
  ExperimentConfig c = parse_config_text(R"({"learner_kind":"maml","mode":"fisl"})");
  c.encoder.hidden_dims = {8, 8};
  c.iterations = iterations;
  c.eval_cadence = 10;
  c.n_val_tasks = 4;
  c.out_dir = out_dir;
  return c;
}

}  // namespace

TEST_CASE("zero-iteration training writes the initial checkpoint and an empty metrics stream") {
  const fs::path dir = fresh_dir("train0");
  ExperimentConfig c = quick_config(dir.string(), 0);
  TrainState state = train(c);
  CHECK(state.iteration == 0);
  // Identity shift at initialization.
  CHECK(state.phi.scale.same_values(ad::Tensor::ones({8})));
  CHECK(state.phi.shift.same_values(ad::Tensor::zeros({8})));
  CHECK(fs::exists(dir / "checkpoint.json"));
  CHECK(fs::exists(dir / "config.resolved.json"));
  CHECK(slurp(dir / "metrics.csv") == "iteration,train_loss,val_mse_source,val_mse_unseen\n");
  fs::remove_all(dir);
}

TEST_CASE("checkpoints carry exactly the declared document keys") {
  ExperimentConfig c = quick_config((fs::temp_directory_path() / "metashift_keys").string(), 0);
  TrainState state = init_train_state(c);
  nlohmann::json doc = nlohmann::json::parse(save_checkpoint(state));
  REQUIRE(doc.is_object());
  CHECK(doc.size() == 5);
  CHECK(doc.contains("iteration"));
  CHECK(doc.contains("theta"));
  CHECK(doc.contains("phi"));
  CHECK(doc.contains("optimizer_state"));
  CHECK(doc.contains("rng_state"));
}

TEST_CASE("checkpoint round-trip restores state exactly") {
  const fs::path dir = fresh_dir("roundtrip");
  ExperimentConfig c = quick_config(dir.string(), 12);
  TrainState state = train(c);
  TrainState loaded = load_checkpoint(dir / "checkpoint.json", c.outer_lr);
  CHECK(loaded.iteration == state.iteration);
  CHECK(loaded.theta.same_values(state.theta));
  CHECK(loaded.phi.scale.same_values(state.phi.scale));
  CHECK(loaded.phi.shift.same_values(state.phi.shift));
  CHECK(loaded.opt.step_count() == state.opt.step_count());
  CHECK(loaded.opt.first_moments().same_values(state.opt.first_moments()));
  CHECK(loaded.opt.second_moments().same_values(state.opt.second_moments()));
  // The rng stream continues identically.
  Rng a = state.rng, b = loaded.rng;
  for (int i = 0; i < 16; ++i) CHECK(a.next() == b.next());
  fs::remove_all(dir);
}

TEST_CASE("same config and seed reproduce byte-identical metric streams") {
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  ExperimentConfig c1 = quick_config(d1.string(), 40);
  ExperimentConfig c2 = quick_config(d2.string(), 40);
  train(c1);
  train(c2);
  CHECK(slurp(d1 / "metrics.csv") == slurp(d2 / "metrics.csv"));
  CHECK(slurp(d1 / "checkpoint.json") == slurp(d2 / "checkpoint.json"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("save/resume mid-training matches the uninterrupted run exactly") {
  const fs::path full_dir = fresh_dir("full");
  const fs::path split_dir = fresh_dir("split");

  ExperimentConfig full_cfg = quick_config(full_dir.string(), 30);
  train(full_cfg);

  ExperimentConfig first_half = quick_config(split_dir.string(), 15);
  train(first_half);
  ExperimentConfig second_half = quick_config(split_dir.string(), 30);
  TrainState resumed = load_checkpoint(split_dir / "checkpoint.json", second_half.outer_lr);
  train(second_half, std::move(resumed), /*fresh_artifacts=*/false);

  CHECK(slurp(full_dir / "metrics.csv") == slurp(split_dir / "metrics.csv"));
  CHECK(slurp(full_dir / "checkpoint.json") == slurp(split_dir / "checkpoint.json"));
  fs::remove_all(full_dir);
  fs::remove_all(split_dir);
}

TEST_CASE("a diverging run checkpoints before aborting and names the iteration") {
  const fs::path dir = fresh_dir("abort");
  ExperimentConfig c = quick_config(dir.string(), 50);
  c.outer_lr = 1e25;  // guaranteed blow-up
  bool threw = false;
  try {
    train(c);
  } catch (const TrainError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
  CHECK(threw);
  CHECK(fs::exists(dir / "checkpoint.json"));
  ad::set_finite_checks(true);
  fs::remove_all(dir);
}

TEST_CASE("baseline mode trains through the same loop") {
  const fs::path dir = fresh_dir("baseline");
  ExperimentConfig c = quick_config(dir.string(), 8);
  c.mode = RunMode::Baseline;
  TrainState state = train(c);
  CHECK(state.iteration == 8);
  // Baseline never touches the shift parameters.
  CHECK(state.phi.scale.same_values(ad::Tensor::ones({8})));
  fs::remove_all(dir);
}
