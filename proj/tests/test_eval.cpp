#include <doctest.h>

#include <fstream>

#include <cmath>

#include "metashift/config.hpp"
#include "metashift/eval.hpp"
#include "metashift/trainer.hpp"

using namespace metashift;
using ad::ParamSet;
using ad::Tensor;

TEST_CASE("aggregation: equal metrics give the common value and zero ci") {
  MetricsRecord rec = aggregate_metrics("mse", {2.5, 2.5, 2.5, 2.5}, "unseen", "x");
  CHECK(rec.mean == 2.5);
  CHECK(rec.ci95_halfwidth == 0.0);
  CHECK(rec.n_tasks == 4);
}

TEST_CASE("aggregation: metrics {1,3} give mean 2 and ci 1.96") {
  MetricsRecord rec = aggregate_metrics("mse", {1.0, 3.0}, "unseen", "x");
  CHECK(rec.mean == 2.0);
  // sample std sqrt(2), ci = 1.96 * sqrt(2) / sqrt(2)
  CHECK(rec.ci95_halfwidth == doctest::Approx(1.96).epsilon(1e-15));
  CHECK_THROWS_AS(aggregate_metrics("mse", {1.0}, "d", "m"), std::invalid_argument);
}

TEST_CASE("a perfect predictor scores zero mse and full accuracy") {
  // Regression: zero targets, zero head.
  ModelSpec m;
  m.encoder.input_dim = 1;
  m.encoder.hidden_dims = {3};
  m.head.kind = HeadKind::LinearRegression;
  ParamSet theta;
  theta.insert("enc.0.weight", Tensor({1, 3}, {0.4, -0.3, 0.2}));
  theta.insert("enc.0.bias", Tensor::zeros({3}));
  theta.insert("head.weight", Tensor::zeros({3, 1}));
  theta.insert("head.bias", Tensor::zeros({1}));
  Task task;
  task.kind = Task::Kind::Regression;
  task.support_x = Tensor({2, 1}, {1.0, -1.0});
  task.support_y = Tensor({2, 1}, {0.0, 0.0});
  task.query_x = Tensor({3, 1}, {0.5, 1.5, -0.5});
  task.query_y = Tensor({3, 1}, {0.0, 0.0, 0.0});
  InnerConfig inner;
  inner.kind = LearnerKind::Maml;
  inner.inner_lr = 0.0;
  CHECK(meta_test_task(m, theta, FislParams::identity(3), task, inner, false) == 0.0);

  // Classification: zero-noise blobs and a random encoder are separable.
  ExperimentConfig cfg = parse_config_text(
      R"({"learner_kind":"proto","mode":"baseline","problem":"blob","blob":{"noise_std":0.0}})");
  Rng rng(3);
  ParamSet enc = init_params(cfg.model_spec(), rng);
  Task blob = cfg.train_sampler().sample(rng);
  const double acc =
      meta_test_task(cfg.model_spec(), enc, FislParams::identity(cfg.encoder.output_dim()), blob,
                     cfg.inner, false);
  CHECK(acc == 1.0);
}

TEST_CASE("identity shift evaluation equals the baseline path exactly") {
  ExperimentConfig cfg = parse_config_text(R"({"learner_kind":"maml","mode":"fisl"})");
  cfg.encoder.hidden_dims = {10, 10};
  TrainState state = init_train_state(cfg);
  TaskSampler sampler = cfg.eval_sampler(true);
  Rng rng(77);
  for (int i = 0; i < 5; ++i) {
    Task task = sampler.sample(rng);
    const double with_fisl =
        meta_test_task(cfg.model_spec(), state.theta, state.phi, task, cfg.inner, true);
    const double without =
        meta_test_task(cfg.model_spec(), state.theta, state.phi, task, cfg.inner, false);
    CHECK(with_fisl == without);
  }
}

TEST_CASE("evaluation never mutates the frozen parameters") {
  ExperimentConfig cfg = parse_config_text(R"({"learner_kind":"anil","mode":"fisl"})");
  cfg.encoder.hidden_dims = {8, 8};
  TrainState state = init_train_state(cfg);
  const std::string theta_hash = save_param_set(state.theta);
  const std::string phi_scale = save_param_set([&] {
    ParamSet p;
    p.insert("scale", state.phi.scale);
    p.insert("shift", state.phi.shift);
    return p;
  }());
  Rng rng(5);
  evaluate_suite(cfg.model_spec(), state.theta, state.phi, cfg.eval_sampler(true), 8, cfg.inner,
                 true, rng, "anil-fisl");
  CHECK(save_param_set(state.theta) == theta_hash);
  ParamSet p2;
  p2.insert("scale", state.phi.scale);
  p2.insert("shift", state.phi.shift);
  CHECK(save_param_set(p2) == phi_scale);
}

TEST_CASE("suite evaluation is rng-deterministic and order-independent") {
  ExperimentConfig cfg = parse_config_text(R"({"learner_kind":"maml","mode":"fisl"})");
  cfg.encoder.hidden_dims = {8, 8};
  TrainState state = init_train_state(cfg);
  const ModelSpec model = cfg.model_spec();
  TaskSampler sampler = cfg.eval_sampler(false);

  Rng r1(123), r2(123);
  std::vector<double> pt1;
  MetricsRecord a = evaluate_suite(model, state.theta, state.phi, sampler, 12, cfg.inner, true,
                                   r1, "m", &pt1);
  MetricsRecord b = evaluate_suite(model, state.theta, state.phi, sampler, 12, cfg.inner, true,
                                   r2, "m");
  CHECK(a.mean == b.mean);
  CHECK(a.ci95_halfwidth == b.ci95_halfwidth);

  // Evaluating the same tasks in reverse order reproduces the identical mean,
  // because per-task metrics are independent and reduced in slot order.
  Rng r3(123);
  std::vector<Task> tasks;
  for (int i = 0; i < 12; ++i) tasks.push_back(sampler.sample(r3));
  std::vector<double> reversed(12);
  for (std::size_t i = tasks.size(); i-- > 0;) {
    reversed[i] = meta_test_task(model, state.theta, state.phi, tasks[i], cfg.inner, true);
  }
  MetricsRecord c = aggregate_metrics("mse", reversed, "source", "m");
  CHECK(c.mean == a.mean);
  for (std::size_t i = 0; i < 12; ++i) CHECK(reversed[i] == pt1[i]);
}

TEST_CASE("results csv carries the declared columns") {
  MetricsRecord rec{"mse", 1.25, 0.5, 16, "unseen", "maml-fisl"};
  const auto path = std::filesystem::temp_directory_path() / "metashift_results_test.csv";
  write_results_csv(path, {{rec, 5, 42}});
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "model_tag,domain_tag,shot,metric_name,mean,ci95,n_tasks,seed");
  CHECK(row == "maml-fisl,unseen,5,mse,1.25,0.5,16,42");
  std::filesystem::remove(path);
}
