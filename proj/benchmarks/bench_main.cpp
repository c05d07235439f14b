#include <benchmark/benchmark.h>

#include "metashift/adversarial.hpp"
#include "metashift/config.hpp"
#include "metashift/eval.hpp"
#include "metashift/trainer.hpp"

using namespace metashift;

namespace {

ExperimentConfig sine_config(const char* learner, const char* mode) {
  return parse_config_text(std::string(R"({"learner_kind":")") + learner + R"(","mode":")" + mode +
                           R"("})");
}

void bench_forward_backward(benchmark::State& state) {
  ExperimentConfig cfg = sine_config("maml", "baseline");
  const ModelSpec model = cfg.model_spec();
  Rng rng(0);
  ad::ParamSet theta = init_params(model, rng);
  Task task = sample_sine_task(cfg.sine_source, 5, 20, rng);
  for (auto _ : state) {
    ad::Tape tape;
    ad::ParamSet watched;
    std::vector<ad::Tensor> wrt;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto leaf = tape.watch(theta.tensor(i), theta.name(i));
      watched.insert(theta.name(i), leaf);
      wrt.push_back(leaf);
    }
    ad::Tensor loss = support_loss(model, watched, view(task));
    auto grads = tape.gradient(loss, wrt);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(bench_forward_backward);

void bench_second_order_episode(benchmark::State& state) {
  ExperimentConfig cfg = sine_config("maml", "baseline");
  const ModelSpec model = cfg.model_spec();
  Rng rng(0);
  ad::ParamSet theta = init_params(model, rng);
  Task task = sample_sine_task(cfg.sine_source, 5, 20, rng);
  for (auto _ : state) {
    ad::Tape tape;
    ad::ParamSet watched;
    std::vector<ad::Tensor> wrt;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto leaf = tape.watch(theta.tensor(i), theta.name(i));
      watched.insert(theta.name(i), leaf);
      wrt.push_back(leaf);
    }
    ad::Tensor loss = episode_loss(model, watched, view(task), cfg.inner, true);
    auto grads = tape.gradient(loss, wrt);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(bench_second_order_episode);

void bench_adversarial_update(benchmark::State& state) {
  ExperimentConfig cfg = sine_config("maml", "fisl");
  const ModelSpec model = cfg.model_spec();
  TrainState ts = init_train_state(cfg);
  TaskSampler sampler = cfg.train_sampler();
  for (auto _ : state) {
    EpisodeTriple triple{sampler.sample(ts.rng), sampler.sample(ts.rng), sampler.sample(ts.rng)};
    auto stats = adversarial_update(model, ts, triple, cfg.adv, cfg.inner);
    benchmark::DoNotOptimize(stats);
  }
}
BENCHMARK(bench_adversarial_update);

void bench_meta_test_task(benchmark::State& state) {
  ExperimentConfig cfg = sine_config("maml", "fisl");
  const ModelSpec model = cfg.model_spec();
  TrainState ts = init_train_state(cfg);
  TaskSampler sampler = cfg.eval_sampler(true);
  Task task = sampler.sample(ts.rng);
  for (auto _ : state) {
    double m = meta_test_task(model, ts.theta, ts.phi, task, cfg.inner, true);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(bench_meta_test_task);

}  // namespace

BENCHMARK_MAIN();
