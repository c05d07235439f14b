#include "metashift/trainer.hpp"

#include "metashift/tape.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

namespace metashift {

using ad::ParamSet;
using ad::Tensor;

namespace {

using nlohmann::ordered_json;

ordered_json tensor_to_json(const Tensor& t) {
  return ordered_json{{"shape", t.shape()}, {"values", t.values()}};
}

Tensor tensor_from_json(const ordered_json& j) {
  return Tensor(j.at("shape").get<ad::Shape>(), j.at("values").get<std::vector<double>>());
}

ordered_json param_set_to_json(const ParamSet& p) {
  ordered_json doc = ordered_json::object();
  for (std::size_t i = 0; i < p.size(); ++i) doc[p.name(i)] = tensor_to_json(p.tensor(i));
  return doc;
}

ParamSet param_set_from_json(const ordered_json& j) {
  ParamSet p;
  for (const auto& [name, entry] : j.items()) p.insert(name, tensor_from_json(entry));
  return p;
}

}  // namespace

TrainState init_train_state(const ExperimentConfig& config) {
  Rng rng(config.seed);
  ParamSet theta = init_params(config.model_spec(), rng);
  FislParams phi = FislParams::identity(config.encoder.output_dim());
  TrainState state(std::move(theta), std::move(phi), config.outer_lr, std::move(rng));
  return state;
}

std::string save_checkpoint(const TrainState& state) {
  ordered_json doc;
  doc["iteration"] = state.iteration;
  doc["theta"] = param_set_to_json(state.theta);
  doc["phi"] = {{"scale", tensor_to_json(state.phi.scale)},
                {"shift", tensor_to_json(state.phi.shift)}};
  doc["optimizer_state"] = {{"step", state.opt.step_count()},
                            {"m", param_set_to_json(state.opt.first_moments())},
                            {"v", param_set_to_json(state.opt.second_moments())}};
  doc["rng_state"] = state.rng.save_state();
  return doc.dump();
}

TrainState load_checkpoint_text(const std::string& json_text, double outer_lr) {
  ordered_json doc = ordered_json::parse(json_text);
  ParamSet theta = param_set_from_json(doc.at("theta"));
  FislParams phi{tensor_from_json(doc.at("phi").at("scale")),
                 tensor_from_json(doc.at("phi").at("shift"))};
  Rng rng;
  rng.load_state(doc.at("rng_state").get<std::string>());
  TrainState state(std::move(theta), std::move(phi), outer_lr, std::move(rng));
  state.iteration = doc.at("iteration").get<std::int64_t>();
  const auto& opt = doc.at("optimizer_state");
  state.opt.restore(opt.at("step").get<std::int64_t>(), param_set_from_json(opt.at("m")),
                    param_set_from_json(opt.at("v")));
  return state;
}

void write_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  std::ofstream out(path);
  out << save_checkpoint(state) << '\n';
}

TrainState load_checkpoint(const std::filesystem::path& path, double outer_lr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_checkpoint_text(buffer.str(), outer_lr);
}

TrainState train(const ExperimentConfig& config, TrainState state, bool fresh_artifacts) {
  namespace fs = std::filesystem;
  ad::set_finite_checks(config.finite_checks);

  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config.resolved.json");
    cfg << resolved_config_json(config) << '\n';
  }
  const fs::path metrics_path = out_dir / "metrics.csv";
  const fs::path timing_path = out_dir / "timing.csv";
  const fs::path checkpoint_path = out_dir / "checkpoint.json";
  if (fresh_artifacts) {
    std::ofstream m(metrics_path);
    m << "iteration,train_loss,val_mse_source,val_mse_unseen\n";
    std::ofstream t(timing_path);
    t << "iteration,wall_ms\n";
  }

  const ModelSpec model = config.model_spec();
  const TaskSampler train_sampler = config.train_sampler();
  const TaskSampler val_source = config.eval_sampler(false);
  const TaskSampler val_unseen = config.eval_sampler(true);
  const bool fisl_mode = config.mode == RunMode::Fisl;

  const auto t0 = std::chrono::steady_clock::now();
  double last_loss = 0.0;

  for (std::int64_t it = state.iteration; it < config.iterations; ++it) {
    try {
      if (fisl_mode) {
        EpisodeTriple triple{train_sampler.sample(state.rng), train_sampler.sample(state.rng),
                             train_sampler.sample(state.rng)};
        last_loss = adversarial_update(model, state, triple, config.adv, config.inner).total_loss;
      } else {
        std::vector<Task> batch;
        batch.reserve(config.task_batch);
        for (std::size_t b = 0; b < config.task_batch; ++b) {
          batch.push_back(train_sampler.sample(state.rng));
        }
        last_loss = baseline_meta_step(model, state.theta, batch, config.inner, state.opt);
      }
    } catch (const std::exception& e) {
      write_checkpoint(checkpoint_path, state);
      throw TrainError(it, e.what());
    }
    state.iteration = it + 1;

    // Metric rows land only on cadence multiples, so a resumed run writes the
    // same stream as an uninterrupted one. The checkpoint below still rolls
    // forward on the final iteration regardless.
    if ((it + 1) % config.eval_cadence == 0) {
      Rng src_rng = Rng::child(config.seed, 2 * static_cast<std::uint64_t>(it + 1));
      Rng uns_rng = Rng::child(config.seed, 2 * static_cast<std::uint64_t>(it + 1) + 1);
      const double val_src =
          evaluate_suite(model, state.theta, state.phi, val_source, config.n_val_tasks,
                         config.inner, fisl_mode, src_rng, config.model_tag())
              .mean;
      const double val_uns =
          evaluate_suite(model, state.theta, state.phi, val_unseen, config.n_val_tasks,
                         config.inner, fisl_mode, uns_rng, config.model_tag())
              .mean;
      {
        std::ofstream m(metrics_path, std::ios::app);
        m << (it + 1) << ',' << ad::format_double(last_loss) << ',' << ad::format_double(val_src)
          << ',' << ad::format_double(val_uns) << '\n';
      }
      {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        std::ofstream t(timing_path, std::ios::app);
        t << (it + 1) << ',' << ms << '\n';
      }
      write_checkpoint(checkpoint_path, state);
    }
  }

  write_checkpoint(checkpoint_path, state);
  return state;
}

TrainState train(const ExperimentConfig& config) {
  return train(config, init_train_state(config), /*fresh_artifacts=*/true);
}

}  // namespace metashift
