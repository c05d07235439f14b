#pragma once

#include <filesystem>

#include "metashift/config.hpp"
#include "metashift/eval.hpp"

namespace metashift {

/// Raised when a training step fails; carries the iteration index.
class TrainError : public std::runtime_error {
 public:
  TrainError(std::int64_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

/// Fresh state: parameters drawn from the config seed, identity shift,
/// zeroed optimizer. The returned rng continues the same stream the
/// initialization consumed.
TrainState init_train_state(const ExperimentConfig& config);

/// Checkpoint document: {iteration, theta, phi, optimizer_state, rng_state}.
std::string save_checkpoint(const TrainState& state);
TrainState load_checkpoint_text(const std::string& json_text, double outer_lr);
void write_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path, double outer_lr);

/// Full training loop from state.iteration to config.iterations. Writes the
/// resolved config, appends metrics.csv / timing.csv rows every eval cadence,
/// and keeps a rolling checkpoint.json under config.out_dir. On a failed step
/// the checkpoint is written before a TrainError is thrown. `fresh_artifacts`
/// truncates the metric streams; pass false when resuming.
TrainState train(const ExperimentConfig& config, TrainState state, bool fresh_artifacts);
TrainState train(const ExperimentConfig& config);

}  // namespace metashift
