#pragma once

#include <string>

#include "metashift/adversarial.hpp"

namespace metashift {

/// Raised on malformed experiment configs; the message carries the offending
/// field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ShotConfig {
  std::size_t k_support = 5;
  std::size_t k_query_train = 20;
  std::size_t k_query_eval = 100;
};

enum class RunMode { Fisl, Baseline };
enum class ProblemKind { Sine, Blob };

/// Fully resolved experiment description. Unset fields are filled from the
/// published defaults (Adam 1e-3, 20k iterations, task batch 2, one inner step
/// at 0.01 for MAML / 0.1 for ANIL, penalty 0.5, ascent 0.01 regression /
/// 0.1 classification).
struct ExperimentConfig {
  LearnerKind learner_kind = LearnerKind::Maml;
  RunMode mode = RunMode::Fisl;
  ProblemKind problem = ProblemKind::Sine;

  EncoderSpec encoder;
  ShotConfig shots;
  InnerConfig inner;
  AdvConfig adv;

  SineDomain sine_source;
  SineDomain sine_unseen;
  BlobDomain blob_source;
  BlobDomain blob_unseen;
  std::size_t n_way = 5;

  double outer_lr = 0.001;
  std::int64_t iterations = 20000;
  std::int64_t eval_cadence = 1000;
  std::size_t n_eval_tasks = 2000;
  std::size_t n_val_tasks = 200;
  std::size_t task_batch = 2;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/experiment";
  bool finite_checks = true;

  std::string model_tag() const;
  ModelSpec model_spec() const;
  TaskSampler train_sampler() const;
  TaskSampler eval_sampler(bool unseen) const;
};

/// Loads and validates a config file. Unknown keys are rejected, defaults are
/// filled, and every reported error names the field path.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

/// Exact resolved config (after defaulting), suitable for archiving next to
/// run artifacts; parse_config_text(resolved_config_json(c)) is idempotent.
std::string resolved_config_json(const ExperimentConfig& config);

}  // namespace metashift
