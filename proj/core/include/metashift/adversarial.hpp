#pragma once

#include "metashift/meta.hpp"
#include "metashift/rng.hpp"

namespace metashift {

struct AdvConfig {
  /// Lagrange penalty on the feature-space transport cost.
  double penalty_gamma = 0.5;
  /// Ascent step size for the shift parameters.
  double ascent_eta = 0.01;
  int ascent_steps = 1;
  /// Differentiate through the ascent step so the outer update treats the
  /// shift initialization MAML-style. Off = straight-through (phi' = phi + const).
  bool phi_second_order = true;
  /// Ablation: never apply outer updates to the shift parameters.
  bool freeze_phi = false;
};

/// The three independent source tasks consumed per training iteration:
/// one to drive the ascent, one to transform into a pseudo task, one kept clean.
struct EpisodeTriple {
  Task adapt_task;
  Task pseudo_source_task;
  Task clean_task;
};

/// Cost of moving a sample from feature z0 to z: half squared euclidean
/// distance, +inf when the labels differ. Batch overloads return the mean
/// over row pairs.
double transport_cost(const ad::Tensor& z0, const ad::Tensor& z, int y0, int y);
double transport_cost(const ad::Tensor& z0, const ad::Tensor& z, const std::vector<int>& y0,
                      const std::vector<int>& y);
/// Differentiable batch mean for matched labels (the only case reached in
/// training, since pseudo tasks never rewrite labels).
ad::Tensor transport_cost_matched(const ad::Tensor& z0, const ad::Tensor& z);

/// Penalized objective the ascent climbs: mean query loss under the shift
/// route minus penalty_gamma times the mean transport cost of the shift,
/// evaluated on the query set with labels held fixed. `learner` must be
/// adapted on the unrouted support set; pass nullptr for the metric path.
ad::Tensor surrogate_objective(const ModelSpec& model, const ad::ParamSet& theta,
                               const BaseLearner* learner, const FislParams& phi, const Task& task,
                               double penalty_gamma);

/// Gradient ascent on the surrogate with respect to the shift parameters,
/// starting from phi. Adapts the base learner on the task's unrouted support
/// internally (skipped for proto). Requires an active tape; with
/// phi_second_order the returned parameters stay differentiable in phi.
FislParams max_phase(const ModelSpec& model, const ad::ParamSet& theta, const FislParams& phi,
                     const Task& adapt_task, const AdvConfig& adv, const InnerConfig& inner);

struct TrainState {
  ad::ParamSet theta;
  FislParams phi;
  Adam opt;
  std::int64_t iteration = 0;
  Rng rng;

  TrainState(ad::ParamSet theta_, FislParams phi_, double outer_lr, Rng rng_)
      : theta(std::move(theta_)), phi(std::move(phi_)), opt(outer_lr), rng(std::move(rng_)) {}
};

struct StepStats {
  double total_loss = 0.0;
  double clean_loss = 0.0;
  double pseudo_loss = 0.0;
};

/// One full training iteration: adapt on the first task and run the ascent,
/// transform the second task into a pseudo task with the adapted shift, adapt
/// base learners for the pseudo and clean tasks, then take one joint outer
/// step on the summed pseudo + clean query losses. On a non-finite loss the
/// state is left untouched.
StepStats adversarial_update(const ModelSpec& model, TrainState& state, const EpisodeTriple& triple,
                             const AdvConfig& adv, const InnerConfig& inner);

}  // namespace metashift
