#pragma once

#include <vector>

#include "metashift/models.hpp"
#include "metashift/optim.hpp"
#include "metashift/tape.hpp"
#include "metashift/tasks.hpp"

namespace metashift {

enum class LearnerKind { Maml, Anil, Ridge, Proto };

const char* learner_kind_name(LearnerKind k);

struct InnerConfig {
  LearnerKind kind = LearnerKind::Maml;
  double inner_lr = 0.01;
  int inner_steps = 1;
  double ridge_lambda = 1.0;
  /// Ablation switch: adapt with detached inner gradients (first-order MAML).
  bool first_order = false;
};

/// Task-specific weights adapted from the meta-parameters. For ANIL and ridge
/// the encoder entries are the exact tensors of theta, never copies.
struct BaseLearner {
  ad::ParamSet w;
  std::vector<std::string> adapted;
};

/// Mean loss of `params` on the (routed) support set.
ad::Tensor support_loss(const ModelSpec& model, const ad::ParamSet& params, const TaskView& task);

/// Adaptation on the support set: gradient steps from theta (all parameters
/// for MAML, head only for ANIL), or the closed-form ridge solve
/// w = (ZᵀZ + λI)⁻¹ Zᵀ y on encoded support features. With `differentiable`
/// the adaptation is recorded so meta-gradients flow through it; otherwise the
/// result is detached values.
BaseLearner inner_adapt(const ModelSpec& model, const ad::ParamSet& theta, const TaskView& task,
                        const InnerConfig& cfg, bool differentiable);

/// Mean loss of the adapted learner on the (routed) query set: squared error
/// for regression, cross-entropy for classification.
ad::Tensor query_loss(const ModelSpec& model, const ad::ParamSet& theta, const BaseLearner& learner,
                      const TaskView& task);

/// Prototype loss: class prototypes from (routed) support features, query
/// logits as negative squared distances, mean cross-entropy.
ad::Tensor proto_loss(const ModelSpec& model, const ad::ParamSet& theta, const TaskView& task);

/// Loss of one task under the configured learner family: adapt + query loss,
/// or proto_loss for the metric path. Requires an active tape with theta
/// watched when gradients are wanted.
ad::Tensor episode_loss(const ModelSpec& model, const ad::ParamSet& theta, const TaskView& task,
                        const InnerConfig& cfg, bool differentiable);

/// One outer step on the summed query losses of a task batch (the no-shift
/// baseline). Returns the summed loss value.
double baseline_meta_step(const ModelSpec& model, ad::ParamSet& theta,
                          const std::vector<Task>& tasks, const InnerConfig& cfg, Adam& opt);

}  // namespace metashift
