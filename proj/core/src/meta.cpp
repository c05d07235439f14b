#include "metashift/meta.hpp"

#include <cmath>

#include "metashift/grad_check.hpp"

namespace metashift {

using ad::ParamSet;
using ad::Tape;
using ad::Tensor;

const char* learner_kind_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::Maml: return "maml";
    case LearnerKind::Anil: return "anil";
    case LearnerKind::Ridge: return "ridge";
    case LearnerKind::Proto: return "proto";
  }
  return "?";
}

namespace {

Tensor routed_features(const ModelSpec& model, const ParamSet& params, const TaskView& task,
                       const Tensor& x) {
  Tensor z = encode(model, params, x);
  if (task.route != nullptr) z = fisl_apply(*task.route, z);
  return z;
}

Tensor prediction_loss(const ModelSpec& model, const ParamSet& params, const TaskView& task,
                       const Tensor& x, const Tensor& y, const std::vector<int>& labels) {
  Tensor z = routed_features(model, params, task, x);
  Tensor out = head_forward(model, params, z);
  if (task.task->kind == Task::Kind::Regression) return ad::mse_loss(out, y.detached());
  return ad::softmax_cross_entropy(out, labels);
}

Tensor onehot_targets(const std::vector<int>& labels, std::size_t n_classes) {
  std::vector<double> v(labels.size() * n_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    v[i * n_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return Tensor({labels.size(), n_classes}, std::move(v));
}

BaseLearner ridge_adapt(const ModelSpec& model, const ParamSet& theta, const TaskView& task,
                        const InnerConfig& cfg, bool differentiable) {
  auto solve_head = [&]() {
    const Task& t = *task.task;
    Tensor z = routed_features(model, theta, task, t.support_x);
    const std::size_t c = z.shape()[1];
    Tensor targets = t.kind == Task::Kind::Regression
                         ? t.support_y.detached()
                         : onehot_targets(t.support_labels, model.head.output_dim);
    std::vector<double> reg(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) reg[i * c + i] = cfg.ridge_lambda;
    Tensor gram = ad::add(ad::matmul(ad::transpose(z), z), Tensor({c, c}, std::move(reg)));
    return ad::solve(gram, ad::matmul(ad::transpose(z), targets));
  };

  BaseLearner learner;
  for (const std::string& name : theta.names_with_prefix("enc.")) {
    learner.w.insert(name, theta.at(name));
  }
  if (differentiable) {
    learner.w.insert("head.solution", solve_head());
  } else {
    ad::NoGradGuard no_grad;
    learner.w.insert("head.solution", solve_head());
  }
  learner.adapted = {"head.solution"};
  return learner;
}

}  // namespace

Tensor support_loss(const ModelSpec& model, const ParamSet& params, const TaskView& task) {
  const Task& t = *task.task;
  if (t.n_support() == 0) throw std::invalid_argument("support_loss: empty support set");
  return prediction_loss(model, params, task, t.support_x, t.support_y, t.support_labels);
}

BaseLearner inner_adapt(const ModelSpec& model, const ParamSet& theta, const TaskView& task,
                        const InnerConfig& cfg, bool differentiable) {
  if (cfg.kind == LearnerKind::Proto) {
    throw std::invalid_argument("inner_adapt: the prototype learner has no adaptation step");
  }
  if (cfg.kind == LearnerKind::Ridge) return ridge_adapt(model, theta, task, cfg, differentiable);
  if (cfg.inner_lr < 0.0 || cfg.inner_steps < 1) {
    throw std::invalid_argument("inner_adapt: inner_lr must be >= 0 and inner_steps >= 1");
  }

  BaseLearner learner;
  learner.w = theta;  // shares tensors; ANIL's encoder entries stay bit-identical
  learner.adapted = cfg.kind == LearnerKind::Maml ? theta.names() : theta.names_with_prefix("head.");
  if (learner.adapted.empty()) {
    throw std::invalid_argument("inner_adapt: no adaptable parameters for this learner");
  }

  Tape* tape = Tape::current();
  if (tape == nullptr) throw std::logic_error("inner_adapt: requires an active tape");

  const bool record_updates = differentiable;
  const bool graph_through_grad = differentiable && !cfg.first_order;
  for (int step = 0; step < cfg.inner_steps; ++step) {
    Tensor loss = support_loss(model, learner.w, task);
    std::vector<Tensor> wrt;
    wrt.reserve(learner.adapted.size());
    for (const std::string& name : learner.adapted) wrt.push_back(learner.w.at(name));
    std::vector<Tensor> grads = tape->gradient(loss, wrt, {graph_through_grad});
    for (std::size_t i = 0; i < learner.adapted.size(); ++i) {
      const std::string& name = learner.adapted[i];
      Tensor g = graph_through_grad ? grads[i] : grads[i].detached();
      Tensor updated;
      if (record_updates) {
        updated = ad::sub(learner.w.at(name), ad::scale(g, cfg.inner_lr));
      } else {
        ad::NoGradGuard no_grad;
        updated = ad::sub(learner.w.at(name), ad::scale(g, cfg.inner_lr));
        if (step + 1 < cfg.inner_steps) updated = tape->watch(updated);
      }
      learner.w.set(name, std::move(updated));
    }
  }
  return learner;
}

Tensor query_loss(const ModelSpec& model, const ParamSet& theta, const BaseLearner& learner,
                  const TaskView& task) {
  (void)theta;  // the learner carries every tensor the forward pass needs
  const Task& t = *task.task;
  if (t.n_query() == 0) throw std::invalid_argument("query_loss: empty query set");
  return prediction_loss(model, learner.w, task, t.query_x, t.query_y, t.query_labels);
}

Tensor proto_loss(const ModelSpec& model, const ParamSet& theta, const TaskView& task) {
  const Task& t = *task.task;
  if (t.kind != Task::Kind::Classification) {
    throw std::invalid_argument("proto_loss: requires a classification task");
  }
  if (t.n_query() == 0) throw std::invalid_argument("proto_loss: empty query set");
  Tensor zs = routed_features(model, theta, task, t.support_x);
  Tensor zq = routed_features(model, theta, task, t.query_x);
  Tensor prototypes = ad::group_mean_rows(zs, t.support_groups());
  Tensor logits = head_forward(ProtoFeatures{prototypes, zq});
  return ad::softmax_cross_entropy(logits, t.query_labels);
}

Tensor episode_loss(const ModelSpec& model, const ParamSet& theta, const TaskView& task,
                    const InnerConfig& cfg, bool differentiable) {
  if (cfg.kind == LearnerKind::Proto) return proto_loss(model, theta, task);
  BaseLearner learner = inner_adapt(model, theta, task, cfg, differentiable);
  return query_loss(model, theta, learner, task);
}

double baseline_meta_step(const ModelSpec& model, ParamSet& theta, const std::vector<Task>& tasks,
                          const InnerConfig& cfg, Adam& opt) {
  if (tasks.empty()) throw std::invalid_argument("baseline_meta_step: empty task batch");
  ParamSet grad_sum;
  double loss_sum = 0.0;
  for (const Task& task : tasks) {
    Tape tape;
    ParamSet watched;
    std::vector<Tensor> wrt;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      Tensor leaf = tape.watch(theta.tensor(i), theta.name(i));
      watched.insert(theta.name(i), leaf);
      wrt.push_back(leaf);
    }
    Tensor loss = episode_loss(model, watched, view(task), cfg, /*differentiable=*/true);
    if (!std::isfinite(loss.value())) {
      throw ad::NumericError("baseline_meta_step: non-finite task loss");
    }
    loss_sum += loss.value();
    std::vector<Tensor> grads = tape.gradient(loss, wrt);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (grad_sum.contains(theta.name(i))) {
        ad::NoGradGuard no_grad;
        grad_sum.set(theta.name(i), ad::add(grad_sum.at(theta.name(i)), grads[i].detached()));
      } else {
        grad_sum.insert(theta.name(i), grads[i].detached());
      }
    }
  }
  opt.step(theta, grad_sum);
  return loss_sum;
}

}  // namespace metashift
