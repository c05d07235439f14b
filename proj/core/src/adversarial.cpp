#include "metashift/adversarial.hpp"

#include "metashift/tape.hpp"

#include <cmath>
#include <limits>

namespace metashift {

using ad::ParamSet;
using ad::Tape;
using ad::Tensor;

double transport_cost(const Tensor& z0, const Tensor& z, int y0, int y) {
  if (z0.shape() != z.shape()) {
    throw ad::ShapeError("transport_cost: shape mismatch " + ad::shape_str(z0.shape()) + " vs " +
                         ad::shape_str(z.shape()));
  }
  if (y0 != y) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    const double d = z0.at(i) - z.at(i);
    s += d * d;
  }
  return 0.5 * s;
}

double transport_cost(const Tensor& z0, const Tensor& z, const std::vector<int>& y0,
                      const std::vector<int>& y) {
  if (z0.shape() != z.shape() || z0.rank() != 2) {
    throw ad::ShapeError("transport_cost: shape mismatch " + ad::shape_str(z0.shape()) + " vs " +
                         ad::shape_str(z.shape()));
  }
  const std::size_t n = z0.shape()[0], c = z0.shape()[1];
  if (y0.size() != n || y.size() != n) {
    throw ad::ShapeError("transport_cost: label count does not match batch size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y0[i] != y[i]) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = z0.at(i, j) - z.at(i, j);
      s += d * d;
    }
    total += 0.5 * s;
  }
  return total / static_cast<double>(n);
}

Tensor transport_cost_matched(const Tensor& z0, const Tensor& z) {
  if (z0.shape() != z.shape() || z0.rank() != 2) {
    throw ad::ShapeError("transport_cost_matched: shape mismatch " + ad::shape_str(z0.shape()) +
                         " vs " + ad::shape_str(z.shape()));
  }
  const double n = static_cast<double>(z0.shape()[0]);
  return ad::scale(ad::sum_all(ad::square(ad::sub(z0, z))), 0.5 / n);
}

Tensor surrogate_objective(const ModelSpec& model, const ParamSet& theta,
                           const BaseLearner* learner, const FislParams& phi, const Task& task,
                           double penalty_gamma) {
  if (penalty_gamma < 0.0) {
    throw std::invalid_argument("surrogate_objective: penalty must be non-negative");
  }
  Tensor loss, z0;
  if (learner != nullptr) {
    // The adapted model's own encoder defines the feature space the shift
    // acts on (it equals theta's encoder whenever the encoder is not adapted).
    z0 = encode(model, learner->w, task.query_x);
    Tensor z = fisl_apply(phi, z0);
    Tensor out = head_forward(model, learner->w, z);
    loss = task.kind == Task::Kind::Regression
               ? ad::mse_loss(out, task.query_y.detached())
               : ad::softmax_cross_entropy(out, task.query_labels);
  } else {
    // Metric path: prototypes and queries both ride through the shift.
    Tensor zs = fisl_apply(phi, encode(model, theta, task.support_x));
    z0 = encode(model, theta, task.query_x);
    Tensor zq = fisl_apply(phi, z0);
    Tensor prototypes = ad::group_mean_rows(zs, task.support_groups());
    loss = ad::softmax_cross_entropy(head_forward(ProtoFeatures{prototypes, zq}),
                                     task.query_labels);
  }
  Tensor cost = transport_cost_matched(z0, fisl_apply(phi, z0));
  Tensor objective = ad::sub(loss, ad::scale(cost, penalty_gamma));
  if (!std::isfinite(objective.value())) {
    throw ad::NumericError("surrogate_objective: non-finite value");
  }
  return objective;
}

FislParams max_phase(const ModelSpec& model, const ParamSet& theta, const FislParams& phi,
                     const Task& adapt_task, const AdvConfig& adv, const InnerConfig& inner) {
  if (adv.ascent_eta < 0.0 || adv.ascent_steps < 1) {
    throw std::invalid_argument("max_phase: ascent_eta must be >= 0 and ascent_steps >= 1");
  }
  Tape* tape = Tape::current();
  if (tape == nullptr) throw std::logic_error("max_phase: requires an active tape");

  BaseLearner learner;
  const bool is_proto = inner.kind == LearnerKind::Proto;
  if (!is_proto) {
    learner = inner_adapt(model, theta, view(adapt_task), inner, adv.phi_second_order);
  }

  FislParams current = phi;
  for (int step = 0; step < adv.ascent_steps; ++step) {
    Tensor objective = surrogate_objective(model, theta, is_proto ? nullptr : &learner, current,
                                           adapt_task, adv.penalty_gamma);
    std::vector<Tensor> grads =
        tape->gradient(objective, {current.scale, current.shift}, {adv.phi_second_order});
    if (!grads[0].all_finite() || !grads[1].all_finite()) {
      throw ad::NumericError("max_phase: non-finite ascent gradient at step " +
                             std::to_string(step));
    }
    if (!adv.phi_second_order) {
      grads[0] = grads[0].detached();
      grads[1] = grads[1].detached();
    }
    current.scale = ad::add(current.scale, ad::scale(grads[0], adv.ascent_eta));
    current.shift = ad::add(current.shift, ad::scale(grads[1], adv.ascent_eta));
  }
  return current;
}

StepStats adversarial_update(const ModelSpec& model, TrainState& state, const EpisodeTriple& triple,
                             const AdvConfig& adv, const InnerConfig& inner) {
  StepStats stats;
  ParamSet grad_acc;

  auto watch_theta = [&](Tape& tape, ParamSet& watched, std::vector<Tensor>& wrt) {
    for (std::size_t i = 0; i < state.theta.size(); ++i) {
      Tensor leaf = tape.watch(state.theta.tensor(i), state.theta.name(i));
      watched.insert(state.theta.name(i), leaf);
      wrt.push_back(leaf);
    }
  };
  auto accumulate = [&](const std::vector<std::string>& names, const std::vector<Tensor>& grads) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (grad_acc.contains(names[i])) {
        ad::NoGradGuard no_grad;
        grad_acc.set(names[i], ad::add(grad_acc.at(names[i]), grads[i].detached()));
      } else {
        grad_acc.insert(names[i], grads[i].detached());
      }
    }
  };

  // Ascent plus pseudo-task loss, one recording.
  {
    Tape tape;
    ParamSet watched;
    std::vector<Tensor> wrt;
    watch_theta(tape, watched, wrt);
    FislParams phi_watched{tape.watch(state.phi.scale, "fisl.scale"),
                           tape.watch(state.phi.shift, "fisl.shift")};
    FislParams phi_prime = max_phase(model, watched, phi_watched, triple.adapt_task, adv, inner);
    PseudoTask pseudo = fisl_transform_task(phi_prime, triple.pseudo_source_task);
    Tensor loss = episode_loss(model, watched, view(pseudo), inner, /*differentiable=*/true);
    if (!std::isfinite(loss.value())) {
      throw ad::NumericError("adversarial_update: non-finite pseudo-task loss");
    }
    stats.pseudo_loss = loss.value();
    std::vector<std::string> names = state.theta.names();
    if (!adv.freeze_phi) {
      wrt.push_back(phi_watched.scale);
      wrt.push_back(phi_watched.shift);
      names.push_back("fisl.scale");
      names.push_back("fisl.shift");
    }
    accumulate(names, tape.gradient(loss, wrt));
  }

  // Clean-task loss.
  {
    Tape tape;
    ParamSet watched;
    std::vector<Tensor> wrt;
    watch_theta(tape, watched, wrt);
    Tensor loss = episode_loss(model, watched, view(triple.clean_task), inner,
                               /*differentiable=*/true);
    if (!std::isfinite(loss.value())) {
      throw ad::NumericError("adversarial_update: non-finite clean-task loss");
    }
    stats.clean_loss = loss.value();
    accumulate(state.theta.names(), tape.gradient(loss, wrt));
  }

  stats.total_loss = stats.clean_loss + stats.pseudo_loss;

  // Joint outer step on theta and phi.
  ParamSet joint = state.theta;
  joint.insert("fisl.scale", state.phi.scale);
  joint.insert("fisl.shift", state.phi.shift);
  state.opt.step(joint, grad_acc);
  for (const std::string& name : state.theta.names()) state.theta.set(name, joint.at(name));
  state.phi.scale = joint.at("fisl.scale");
  state.phi.shift = joint.at("fisl.shift");
  return stats;
}

}  // namespace metashift
