#include "metashift/optim.hpp"

#include <cmath>

#include "metashift/tape.hpp"

namespace metashift {

using ad::ParamSet;
using ad::Tensor;

void Adam::step(ParamSet& params, const ParamSet& grads) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const std::string& name = grads.name(i);
    const Tensor& g = grads.tensor(i);
    const Tensor& p = params.at(name);
    if (g.shape() != p.shape()) {
      throw ad::ShapeError("adam: gradient " + ad::shape_str(g.shape()) + " vs parameter " +
                           ad::shape_str(p.shape()) + " for " + name);
    }
    if (!m_.contains(name)) {
      m_.insert(name, Tensor::zeros(g.shape()));
      v_.insert(name, Tensor::zeros(g.shape()));
    }
    std::vector<double> m = m_.at(name).values();
    std::vector<double> v = v_.at(name).values();
    std::vector<double> out = p.values();
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double gj = g.at(j);
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      out[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
    m_.set(name, Tensor(g.shape(), std::move(m)));
    v_.set(name, Tensor(g.shape(), std::move(v)));
    Tensor updated(g.shape(), std::move(out));
    if (ad::finite_checks_enabled() && !updated.all_finite()) {
      throw ad::NumericError("adam: non-finite parameter after update of " + name);
    }
    params.set(name, std::move(updated));
  }
}

void Adam::restore(std::int64_t step_count, ParamSet m, ParamSet v) {
  step_count_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace metashift
