#include "metashift/grad_check.hpp"

#include <cmath>

namespace metashift::ad {

ParamSet perturbed(const ParamSet& p, const std::string& name, std::size_t flat_index,
                   double delta) {
  ParamSet out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.name(i) == name) {
      std::vector<double> v = p.tensor(i).values();
      v[flat_index] += delta;
      out.insert(p.name(i), Tensor(p.tensor(i).shape(), std::move(v)));
    } else {
      out.insert(p.name(i), p.tensor(i).detached());
    }
  }
  return out;
}

GradCheckResult check_grad(const ScalarFn& fn, const ParamSet& point, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("check_grad: eps must be positive");

  // Reverse-mode side.
  ParamSet grads;
  {
    Tape tape;
    ParamSet watched;
    std::vector<Tensor> wrt;
    for (std::size_t i = 0; i < point.size(); ++i) {
      Tensor leaf = tape.watch(point.tensor(i).detached(), point.name(i));
      watched.insert(point.name(i), leaf);
      wrt.push_back(leaf);
    }
    Tensor out = fn(watched);
    std::vector<Tensor> g = tape.gradient(out, wrt);
    for (std::size_t i = 0; i < point.size(); ++i) grads.insert(point.name(i), g[i].detached());
  }

  // Central differences, coordinate by coordinate. Each probe gets its own
  // tape: the function may differentiate internally (adaptation steps) even
  // when only its value is wanted.
  auto probe = [&fn](const ParamSet& at) {
    Tape tape;
    ParamSet watched;
    for (std::size_t i = 0; i < at.size(); ++i) {
      watched.insert(at.name(i), tape.watch(at.tensor(i).detached(), at.name(i)));
    }
    return fn(watched).value();
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const std::string& name = point.name(i);
    for (std::size_t j = 0; j < point.tensor(i).size(); ++j) {
      const double f_plus = probe(perturbed(point, name, j, eps));
      const double f_minus = probe(perturbed(point, name, j, -eps));
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("check_grad: function non-finite at perturbed point of " + name);
      }
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double ad = grads.at(name).at(j);
      const double rel = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = name;
        result.worst_index = j;
        result.ad_value = ad;
        result.fd_value = fd;
      }
    }
  }
  return result;
}

}  // namespace metashift::ad
