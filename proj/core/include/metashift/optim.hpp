#pragma once

#include <cstdint>

#include "metashift/param_set.hpp"

namespace metashift {

/// Adam over named parameters. Moment slots are created on first sight of a
/// name, so one instance can serve a joint set (e.g. encoder weights plus the
/// shift layer). Updates are plain value arithmetic, never recorded.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update over every entry of `grads`; `params` is modified in place.
  /// Parameters are scanned for NaN/Inf afterwards while finite checks are on.
  void step(ad::ParamSet& params, const ad::ParamSet& grads);

  double lr() const { return lr_; }
  std::int64_t step_count() const { return step_count_; }
  const ad::ParamSet& first_moments() const { return m_; }
  const ad::ParamSet& second_moments() const { return v_; }
  void restore(std::int64_t step_count, ad::ParamSet m, ad::ParamSet v);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  ad::ParamSet m_, v_;
};

}  // namespace metashift
