#pragma once

#include <functional>
#include <string>

#include "metashift/param_set.hpp"
#include "metashift/tape.hpp"

namespace metashift::ad {

/// Scalar-valued function of a parameter set. Every call happens with the
/// parameters watched on a fresh active tape, so functions that differentiate
/// internally (inner adaptation, ascent steps) work on both sides of the
/// comparison. Must not be called while another tape is active.
using ScalarFn = std::function<Tensor(const ParamSet&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double ad_value = 0.0;
  double fd_value = 0.0;
};

/// Compares reverse-mode gradients of `fn` at `point` against per-coordinate
/// central differences with step `eps`. The error for a coordinate is
/// |ad - fd| / max(1, |ad|, |fd|); the worst one is returned.
GradCheckResult check_grad(const ScalarFn& fn, const ParamSet& point, double eps);

/// Convenience: a copy of `p` with coordinate `flat_index` of `name` shifted
/// by `delta`.
ParamSet perturbed(const ParamSet& p, const std::string& name, std::size_t flat_index,
                   double delta);

}  // namespace metashift::ad
