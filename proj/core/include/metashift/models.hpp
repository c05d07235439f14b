#pragma once

#include <string>
#include <vector>

#include "metashift/ops.hpp"
#include "metashift/param_set.hpp"
#include "metashift/rng.hpp"

namespace metashift {

/// Fully-connected feature encoder: relu(W x + b) stacked over hidden_dims.
/// The feature dimension C is the last hidden width.
struct EncoderSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims = {40, 40};

  std::size_t output_dim() const { return hidden_dims.back(); }
  std::size_t param_count() const;
};

enum class HeadKind { LinearRegression, LinearClassifier, RidgeClosedForm, PrototypeMetric };

struct HeadSpec {
  HeadKind kind = HeadKind::LinearRegression;
  std::size_t output_dim = 1;

  /// Prototype and ridge heads keep no trainable parameters in the meta set.
  bool has_meta_params() const {
    return kind == HeadKind::LinearRegression || kind == HeadKind::LinearClassifier;
  }
};

struct ModelSpec {
  EncoderSpec encoder;
  HeadSpec head;
};

/// Per-channel affine shift z = scale ⊙ z0 + shift applied to encoder output.
struct FislParams {
  ad::Tensor scale;  // (C,)
  ad::Tensor shift;  // (C,)

  static FislParams identity(std::size_t channels);
  std::size_t channels() const { return scale.size(); }
  FislParams detached() const { return {scale.detached(), shift.detached()}; }
};

/// Glorot-uniform weights, zero biases. Names: enc.<i>.weight / enc.<i>.bias,
/// then head.weight / head.bias for parametric heads.
ad::ParamSet init_params(const ModelSpec& model, Rng& rng);

/// x (batch, input_dim) -> features (batch, C); differentiable in params and x.
ad::Tensor encode(const ModelSpec& model, const ad::ParamSet& params, const ad::Tensor& x);

ad::Tensor fisl_apply(const FislParams& phi, const ad::Tensor& z0);

/// Parametric heads; `params` must hold head.* entries (ridge solutions live
/// under head.solution).
ad::Tensor head_forward(const ModelSpec& model, const ad::ParamSet& params, const ad::Tensor& z);

/// Metric head input: class prototypes plus query features.
struct ProtoFeatures {
  ad::Tensor prototypes;  // (n_way, C)
  ad::Tensor queries;     // (m, C)
};

/// Logits are negative squared euclidean distances to the prototypes.
ad::Tensor head_forward(const ProtoFeatures& f);

}  // namespace metashift
