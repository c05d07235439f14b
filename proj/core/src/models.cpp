#include "metashift/models.hpp"
#include <cstdlib>

#include <cmath>

namespace metashift {

using ad::ParamSet;
using ad::Tensor;

std::size_t EncoderSpec::param_count() const {
  std::size_t count = 0;
  std::size_t fan_in = input_dim;
  for (std::size_t width : hidden_dims) {
    count += (fan_in + 1) * width;
    fan_in = width;
  }
  return count;
}

FislParams FislParams::identity(std::size_t channels) {
  return {Tensor::ones({channels}), Tensor::zeros({channels})};
}

namespace {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (std::getenv("METASHIFT_INIT_TRUNC") != nullptr) {
    double sigma = 0.01;
    if (const char* s = std::getenv("METASHIFT_INIT_SIGMA")) sigma = std::atof(s);
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) {
      double x;
      do {
        x = rng.normal() * sigma;
      } while (std::abs(x) > 2.0 * sigma);
      v = x;
    }
    return Tensor({fan_in, fan_out}, std::move(w));
  }
  if (std::getenv("METASHIFT_INIT_FANIN") != nullptr) {
    double scale = 1.0;
    if (const char* s = std::getenv("METASHIFT_INIT_SCALE")) scale = std::atof(s);
    const double limit = scale / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-limit, limit);
    return Tensor({fan_in, fan_out}, std::move(w));
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = rng.uniform(-limit, limit);
  return Tensor({fan_in, fan_out}, std::move(w));
}

Tensor fanin_bias(std::size_t fan_in, std::size_t width, Rng& rng) {
  double scale = 1.0;
  if (const char* s = std::getenv("METASHIFT_INIT_SCALE")) scale = std::atof(s);
  const double limit = scale / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> b(width);
  for (double& v : b) v = rng.uniform(-limit, limit);
  return Tensor({width}, std::move(b));
}

}  // namespace

ParamSet init_params(const ModelSpec& model, Rng& rng) {
  ParamSet params;
  std::size_t fan_in = model.encoder.input_dim;
  if (fan_in == 0) throw std::invalid_argument("encoder: input_dim must be >= 1");
  for (std::size_t i = 0; i < model.encoder.hidden_dims.size(); ++i) {
    const std::size_t width = model.encoder.hidden_dims[i];
    if (width == 0) throw std::invalid_argument("encoder: hidden width must be >= 1");
    const std::string prefix = "enc." + std::to_string(i) + ".";
    params.insert(prefix + "weight", glorot_uniform(fan_in, width, rng));
    params.insert(prefix + "bias", std::getenv("METASHIFT_INIT_FANIN") != nullptr
                                       ? fanin_bias(fan_in, width, rng)
                                       : Tensor::zeros({width}));
    fan_in = width;
  }
  if (model.head.has_meta_params()) {
    params.insert("head.weight", glorot_uniform(fan_in, model.head.output_dim, rng));
    params.insert("head.bias", std::getenv("METASHIFT_INIT_FANIN") != nullptr
                                   ? fanin_bias(fan_in, model.head.output_dim, rng)
                                   : Tensor::zeros({model.head.output_dim}));
  }
  return params;
}

Tensor encode(const ModelSpec& model, const ParamSet& params, const Tensor& x) {
  if (x.rank() != 2 || x.shape()[1] != model.encoder.input_dim) {
    throw ad::ShapeError("encode: input " + ad::shape_str(x.shape()) + " incompatible with input_dim " +
                         std::to_string(model.encoder.input_dim));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < model.encoder.hidden_dims.size(); ++i) {
    const std::string prefix = "enc." + std::to_string(i) + ".";
    h = ad::relu(ad::add_rowvec(ad::matmul(h, params.at(prefix + "weight")),
                                params.at(prefix + "bias")));
  }
  return h;
}

Tensor fisl_apply(const FislParams& phi, const Tensor& z0) {
  if (z0.rank() != 2 || z0.shape()[1] != phi.channels()) {
    throw ad::ShapeError("fisl_apply: features " + ad::shape_str(z0.shape()) +
                         " vs channel count " + std::to_string(phi.channels()));
  }
  return ad::add_rowvec(ad::mul_rowvec(z0, phi.scale), phi.shift);
}

Tensor head_forward(const ModelSpec& model, const ParamSet& params, const Tensor& z) {
  switch (model.head.kind) {
    case HeadKind::LinearRegression:
    case HeadKind::LinearClassifier:
      if (!params.contains("head.weight")) {
        throw std::invalid_argument("head_forward: missing head parameters for a parametric head");
      }
      return ad::add_rowvec(ad::matmul(z, params.at("head.weight")), params.at("head.bias"));
    case HeadKind::RidgeClosedForm:
      if (!params.contains("head.solution")) {
        throw std::invalid_argument("head_forward: ridge head has no solved weights");
      }
      return ad::matmul(z, params.at("head.solution"));
    case HeadKind::PrototypeMetric:
      throw std::invalid_argument("head_forward: prototype head takes ProtoFeatures");
  }
  throw std::logic_error("head_forward: unknown head kind");
}

Tensor head_forward(const ProtoFeatures& f) {
  return ad::neg(ad::pairwise_sqdist(f.queries, f.prototypes));
}

}  // namespace metashift
