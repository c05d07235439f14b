#include <doctest.h>

#include "metashift/grad_check.hpp"
#include "metashift/models.hpp"
#include "metashift/tasks.hpp"

using namespace metashift;
using ad::ParamSet;
using ad::Tensor;

namespace {

ModelSpec small_model(std::size_t input_dim, std::vector<std::size_t> hidden,
                      HeadKind kind = HeadKind::LinearRegression, std::size_t out = 1) {
  ModelSpec m;
  m.encoder.input_dim = input_dim;
  m.encoder.hidden_dims = std::move(hidden);
  m.head.kind = kind;
  m.head.output_dim = out;
  return m;
}

}  // namespace

TEST_CASE("encoder parameter count equals sum (fan_in+1)*fan_out") {
  EncoderSpec enc;
  enc.input_dim = 1;
  enc.hidden_dims = {40, 40};
  CHECK(enc.param_count() == (1 + 1) * 40 + (40 + 1) * 40);
  Rng rng(0);
  ModelSpec m = small_model(1, {40, 40});
  ParamSet p = init_params(m, rng);
  std::size_t encoder_coords = 0;
  for (const auto& name : p.names_with_prefix("enc.")) encoder_coords += p.at(name).size();
  CHECK(encoder_coords == enc.param_count());
}

TEST_CASE("zero weights and biases encode everything to zero") {
  ModelSpec m = small_model(3, {4, 5});
  ParamSet p;
  p.insert("enc.0.weight", Tensor::zeros({3, 4}));
  p.insert("enc.0.bias", Tensor::zeros({4}));
  p.insert("enc.1.weight", Tensor::zeros({4, 5}));
  p.insert("enc.1.bias", Tensor::zeros({5}));
  Tensor z = encode(m, p, Tensor({2, 3}, {1, -2, 3, 0.5, 0, -1}));
  CHECK(z.same_values(Tensor::zeros({2, 5})));
}

TEST_CASE("identity one-layer config passes positive inputs through relu unchanged") {
  ModelSpec m = small_model(2, {2});
  ParamSet p;
  p.insert("enc.0.weight", Tensor({2, 2}, {1, 0, 0, 1}));
  p.insert("enc.0.bias", Tensor::zeros({2}));
  Tensor z = encode(m, p, Tensor({1, 2}, {1.0, 2.0}));
  CHECK(z.same_values(Tensor({1, 2}, {1.0, 2.0})));
}

TEST_CASE("encode gradient matches finite differences") {
  Rng rng(5);
  ModelSpec m = small_model(2, {5, 4});
  ParamSet p = init_params(m, rng);
  std::vector<double> xv(6);
  for (double& v : xv) v = rng.uniform(-1.0, 1.0);
  Tensor x({3, 2}, xv);
  auto fn = [&](const ParamSet& q) { return ad::mean_all(ad::square(encode(m, q, x))) ; };
  auto res = ad::check_grad(fn, p, 1e-5);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("fisl with unit scale and zero shift is the identity") {
  FislParams phi = FislParams::identity(3);
  Tensor z0({2, 3}, {0.3, -1.5, 2.0, 0.0, 7.25, -0.125});
  Tensor z = fisl_apply(phi, z0);
  CHECK(z.max_abs_diff(z0) == 0.0);
  CHECK(z.same_values(z0));
}

TEST_CASE("fisl with zero scale emits the shift for every row") {
  FislParams phi{Tensor::zeros({2}), Tensor({2}, {4.0, -1.0})};
  Tensor z = fisl_apply(phi, Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(z.at(i, 0) == 4.0);
    CHECK(z.at(i, 1) == -1.0);
  }
}

TEST_CASE("fisl hand value: scale (2,2), shift (1,-1) on (0.5,-1)") {
  FislParams phi{Tensor({2}, {2.0, 2.0}), Tensor({2}, {1.0, -1.0})};
  Tensor z = fisl_apply(phi, Tensor({1, 2}, {0.5, -1.0}));
  CHECK(z.at(0, 0) == 2.0);
  CHECK(z.at(0, 1) == -3.0);
}

TEST_CASE("fisl is affine: f(a z1 + b z2) = a f(z1) + b f(z2) - (a+b-1) shift") {
  Rng rng(9);
  FislParams phi{Tensor({3}, {rng.normal(), rng.normal(), rng.normal()}),
                 Tensor({3}, {rng.normal(), rng.normal(), rng.normal()})};
  std::vector<double> z1v(6), z2v(6);
  for (double& v : z1v) v = rng.normal();
  for (double& v : z2v) v = rng.normal();
  Tensor z1({2, 3}, z1v), z2({2, 3}, z2v);
  const double a = 0.7, b = -1.3;

  Tensor lhs = fisl_apply(phi, ad::add(ad::scale(z1, a), ad::scale(z2, b)));
  Tensor rhs = ad::add(ad::scale(fisl_apply(phi, z1), a), ad::scale(fisl_apply(phi, z2), b));
  rhs = ad::sub(rhs, ad::scale(ad::broadcast_rows(phi.shift, 2), a + b - 1.0));
  CHECK(lhs.max_abs_diff(rhs) < 1e-14);
}

TEST_CASE("fisl shifts feature means by the shift vector when scale is one") {
  Rng rng(13);
  FislParams phi = FislParams::identity(4);
  std::vector<double> beta(4);
  for (double& v : beta) v = rng.normal();
  phi.shift = Tensor({4}, beta);
  std::vector<double> zv(5 * 4);
  for (double& v : zv) v = rng.normal();
  Tensor z0({5, 4}, zv);
  Tensor z = fisl_apply(phi, z0);
  Tensor mean_shift = ad::scale(ad::sum_rows(ad::sub(z, z0)), 1.0 / 5.0);
  CHECK(mean_shift.max_abs_diff(phi.shift) < 1e-12);
}

TEST_CASE("linear head with zero weights predicts zero") {
  ModelSpec m = small_model(2, {3});
  ParamSet p;
  p.insert("head.weight", Tensor::zeros({3, 1}));
  p.insert("head.bias", Tensor::zeros({1}));
  Tensor out = head_forward(m, p, Tensor({4, 3}, std::vector<double>(12, 2.5)));
  CHECK(out.same_values(Tensor::zeros({4, 1})));
}

TEST_CASE("linear head with identity weights reproduces features") {
  ModelSpec m = small_model(2, {2}, HeadKind::LinearRegression, 2);
  ParamSet p;
  p.insert("head.weight", Tensor({2, 2}, {1, 0, 0, 1}));
  p.insert("head.bias", Tensor::zeros({2}));
  Tensor z({3, 2}, {1, 2, 3, 4, 5, 6});
  CHECK(head_forward(m, p, z).same_values(z));
}

TEST_CASE("parametric heads reject an empty parameter set") {
  ModelSpec m = small_model(2, {3});
  ParamSet empty;
  CHECK_THROWS_AS(head_forward(m, empty, Tensor::zeros({1, 3})), std::invalid_argument);
}

TEST_CASE("prototype head scores negative squared distances") {
  ProtoFeatures f{Tensor({2, 2}, {0, 0, 3, 4}), Tensor({1, 2}, {0, 0})};
  Tensor logits = head_forward(f);
  CHECK(logits.at(0, 0) == doctest::Approx(0.0));
  CHECK(logits.at(0, 1) == doctest::Approx(-25.0));
}

TEST_CASE("pseudo tasks keep labels and route forwards through the shift") {
  Rng rng(3);
  BlobDomain domain;
  Task task = sample_blob_task(domain, 3, 2, 4, rng);
  FislParams phi{Tensor({4}, {1, 2, 3, 4}), Tensor({4}, {0, 0, -1, 1})};
  PseudoTask pseudo = fisl_transform_task(phi, task);
  CHECK(pseudo.task.support_labels == task.support_labels);
  CHECK(pseudo.task.query_labels == task.query_labels);
  CHECK(pseudo.task.support_x.same_values(task.support_x));

  // Identity shift keeps every forward output bit-identical.
  ModelSpec m = small_model(2, {4}, HeadKind::LinearClassifier, 3);
  ParamSet p = init_params(m, rng);
  PseudoTask ident = fisl_transform_task(FislParams::identity(4), task);
  Tensor direct = head_forward(m, p, encode(m, p, task.query_x));
  Tensor routed = head_forward(m, p, fisl_apply(ident.route, encode(m, p, task.query_x)));
  CHECK(routed.same_values(direct));
}
