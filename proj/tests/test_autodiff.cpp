#include <doctest.h>

#include <cmath>

#include "metashift/grad_check.hpp"
#include "metashift/ops.hpp"
#include "metashift/rng.hpp"

using namespace metashift::ad;
using metashift::Rng;

namespace {

// Two-hidden-layer regression loss used as the workhorse smooth function.
Tensor mlp_loss(const ParamSet& p, const Tensor& x, const Tensor& y) {
  Tensor h1 = relu(add_rowvec(matmul(x, p.at("w1")), p.at("b1")));
  Tensor h2 = relu(add_rowvec(matmul(h1, p.at("w2")), p.at("b2")));
  Tensor out = add_rowvec(matmul(h2, p.at("w3")), p.at("b3"));
  return mse_loss(out, y.detached());
}

ParamSet random_mlp_params(std::size_t in, std::size_t h, Rng& rng) {
  auto mat = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.uniform(-0.8, 0.8);
    return Tensor({r, c}, std::move(v));
  };
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(0.1, 0.6);  // biases keep pre-activations off the kink
    return Tensor({n}, std::move(v));
  };
  ParamSet p;
  p.insert("w1", mat(in, h));
  p.insert("b1", vec(h));
  p.insert("w2", mat(h, h));
  p.insert("b2", vec(h));
  p.insert("w3", mat(h, 1));
  p.insert("b3", vec(1));
  return p;
}

}  // namespace

TEST_CASE("grad of w^2 at w=3 is 6") {
  Tape tape;
  Tensor w = tape.watch(Tensor::scalar(3.0), "w");
  Tensor f = square(w);
  auto g = tape.gradient(f, {w});
  CHECK(g[0].value() == 6.0);
}

TEST_CASE("second derivative of w^2 via grad-of-grad is 2") {
  Tape tape;
  Tensor w = tape.watch(Tensor::scalar(3.0), "w");
  Tensor f = square(w);
  auto g = tape.gradient(f, {w}, {/*create_graph=*/true});
  auto h = tape.gradient(g[0], {w});
  CHECK(h[0].value() == 2.0);
}

TEST_CASE("gradient requires a scalar output") {
  Tape tape;
  Tensor w = tape.watch(Tensor({2}, {1.0, 2.0}), "w");
  Tensor f = square(w);
  CHECK_THROWS_AS(tape.gradient(f, {w}), ShapeError);
}

TEST_CASE("unreachable parameters get zero gradients and a diagnostic") {
  Tape tape;
  Tensor used = tape.watch(Tensor::scalar(2.0), "used");
  Tensor unused = tape.watch(Tensor({3}, {1, 2, 3}), "unused");
  Tensor f = square(used);
  std::vector<std::size_t> unreachable;
  auto g = tape.gradient(f, {used, unused}, {}, &unreachable);
  CHECK(g[0].value() == 4.0);
  CHECK(g[1].same_values(Tensor::zeros({3})));
  REQUIRE(unreachable.size() == 1);
  CHECK(unreachable[0] == 1);
}

TEST_CASE("check_grad on a quadratic in 3 params is exact up to rounding") {
  ParamSet p;
  p.insert("a", Tensor::scalar(1.3));
  p.insert("b", Tensor::scalar(-0.4));
  p.insert("c", Tensor({2}, {2.0, 0.5}));
  auto fn = [](const ParamSet& q) {
    Tensor s = add(square(q.at("a")), square(q.at("b")));
    return add(s, sum_all(mul(q.at("c"), q.at("c"))));
  };
  auto res = check_grad(fn, p, 1e-5);
  CHECK(res.max_rel_err < 1e-9);
}

TEST_CASE("check_grad on a 2-hidden-layer MLP loss beats 1e-6") {
  Rng rng(7);
  ParamSet p = random_mlp_params(2, 6, rng);
  std::vector<double> xv(8), yv(4);
  for (double& v : xv) v = rng.uniform(-1.0, 1.0);
  for (double& v : yv) v = rng.uniform(-1.0, 1.0);
  Tensor x({4, 2}, xv), y({4, 1}, yv);
  auto fn = [&](const ParamSet& q) { return mlp_loss(q, x, y); };
  auto res = check_grad(fn, p, 1e-5);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("grad-of-grad matches finite differences of grad") {
  Rng rng(11);
  ParamSet p = random_mlp_params(1, 4, rng);
  std::vector<double> xv(3), yv(3);
  for (double& v : xv) v = rng.uniform(-1.0, 1.0);
  for (double& v : yv) v = rng.uniform(-1.0, 1.0);
  Tensor x({3, 1}, xv), y({3, 1}, yv);

  // Direction vector for the Hessian product.
  ParamSet dir;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<double> v(p.tensor(i).size());
    for (double& d : v) d = rng.uniform(-1.0, 1.0);
    dir.insert(p.name(i), Tensor(p.tensor(i).shape(), std::move(v)));
  }

  // AD side: gradient of <grad f, dir>.
  ParamSet hvp;
  {
    Tape tape;
    ParamSet watched;
    std::vector<Tensor> wrt;
    for (std::size_t i = 0; i < p.size(); ++i) {
      Tensor leaf = tape.watch(p.tensor(i), p.name(i));
      watched.insert(p.name(i), leaf);
      wrt.push_back(leaf);
    }
    Tensor loss = mlp_loss(watched, x, y);
    auto g = tape.gradient(loss, wrt, {/*create_graph=*/true});
    Tensor dot = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      dot = add(dot, sum_all(mul(g[i], dir.at(p.name(i)).detached())));
    }
    auto h = tape.gradient(dot, wrt);
    for (std::size_t i = 0; i < p.size(); ++i) hvp.insert(p.name(i), h[i].detached());
  }

  // FD side: (grad(p + eps dir) - grad(p - eps dir)) / (2 eps).
  const double eps = 1e-5;
  auto grad_at = [&](double sign) {
    ParamSet shifted;
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::vector<double> v = p.tensor(i).values();
      const auto& d = dir.at(p.name(i)).values();
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += sign * eps * d[j];
      shifted.insert(p.name(i), Tensor(p.tensor(i).shape(), std::move(v)));
    }
    Tape tape;
    ParamSet watched;
    std::vector<Tensor> wrt;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
      Tensor leaf = tape.watch(shifted.tensor(i), shifted.name(i));
      watched.insert(shifted.name(i), leaf);
      wrt.push_back(leaf);
    }
    Tensor loss = mlp_loss(watched, x, y);
    auto g = tape.gradient(loss, wrt);
    ParamSet out;
    for (std::size_t i = 0; i < shifted.size(); ++i) out.insert(shifted.name(i), g[i].detached());
    return out;
  };
  ParamSet gp = grad_at(1.0), gm = grad_at(-1.0);

  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::string& name = p.name(i);
    for (std::size_t j = 0; j < p.tensor(i).size(); ++j) {
      const double fd = (gp.at(name).at(j) - gm.at(name).at(j)) / (2.0 * eps);
      const double adv = hvp.at(name).at(j);
      worst = std::max(worst, std::abs(adv - fd) / std::max({1.0, std::abs(adv), std::abs(fd)}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("grad is linear in the objective") {
  Rng rng(3);
  ParamSet p = random_mlp_params(2, 5, rng);
  std::vector<double> xv(6), yv(3);
  for (double& v : xv) v = rng.uniform(-1.0, 1.0);
  for (double& v : yv) v = rng.uniform(-1.0, 1.0);
  Tensor x({3, 2}, xv), y({3, 1}, yv);
  const double a = 1.7, b = -0.6;

  Tape tape;
  ParamSet watched;
  std::vector<Tensor> wrt;
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor leaf = tape.watch(p.tensor(i), p.name(i));
    watched.insert(p.name(i), leaf);
    wrt.push_back(leaf);
  }
  Tensor f = mlp_loss(watched, x, y);
  Tensor g = sum_all(square(watched.at("w1")));
  Tensor combo = add(scale(f, a), scale(g, b));

  auto grad_f = tape.gradient(f, wrt);
  auto grad_g = tape.gradient(g, wrt);
  auto grad_combo = tape.gradient(combo, wrt);
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    Tensor expect = add(scale(grad_f[i], a), scale(grad_g[i], b));
    CHECK(grad_combo[i].max_abs_diff(expect) < 1e-12);
  }
}

TEST_CASE("tape replay reproduces recorded forwards bit-for-bit") {
  Rng rng(5);
  ParamSet p = random_mlp_params(2, 5, rng);
  std::vector<double> xv(6), yv(3);
  for (double& v : xv) v = rng.uniform(-1.0, 1.0);
  for (double& v : yv) v = rng.uniform(-1.0, 1.0);
  Tensor x({3, 2}, xv), y({3, 1}, yv);

  Tape tape;
  ParamSet watched;
  for (std::size_t i = 0; i < p.size(); ++i) {
    watched.insert(p.name(i), tape.watch(p.tensor(i), p.name(i)));
  }
  Tensor mid = relu(add_rowvec(matmul(x, watched.at("w1")), watched.at("b1")));
  const std::size_t mark = tape.add_checkpoint();
  Tensor loss = mlp_loss(watched, x, y);

  CHECK(tape.replay(loss).same_values(loss));
  CHECK(tape.replay(mid).same_values(mid));
  CHECK(tape.replay_from(mark, loss).same_values(loss));
}

TEST_CASE("a second tape on the same thread is rejected while one is active") {
  Tape tape;
  CHECK_THROWS_AS(Tape(), std::logic_error);
}

TEST_CASE("check_grad reports non-finite probe evaluations") {
  ParamSet p;
  p.insert("a", Tensor::scalar(0.0));
  auto fn = [](const ParamSet& q) { return log(add_scalar(q.at("a"), 1e-9)); };
  set_finite_checks(false);
  CHECK_THROWS_AS(check_grad(fn, p, 1e-5), NumericError);
  set_finite_checks(true);
}
