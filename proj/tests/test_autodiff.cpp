#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "valence/errors.hpp"
#include "valence/gaussian.hpp"
#include "valence/optimizer.hpp"
#include "valence/rng.hpp"
#include "valence/tape.hpp"

using namespace valence;
using namespace valence::ad;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng,
                     double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = rng.normal() * scale;
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("tanh at origin and softmax symmetry") {
  Tape tape;
  Var x = tape.constant(Tensor::vector({0.0}));
  CHECK(tape.value(tape.tanh(x)).values[0] == 0.0);

  Var s = tape.softmax(tape.constant(Tensor::vector({1.7, 1.7})));
  CHECK(tape.value(s).values[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tape.value(s).values[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul matches the naive triple-loop oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    Tape tape;
    Var c = tape.matmul(tape.constant(a), tape.constant(b));
    auto ref = oracle::matmul(a.values, b.values, 2, 3, 4);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(tape.value(c).values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("shape mismatches raise errors that name the operation") {
  Tape tape;
  Var a = tape.constant(Tensor::vector({1, 2, 3}));
  Var b = tape.constant(Tensor::vector({1, 2}));
  CHECK_THROWS_WITH_AS(tape.add(a, b),
                       doctest::Contains("add"), ShapeError);
  Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  CHECK_THROWS_AS(tape.matmul(m, a), ShapeError);
  CHECK_THROWS_AS(tape.slice(a, 2, 5), ShapeError);
}

TEST_CASE("softmax rows sum to one and stay positive") {
  Rng rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    Tape tape;
    Tensor x = random_tensor({7}, rng, 10.0);
    const Tensor& y = tape.value(tape.softmax(tape.constant(x)));
    double total = 0.0;
    for (double v : y.values) {
      CHECK(v > 0.0);
      total += v;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("backward: simple analytic gradients") {
  SUBCASE("d tanh(w) / dw at 0 is 1") {
    ParamStore params;
    params.create("w", Tensor::vector({0.0}));
    Tape tape;
    Var loss = tape.sum(tape.tanh(tape.param(params, "w")));
    tape.backward(loss);
    CHECK(tape.grads().at("w").values[0] == doctest::Approx(1.0));
  }
  SUBCASE("d sum(w*w) / dw = 2w") {
    ParamStore params;
    params.create("w", Tensor::vector({1.0, 2.0}));
    Tape tape;
    Var w = tape.param(params, "w");
    tape.backward(tape.sum(tape.mul(w, w)));
    auto g = tape.grads().at("w");
    CHECK(g.values[0] == doctest::Approx(2.0));
    CHECK(g.values[1] == doctest::Approx(4.0));
  }
  SUBCASE("non-scalar loss is rejected") {
    ParamStore params;
    params.create("w", Tensor::vector({1.0, 2.0}));
    Tape tape;
    Var w = tape.param(params, "w");
    CHECK_THROWS_AS(tape.backward(w), ContractError);
  }
}

TEST_CASE("backward: two-layer MLP gradients match finite differences") {
  Rng rng(21);
  ParamStore params;
  params.create("w1", random_tensor({5, 4}, rng, 0.7));
  params.create("b1", random_tensor({5}, rng, 0.3));
  params.create("w2", random_tensor({3, 5}, rng, 0.7));
  params.create("b2", random_tensor({3}, rng, 0.3));
  const Tensor input = random_tensor({4}, rng);
  const Tensor target = random_tensor({3}, rng);

  auto loss_fn = [&](ParamStore& p) {
    Tape tape;
    Var x = tape.constant(input);
    Var h = tape.tanh(tape.add(tape.matmul(tape.param(p, "w1"), x),
                               tape.param(p, "b1")));
    Var y = tape.add(tape.matmul(tape.param(p, "w2"), h), tape.param(p, "b2"));
    Var d = tape.sub(y, tape.constant(target));
    return tape.scalar_value(tape.sum(tape.mul(d, d)));
  };

  Tape tape;
  Var x = tape.constant(input);
  Var h = tape.tanh(tape.add(tape.matmul(tape.param(params, "w1"), x),
                             tape.param(params, "b1")));
  Var y = tape.add(tape.matmul(tape.param(params, "w2"), h),
                   tape.param(params, "b2"));
  Var d = tape.sub(y, tape.constant(target));
  tape.backward(tape.sum(tape.mul(d, d)));

  CHECK(oracle::max_gradient_error(params, loss_fn, tape.grads()) <= 1e-4);
}

TEST_CASE("backward: every primitive participates in one checked graph") {
  Rng rng(22);
  ParamStore params;
  params.create("a", random_tensor({6}, rng));
  params.create("b", random_tensor({6}, rng, 0.5));
  params.create("m", random_tensor({3, 6}, rng, 0.5));
  Tensor mask = Tensor::vector({1.0, 0.0, 2.0, 1.0, 0.5, 1.0});

  auto build = [&](ParamStore& p, Tape& tape) {
    Var a = tape.param(p, "a");
    Var b = tape.param(p, "b");
    Var m = tape.param(p, "m");
    Var t1 = tape.tanh(a);
    Var t2 = tape.sigmoid(b);
    Var t3 = tape.relu(tape.sub(a, b));
    Var prod = tape.mul(t1, t2);
    Var quot = tape.div(t2, tape.affine(tape.mul(t3, t3), 1.0, 1.5));
    Var cat = tape.concat(std::vector<Var>{tape.slice(prod, 1, 3),
                                           tape.slice(quot, 0, 3)});
    Var mv = tape.matmul(m, tape.mask_mul(tape.add(prod, quot), mask));
    Var soft = tape.softmax(mv);
    Var logs = tape.log(tape.exp(soft));
    return tape.add(tape.scale(tape.mean(cat), 2.0),
                    tape.add(tape.sum(logs), tape.mean(mv)));
  };
  auto loss_fn = [&](ParamStore& p) {
    Tape tape;
    return tape.scalar_value(build(p, tape));
  };

  Tape tape;
  tape.backward(build(params, tape));
  CHECK(oracle::max_gradient_error(params, loss_fn, tape.grads()) <= 1e-4);
}

TEST_CASE("reparam sample") {
  SUBCASE("zero noise returns the mean") {
    DiagGaussian q(Tensor::vector({3.0}), Tensor::vector({4.0}));
    CHECK(reparam_sample(q, Tensor::vector({0.0})).values[0] == 3.0);
  }
  SUBCASE("standard normal passes noise through") {
    DiagGaussian q(Tensor::vector({0.0}), Tensor::vector({1.0}));
    CHECK(reparam_sample(q, Tensor::vector({2.0})).values[0] == 2.0);
  }
  SUBCASE("length mismatch is an error") {
    DiagGaussian q(Tensor::vector({0.0, 1.0}), Tensor::vector({1.0, 1.0}));
    CHECK_THROWS_AS(reparam_sample(q, Tensor::vector({0.0})), ShapeError);
  }
  SUBCASE("gradient through mean and log-variance matches finite differences") {
    Rng rng(31);
    ParamStore params;
    params.create("mu", random_tensor({4}, rng));
    params.create("lv", random_tensor({4}, rng, 0.4));
    const Tensor noise = random_tensor({4}, rng);
    auto build = [&](ParamStore& p, Tape& tape) {
      GaussianVar q{tape.param(p, "mu"), tape.param(p, "lv")};
      Var z = reparam_sample(tape, q, noise);
      return tape.sum(tape.mul(z, z));
    };
    auto loss_fn = [&](ParamStore& p) {
      Tape tape;
      return tape.scalar_value(build(p, tape));
    };
    Tape tape;
    tape.backward(build(params, tape));
    CHECK(oracle::max_gradient_error(params, loss_fn, tape.grads()) <= 1e-4);
  }
}

TEST_CASE("gaussian kl closed form") {
  DiagGaussian std1(Tensor::vector({0.0}), Tensor::vector({1.0}));
  CHECK(gaussian_kl(std1, std1) == doctest::Approx(0.0));

  DiagGaussian q(Tensor::vector({1.0}), Tensor::vector({1.0}));
  CHECK(gaussian_kl(q, std1) == doctest::Approx(0.5).epsilon(1e-12));

  DiagGaussian wide(Tensor::vector({0.0, 0.0}), Tensor::vector({1.0, 1.0}));
  CHECK_THROWS_AS(gaussian_kl(q, wide), ShapeError);
}

TEST_CASE("gaussian kl agrees with quadrature") {
  Rng rng(32);
  for (int rep = 0; rep < 8; ++rep) {
    const double mq = rng.uniform(-1.5, 1.5);
    const double vq = rng.uniform(0.3, 2.0);
    const double mp = rng.uniform(-1.5, 1.5);
    const double vp = rng.uniform(0.3, 2.0);
    DiagGaussian q(Tensor::vector({mq}), Tensor::vector({vq}));
    DiagGaussian p(Tensor::vector({mp}), Tensor::vector({vp}));
    const double ref = oracle::kl_quadrature(mq, vq, mp, vp);
    CHECK(std::fabs(gaussian_kl(q, p) - ref) <= 1e-6);
  }
}

TEST_CASE("gaussian kl is nonnegative and zero only at equality") {
  Rng rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    Tensor mu = random_tensor({3}, rng);
    Tensor var = Tensor::zeros({3});
    for (auto& v : var.values) v = rng.uniform(0.2, 3.0);
    DiagGaussian q(mu, var);
    Tensor mu2 = mu;
    Tensor var2 = var;
    mu2.values[rep % 3] += rng.uniform(0.01, 0.5);
    DiagGaussian p(mu2, var2);
    CHECK(gaussian_kl(q, p) > 0.0);
    CHECK(gaussian_kl(q, q) == doctest::Approx(0.0));
  }
}

TEST_CASE("tape-level kl and nll agree with the value-level forms") {
  Rng rng(34);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor mq = random_tensor({5}, rng);
    Tensor lq = random_tensor({5}, rng, 0.5);
    Tensor mp = random_tensor({5}, rng);
    Tensor lp = random_tensor({5}, rng, 0.5);
    Tensor x = random_tensor({5}, rng);
    Tape tape;
    GaussianVar q{tape.constant(mq), tape.constant(lq)};
    GaussianVar p{tape.constant(mp), tape.constant(lp)};
    const double kl_tape = tape.scalar_value(gaussian_kl(tape, q, p));
    const double nll_tape =
        tape.scalar_value(gaussian_nll(tape, tape.constant(x), p));
    const double kl_val = gaussian_kl(DiagGaussian::from_log_variance(mq, lq),
                                      DiagGaussian::from_log_variance(mp, lp));
    const double nll_val =
        gaussian_nll(x, DiagGaussian::from_log_variance(mp, lp));
    CHECK(kl_tape == doctest::Approx(kl_val).epsilon(1e-12));
    CHECK(nll_tape == doctest::Approx(nll_val).epsilon(1e-12));
  }
}

TEST_CASE("gaussian nll") {
  SUBCASE("density one at the mode gives zero") {
    const double var = 1.0 / (2.0 * M_PI);
    DiagGaussian p(Tensor::vector({0.7, -0.3}), Tensor::vector({var, var}));
    CHECK(std::fabs(gaussian_nll(Tensor::vector({0.7, -0.3}), p)) <= 1e-12);
  }
  SUBCASE("matches the direct density formula on random cases") {
    Rng rng(35);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t d = static_cast<std::size_t>(rng.uniform_int(1, 6));
      Tensor x = random_tensor({d}, rng);
      Tensor mu = random_tensor({d}, rng);
      Tensor var = Tensor::zeros({d});
      for (auto& v : var.values) v = rng.uniform(0.1, 3.0);
      double ref = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        ref -= std::log(oracle::normal_pdf(x.values[i], mu.values[i],
                                           var.values[i]));
      }
      CHECK(std::fabs(gaussian_nll(x, DiagGaussian(mu, var)) - ref) <= 1e-10);
    }
  }
  SUBCASE("gradient with respect to the mean matches finite differences") {
    Rng rng(36);
    ParamStore params;
    params.create("mu", random_tensor({3}, rng));
    params.create("lv", random_tensor({3}, rng, 0.3));
    const Tensor x = random_tensor({3}, rng);
    auto build = [&](ParamStore& p, Tape& tape) {
      GaussianVar g{tape.param(p, "mu"), tape.param(p, "lv")};
      return gaussian_nll(tape, tape.constant(x), g);
    };
    auto loss_fn = [&](ParamStore& p) {
      Tape tape;
      return tape.scalar_value(build(p, tape));
    };
    Tape tape;
    tape.backward(build(params, tape));
    CHECK(oracle::max_gradient_error(params, loss_fn, tape.grads()) <= 1e-4);
  }
}

TEST_CASE("optimizer step") {
  SUBCASE("plain sgd definition") {
    ParamStore params;
    params.create("w", Tensor::vector({1.0}));
    GradMap grads;
    grads.emplace("w", Tensor::vector({2.0}));
    Optimizer opt({OptimizerConfig::Kind::kSgd, 0.1});
    opt.step(params, grads);
    CHECK(params.get("w").values[0] == doctest::Approx(0.8));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore params;
    params.create("w", Tensor::vector({1.25, -0.5}));
    GradMap grads;
    grads.emplace("w", Tensor::zeros({2}));
    for (auto kind : {OptimizerConfig::Kind::kSgd, OptimizerConfig::Kind::kAdam}) {
      Optimizer opt({kind, 0.1});
      opt.step(params, grads);
      CHECK(params.get("w").values[0] == 1.25);
      CHECK(params.get("w").values[1] == -0.5);
    }
  }
  SUBCASE("sgd converges on a convex quadratic") {
    ParamStore params;
    params.create("w", Tensor::vector({0.0}));
    Optimizer opt({OptimizerConfig::Kind::kSgd, 0.4});
    for (int i = 0; i < 50; ++i) {
      const double w = params.get("w").values[0];
      GradMap grads;
      grads.emplace("w", Tensor::vector({2.0 * (w - 3.0)}));
      opt.step(params, grads);
    }
    CHECK(std::fabs(params.get("w").values[0] - 3.0) < 1e-2);
  }
  SUBCASE("non-finite gradients name the parameter") {
    ParamStore params;
    params.create("enc.w", Tensor::vector({1.0}));
    GradMap grads;
    grads.emplace("enc.w", Tensor::vector({std::nan("")}));
    Optimizer opt;
    CHECK_THROWS_WITH_AS(opt.step(params, grads),
                         doctest::Contains("enc.w"), TrainError);
  }
}

TEST_CASE("tape replay with identical inputs is bit-identical") {
  auto run = [] {
    Rng rng(derive_seed(7, "replay"));
    ParamStore params;
    params.create("w", random_tensor({4, 4}, rng));
    params.create("b", random_tensor({4}, rng));
    Tensor x = random_tensor({4}, rng);
    Tape tape;
    Var h = tape.tanh(tape.add(tape.matmul(tape.param(params, "w"),
                                           tape.constant(x)),
                               tape.param(params, "b")));
    Var loss = tape.sum(tape.mul(h, h));
    tape.backward(loss);
    auto g = tape.grads().at("w").values;
    g.push_back(tape.scalar_value(loss));
    return g;
  };
  CHECK(run() == run());
}

TEST_CASE("derived seeds differ across components and indexes") {
  CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
  CHECK(derive_seed(7, "a", 0) != derive_seed(7, "a", 1));
  CHECK(derive_seed(7, "a", 3) == derive_seed(7, "a", 3));
}

TEST_SUITE_END();
