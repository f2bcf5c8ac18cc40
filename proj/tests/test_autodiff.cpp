#include <doctest.h>

#include <cmath>

#include "prefrl/optim.hpp"
#include "prefrl/tape.hpp"
#include "support/gradcheck.hpp"

using namespace prefrl;
using namespace prefrl::testing;

TEST_CASE("forward op anchor values") {
  Tape t;
  CHECK(t.value(t.sigmoid(t.constant(Tensor::scalar(0.0)))).value() == doctest::Approx(0.5));
  CHECK(t.value(t.clip(t.constant(Tensor::scalar(1.5)), 0.8, 1.2)).value() ==
        doctest::Approx(1.2));
  CHECK(t.value(t.clip(t.constant(Tensor::scalar(0.5)), 0.8, 1.2)).value() ==
        doctest::Approx(0.8));

  const Tensor sm = t.value(t.softmax(t.constant(Tensor::vec({0.0, 0.0, 0.0}))));
  for (double v : sm.data) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax rows sum to one within 1e-12") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    Tape t;
    Tensor x = random_tensor({3, 6}, rng, -5.0, 5.0);
    const Tensor y = t.value(t.softmax(t.constant(x)));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 6; ++c) s += y.at(r, c);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("forward evaluation is bit-deterministic") {
  Rng rng(11);
  const Tensor a = random_tensor({4, 4}, rng);
  const Tensor b = random_tensor({4, 4}, rng);
  auto run = [&] {
    Tape t;
    return t.value(t.softmax(t.matmul(t.tanh(t.constant(a)), t.constant(b)))).data;
  };
  CHECK(run() == run());
}

TEST_CASE("shape mismatch errors name the op and shapes") {
  Tape t;
  Var a = t.constant(Tensor::zeros({2, 3}));
  Var b = t.constant(Tensor::zeros({4}));
  CHECK_THROWS_WITH_AS(t.add(a, b), doctest::Contains("add"), Error);
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("matmul"), Error);
  CHECK_THROWS_AS(t.clip(a, 2.0, 1.0), Error);
}

TEST_CASE("non-finite outputs are rejected") {
  Tape t;
  CHECK_THROWS_WITH_AS(t.log(t.constant(Tensor::scalar(0.0))), doctest::Contains("log"), Error);
  CHECK_THROWS_AS(t.exp(t.constant(Tensor::scalar(1e9))), Error);
}

TEST_CASE("backward basics") {
  SUBCASE("mean gradient is 1/n") {
    Tape t;
    Var x = t.leaf("x", Tensor::vec({1.0, 2.0, 3.0, 4.0}), true);
    GradMap g = t.backward(t.mean(x));
    for (double v : g.at("x").data) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("sigmoid'(0) = 0.25") {
    Tape t;
    Var x = t.leaf("x", Tensor::scalar(0.0), true);
    GradMap g = t.backward(t.sigmoid(x));
    CHECK(g.at("x").value() == doctest::Approx(0.25));
  }
  SUBCASE("clip subgradient: zero outside, one inside, boundary inside") {
    Tape t;
    Var x = t.leaf("x", Tensor::vec({-2.0, 0.0, 1.0, 2.0}), true);
    GradMap g = t.backward(t.sum(t.clip(x, -1.0, 1.0)));
    CHECK(g.at("x").data == std::vector<double>{0.0, 1.0, 1.0, 0.0});
  }
  SUBCASE("frozen leaves report zero gradients") {
    Tape t;
    Var x = t.leaf("x", Tensor::scalar(2.0), true);
    Var f = t.leaf("frozen", Tensor::scalar(3.0), false);
    GradMap g = t.backward(t.mul(x, f));
    CHECK(g.at("x").value() == doctest::Approx(3.0));
    CHECK(g.at("frozen").value() == 0.0);
  }
  SUBCASE("second backward on a consumed graph errors") {
    Tape t;
    Var x = t.leaf("x", Tensor::scalar(1.0), true);
    Var loss = t.sigmoid(x);
    t.backward(loss);
    CHECK_THROWS_WITH_AS(t.backward(loss), doctest::Contains("consumed"), Error);
  }
  SUBCASE("non-scalar loss errors") {
    Tape t;
    Var x = t.leaf("x", Tensor::vec({1.0, 2.0}), true);
    CHECK_THROWS_AS(t.backward(x), Error);
  }
}

TEST_CASE("randomized gradient checks per op (>=100 instances each)") {
  for (const std::string& op : checked_ops()) {
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const GradCheckResult res = op_gradcheck_instance(op, derive_seed(1000 + i, op));
      worst = std::max(worst, res.max_rel_err);
    }
    INFO("op = ", op, " worst rel err = ", worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("pairwise objective gradient matches finite differences through the model") {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 5; ++i)
    worst = std::max(worst, bt_objective_gradcheck(900 + i).max_rel_err);
  CHECK(worst < 1e-4);
}

TEST_CASE("adam") {
  ModelDims dims{8, 6, 4};
  SUBCASE("zero gradients leave parameters unchanged") {
    ModelParams p = init_model_params(dims, 3);
    const ModelParams before = p;
    GradMap grads;
    for (const auto& [name, param] : p.tensors)
      grads[name] = Tensor::zeros(param.value.shape);
    AdamState adam;
    adam.step(p, grads, 1e-3);
    CHECK(bitwise_equal(p, before));
  }
  SUBCASE("single step with g=1 from fresh state moves by ~ -lr") {
    ModelParams p;
    p.tensors["w"] = Param{Tensor::scalar(0.7), true};
    GradMap grads{{"w", Tensor::scalar(1.0)}};
    AdamState adam;
    adam.step(p, grads, 1e-5);
    // bias-corrected mhat = 1, vhat = 1 -> delta = -lr / (1 + eps)
    CHECK(p.tensors["w"].value.value() == doctest::Approx(0.7 - 1e-5).epsilon(1e-9));
  }
  SUBCASE("frozen parameter with nonzero incoming gradient stays bit-identical") {
    ModelParams p = init_model_params(dims, 5);
    const Tensor frozen_before = p.tensor("modal_projector");
    GradMap grads;
    for (const auto& [name, param] : p.tensors)
      grads[name] = Tensor::full(param.value.shape, 0.5);
    AdamState adam;
    adam.step(p, grads, 1e-2);
    CHECK(bitwise_equal(p.tensor("modal_projector"), frozen_before));
    CHECK(!bitwise_equal(p.tensor("embed"), init_model_params(dims, 5).tensor("embed")));
  }
  SUBCASE("non-positive learning rate errors") {
    ModelParams p;
    p.tensors["w"] = Param{Tensor::scalar(0.0), true};
    GradMap grads{{"w", Tensor::scalar(1.0)}};
    AdamState adam;
    CHECK_THROWS_AS(adam.step(p, grads, 0.0), Error);
    CHECK_THROWS_AS(adam.step(p, grads, -1.0), Error);
  }
  SUBCASE("missing gradient for a trainable parameter errors") {
    ModelParams p;
    p.tensors["w"] = Param{Tensor::scalar(0.0), true};
    AdamState adam;
    CHECK_THROWS_WITH_AS(adam.step(p, GradMap{}, 1e-3), doctest::Contains("w"), Error);
  }
}
