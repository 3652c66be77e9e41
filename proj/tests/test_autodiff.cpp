#include "kwrec/autodiff.hpp"

#include <doctest.h>

#include <cmath>

using namespace kwrec;

TEST_SUITE_BEGIN("autodiff");

namespace {

Matrix scalar1x1(Scalar x) { return Matrix::Constant(1, 1, x); }

}  // namespace

TEST_CASE("affine: identity, bias-only, and a hand multiply") {
  ParamStore store;
  Tape tape;

  SUBCASE("identity weight passes x through") {
    Matrix x(2, 1);
    x << 3.0, -1.5;
    const auto out = tape.affine(tape.constant(Matrix::Identity(2, 2)),
                                 tape.constant(x),
                                 tape.constant(Matrix::Zero(2, 1)));
    CHECK(tape.value(out) == x);
  }
  SUBCASE("zero weight returns the bias") {
    Matrix b(2, 1);
    b << 0.25, -4.0;
    const auto out = tape.affine(tape.constant(Matrix::Zero(2, 3)),
                                 tape.constant(Matrix::Ones(3, 1)),
                                 tape.constant(b));
    CHECK(tape.value(out) == b);
  }
  SUBCASE("[[1,2],[3,4]] * [1,1] = [3,7]") {
    Matrix w(2, 2);
    w << 1.0, 2.0, 3.0, 4.0;
    const auto out =
        tape.affine(tape.constant(w), tape.constant(Matrix::Ones(2, 1)),
                    tape.constant(Matrix::Zero(2, 1)));
    CHECK(tape.value(out)(0, 0) == 3.0);
    CHECK(tape.value(out)(1, 0) == 7.0);
  }
  SUBCASE("shape mismatch names both shapes") {
    const auto w = tape.constant(Matrix::Zero(2, 3));
    const auto x = tape.constant(Matrix::Zero(2, 1));
    const auto b = tape.constant(Matrix::Zero(2, 1));
    CHECK_THROWS_WITH_AS(tape.affine(w, x, b),
                         doctest::Contains("2x3"), ShapeError);
  }
}

TEST_CASE("lstm_cell: zero fixed point, gate saturation, hand-rolled scalar") {
  ParamStore store;
  const auto bind_gate = [&](Tape& tape, Scalar wx, Scalar wh, Scalar b) {
    return LstmGate{tape.constant(scalar1x1(wx)), tape.constant(scalar1x1(wh)),
                    tape.constant(scalar1x1(b))};
  };

  SUBCASE("all-zero parameters map zero state to zero") {
    Tape tape;
    LstmWeights w{bind_gate(tape, 0, 0, 0), bind_gate(tape, 0, 0, 0),
                  bind_gate(tape, 0, 0, 0), bind_gate(tape, 0, 0, 0)};
    const LstmState prev{tape.constant(scalar1x1(0)),
                         tape.constant(scalar1x1(0))};
    const LstmState next =
        lstm_cell(tape, w, tape.constant(scalar1x1(0.7)), prev);
    CHECK(tape.value(next.c)(0, 0) == 0.0);
    CHECK(tape.value(next.h)(0, 0) == 0.0);
  }

  SUBCASE("saturated forget gate and closed input gate preserve the cell") {
    Tape tape;
    LstmWeights w{bind_gate(tape, 0, 0, -40.0),  // input gate shut
                  bind_gate(tape, 0, 0, +40.0),  // forget gate open
                  bind_gate(tape, 0.3, 0.1, 0.0), bind_gate(tape, 0, 0, 0)};
    const Scalar c_prev = 1.25;
    const LstmState prev{tape.constant(scalar1x1(0.5)),
                         tape.constant(scalar1x1(c_prev))};
    const LstmState next =
        lstm_cell(tape, w, tape.constant(scalar1x1(-0.4)), prev);
    CHECK(tape.value(next.c)(0, 0) == doctest::Approx(c_prev).epsilon(1e-12));
  }

  SUBCASE("one-unit cell matches scalar arithmetic") {
    // x = 0.5, h_prev = -0.25, c_prev = 0.3; every gate uses
    // pre = wx*x + wh*h_prev + b with small distinct weights.
    const Scalar x = 0.5, h_prev = -0.25, c_prev = 0.3;
    const auto sigmoid = [](Scalar v) { return 1.0 / (1.0 + std::exp(-v)); };
    const Scalar i = sigmoid(0.1 * x + 0.2 * h_prev + 0.05);
    const Scalar f = sigmoid(-0.3 * x + 0.1 * h_prev + 0.15);
    const Scalar g = std::tanh(0.4 * x - 0.2 * h_prev - 0.1);
    const Scalar o = sigmoid(0.25 * x + 0.3 * h_prev + 0.2);
    const Scalar c_expect = f * c_prev + i * g;
    const Scalar h_expect = o * std::tanh(c_expect);

    Tape tape;
    LstmWeights w{bind_gate(tape, 0.1, 0.2, 0.05),
                  bind_gate(tape, -0.3, 0.1, 0.15),
                  bind_gate(tape, 0.4, -0.2, -0.1),
                  bind_gate(tape, 0.25, 0.3, 0.2)};
    const LstmState prev{tape.constant(scalar1x1(h_prev)),
                         tape.constant(scalar1x1(c_prev))};
    const LstmState next = lstm_cell(tape, w, tape.constant(scalar1x1(x)), prev);
    CHECK(tape.value(next.c)(0, 0) == doctest::Approx(c_expect).epsilon(1e-14));
    CHECK(tape.value(next.h)(0, 0) == doctest::Approx(h_expect).epsilon(1e-14));
  }
}

TEST_CASE("masked_softmax: uniform, hard zero, hand values, invariants") {
  Tape tape;

  SUBCASE("equal logits give the uniform distribution") {
    const auto p =
        tape.masked_softmax(tape.constant(Matrix::Zero(4, 1)), {});
    for (Index i = 0; i < 4; ++i) CHECK(tape.value(p)(i, 0) == 0.25);
  }
  SUBCASE("a masked entry is exactly zero regardless of its logit") {
    Matrix z(2, 1);
    z << 5.0, 1.0;
    const auto p = tape.masked_softmax(tape.constant(z), {false, true});
    CHECK(tape.value(p)(0, 0) == 1.0);
    CHECK(tape.value(p)(1, 0) == 0.0);
  }
  SUBCASE("logits [1,2] match the closed form") {
    Matrix z(2, 1);
    z << 1.0, 2.0;
    const auto p = tape.masked_softmax(tape.constant(z), {});
    const Scalar e = std::exp(1.0);
    CHECK(tape.value(p)(0, 0) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-15));
    CHECK(tape.value(p)(1, 0) == doctest::Approx(e / (1.0 + e)).epsilon(1e-15));
    CHECK(tape.value(p)(0, 0) == doctest::Approx(0.2689414).epsilon(1e-6));
  }
  SUBCASE("all entries masked is an error") {
    CHECK_THROWS_AS(
        tape.masked_softmax(tape.constant(Matrix::Zero(2, 1)), {true, true}),
        InvalidMaskError);
  }
  SUBCASE("sums to one and is shift invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const Index k = 2 + rng.uniform_int(8);
      Matrix z(k, 1);
      std::vector<bool> mask(static_cast<std::size_t>(k), false);
      for (Index i = 0; i < k; ++i) {
        z(i, 0) = rng.uniform(-4.0, 4.0);
        mask[static_cast<std::size_t>(i)] = rng.uniform01() < 0.3;
      }
      mask[0] = false;  // keep at least one unmasked
      const auto p = tape.masked_softmax(tape.constant(z), mask);
      CHECK(tape.value(p).sum() == doctest::Approx(1.0).epsilon(1e-12));
      const Scalar shift = rng.uniform(-3.0, 3.0);
      const auto p2 = tape.masked_softmax(
          tape.constant((z.array() + shift).matrix()), mask);
      Index argmax1 = 0, argmax2 = 0;
      for (Index i = 0; i < k; ++i) {
        CHECK(std::abs(tape.value(p2)(i, 0) - tape.value(p)(i, 0)) < 1e-12);
        if (tape.value(p)(i, 0) > tape.value(p)(argmax1, 0)) argmax1 = i;
        if (tape.value(p2)(i, 0) > tape.value(p2)(argmax2, 0)) argmax2 = i;
      }
      // A constant shift of the unmasked logits never moves the greedy pick.
      CHECK(argmax1 == argmax2);
    }
  }
}

TEST_CASE("backward: analytic examples and the unused-parameter contract") {
  SUBCASE("d/dx x^2 = 2x at x=3") {
    ParamStore store;
    store.create("x", 1, 1)(0, 0) = 3.0;
    Tape tape;
    const auto out = tape.square(tape.param(store, "x"));
    const GradMap grads = tape.backward(out, store);
    CHECK(grads.at("x")(0, 0) == 6.0);
  }
  SUBCASE("a parameter the loss never touches gets a zero gradient") {
    ParamStore store;
    store.create("used", 1, 1)(0, 0) = 2.0;
    store.create("unused", 3, 2).setConstant(1.0);
    Tape tape;
    const auto out = tape.square(tape.param(store, "used"));
    const GradMap grads = tape.backward(out, store);
    CHECK(grads.at("unused").isZero(0.0));
    CHECK(grads.at("unused").rows() == 3);
  }
  SUBCASE("non-scalar output is rejected") {
    ParamStore store;
    Tape tape;
    const auto v = tape.constant(Matrix::Zero(2, 1));
    CHECK_THROWS_AS(tape.backward(v, store), ArgumentError);
  }
  SUBCASE("composite mean((affine(tanh x) - y)^2) matches finite differences") {
    ParamStore store;
    Rng rng(11);
    init_uniform_fan_in(store.create("W", 3, 4), 4, rng);
    init_uniform_fan_in(store.create("b", 3, 1), 4, rng);
    init_uniform_fan_in(store.create("x", 4, 1), 4, rng);
    Matrix y(3, 1);
    y << 0.3, -0.2, 0.9;
    const LossBuilder loss = [&y](Tape& tape, const ParamStore& s) {
      const auto pred = tape.affine(tape.param(s, "W"),
                                    tape.tanh(tape.param(s, "x")),
                                    tape.param(s, "b"));
      return tape.mean(tape.square(tape.sub(pred, tape.constant(y))));
    };
    Rng probe(3);
    const FiniteDiffReport report = finite_diff_check(loss, store, 1e-5, 10, probe);
    CHECK(report.max_rel_error < 1e-6);
  }
}

TEST_CASE("adam_step: first-step magnitude, zero gradient, sign flip") {
  SUBCASE("first update is about -lr * sign(g)") {
    ParamStore store;
    Matrix& p = store.create("p", 2, 1);
    p << 1.0, -2.0;
    GradMap grads;
    Matrix g(2, 1);
    g << 0.5, -0.25;  // |g| >> eps
    grads.emplace("p", g);
    AdamState adam(AdamConfig{0.01, 0.9, 0.999, 1e-8});
    adam.step(store, grads);
    CHECK(store.at("p")(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(store.at("p")(1, 0) == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(adam.steps() == 1);
  }
  SUBCASE("zero gradient on a fresh state leaves parameters unchanged") {
    ParamStore store;
    store.create("p", 2, 2).setConstant(3.5);
    GradMap grads;
    grads.emplace("p", Matrix::Zero(2, 2));
    AdamState adam(AdamConfig{});
    adam.step(store, grads);
    CHECK(store.at("p") == Matrix::Constant(2, 2, 3.5));
  }
  SUBCASE("g then -g: second moments match the g,g run; first moment decays") {
    const auto run = [](Scalar second_sign) {
      ParamStore store;
      store.create("p", 1, 1)(0, 0) = 0.0;
      AdamState adam(AdamConfig{});
      GradMap grads;
      grads.emplace("p", scalar1x1(0.8));
      adam.step(store, grads);
      grads.at("p")(0, 0) = second_sign * 0.8;
      adam.step(store, grads);
      return adam;
    };
    const AdamState flipped = run(-1.0);
    const AdamState same = run(+1.0);
    CHECK(flipped.second_moments().at("p")(0, 0) ==
          same.second_moments().at("p")(0, 0));
    // m after (g, -g) is -(1-b1)^2 g: far smaller than after step one.
    CHECK(std::abs(flipped.first_moments().at("p")(0, 0)) ==
          doctest::Approx(0.01 * 0.8).epsilon(1e-12));
  }
  SUBCASE("lr = 0 never changes parameters") {
    ParamStore store;
    store.create("p", 2, 1) << 1.0, 2.0;
    const Matrix before = store.at("p");
    AdamState adam(AdamConfig{0.0, 0.9, 0.999, 1e-8});
    GradMap grads;
    Matrix g(2, 1);
    g << 123.0, -7.0;
    grads.emplace("p", g);
    for (int i = 0; i < 5; ++i) adam.step(store, grads);
    CHECK(store.at("p") == before);
  }
  SUBCASE("shape mismatch is a shape error") {
    ParamStore store;
    store.create("p", 2, 1);
    GradMap grads;
    grads.emplace("p", Matrix::Zero(3, 1));
    AdamState adam(AdamConfig{});
    CHECK_THROWS_AS(adam.step(store, grads), ShapeError);
  }
}

TEST_CASE("finite_diff_check: quadratic loss is exact to rounding") {
  ParamStore store;
  Rng rng(5);
  Matrix& p = store.create("p", 4, 1);
  for (Index i = 0; i < 4; ++i) p(i, 0) = rng.uniform(-1.0, 1.0);
  const LossBuilder loss = [](Tape& tape, const ParamStore& s) {
    return tape.sum(tape.square(tape.param(s, "p")));
  };
  Rng probe(17);
  const FiniteDiffReport report = finite_diff_check(loss, store, 1e-5, 4, probe);
  CHECK(report.max_rel_error < 1e-8);
  CHECK(report.probes.size() == 4);
}

TEST_CASE("elementwise primitives agree with finite differences") {
  ParamStore store;
  Rng rng(23);
  init_uniform_fan_in(store.create("a", 3, 2), 2, rng);
  init_uniform_fan_in(store.create("v", 2, 1), 2, rng);
  store.at("a").array() += 1.5;  // keep log() arguments positive

  const LossBuilder loss = [](Tape& tape, const ParamStore& s) {
    const auto a = tape.param(s, "a");
    const auto v = tape.param(s, "v");
    const auto mixed = tape.add_rowwise(tape.sigmoid(a), v);
    const auto logged = tape.log(tape.add(
        tape.square(mixed), tape.constant(Matrix::Constant(3, 2, 0.5))));
    const auto rowpick = tape.row(tape.mul(logged, logged), 1);
    return tape.add(tape.mean(logged),
                    tape.scale(tape.pick(rowpick, 0), 0.25));
  };
  Rng probe(29);
  const FiniteDiffReport report = finite_diff_check(loss, store, 1e-5, 8, probe);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_SUITE_END();
