#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "progd/errors.hpp"
#include "progd/rng.hpp"
#include "progd/tensor.hpp"

using namespace progd;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = true) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t.raw_data()) v = rng.uniform(-1.5, 1.5);
  return t;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  Tape tape;
  Tensor i3 = Tensor::of({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b = Tensor::of({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor prod = matmul(tape, i3, b);
  for (std::size_t i = 0; i < b.numel(); ++i) CHECK(prod.data()[i] == b.data()[i]);

  Tensor a = Tensor::of({2, 2}, {1, 2, 3, 4});
  Tensor ones = Tensor::of({2, 1}, {1, 1});
  Tensor r = matmul(tape, a, ones);
  CHECK(r.at(0, 0) == doctest::Approx(3.0));
  CHECK(r.at(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul rejects mismatched inner dims") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(matmul(tape, a, b), DimensionError);
}

TEST_CASE("matmul gradient vs central finite differences") {
  Rng rng(42);
  Tensor a = random_tensor(rng, {4, 5});
  Tensor b = random_tensor(rng, {5, 3});
  auto rep = gradcheck::check_fn(
      [&](Tape& t) { return sum_all(t, matmul(t, a, b)); }, {a, b});
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("elementwise basics") {
  Tape tape;
  Tensor x = Tensor::scalar(-1.0);
  CHECK(relu(tape, x).value() == 0.0);

  Tensor y = Tensor::of({3}, {0.5, -2.0, 3.0});
  Tensor z = add(tape, y, Tensor::zeros({3}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(z.data()[i] == y.data()[i]);
}

TEST_CASE("elementwise broadcast is leading-dimension only") {
  Tape tape;
  Tensor a = Tensor::of({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::of({2}, {10, 20});
  Tensor s = add(tape, a, b);
  CHECK(s.at(0, 0) == 11);
  CHECK(s.at(0, 1) == 22);
  CHECK(s.at(1, 0) == 13);
  CHECK(s.at(1, 1) == 24);

  Tensor bad = Tensor::of({3}, {1, 2, 3});
  CHECK_THROWS_AS(add(tape, a, bad), DimensionError);
}

TEST_CASE("mul gradient vs finite differences on 3x3") {
  Rng rng(7);
  Tensor a = random_tensor(rng, {3, 3});
  Tensor b = random_tensor(rng, {3, 3});
  auto rep = gradcheck::check_fn([&](Tape& t) { return sum_all(t, mul(t, a, b)); }, {a, b});
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("broadcast gradients reduce over leading dims") {
  Rng rng(8);
  Tensor a = random_tensor(rng, {4, 3});
  Tensor b = random_tensor(rng, {3});
  auto rep = gradcheck::check_fn(
      [&](Tape& t) { return sum_all(t, mul(t, tanh(t, a), b)); }, {a, b});
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("softmax symmetry and stabilization") {
  Tape tape;
  Tensor x = Tensor::of({3}, {0, 0, 0});
  Tensor y = softmax_lastdim(tape, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(1.0 / 3));

  Tensor big = Tensor::of({2}, {1000, 1000});
  Tensor yb = softmax_lastdim(tape, big);
  CHECK(yb.data()[0] == doctest::Approx(0.5));
  CHECK(std::isfinite(yb.data()[0]));

  double sum = 0;
  Tensor m = Tensor::of({2, 4}, {1, 2, 3, 4, -1, 0, 1, 2});
  Tensor ym = softmax_lastdim(tape, m);
  for (std::size_t j = 0; j < 4; ++j) sum += ym.at(0, j);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax gradient on 2x4") {
  Rng rng(9);
  Tensor x = random_tensor(rng, {2, 4});
  Tensor w = random_tensor(rng, {2, 4}, false);  // random projection to scalar
  auto rep = gradcheck::check_fn(
      [&](Tape& t) { return sum_all(t, mul(t, softmax_lastdim(t, x), w)); }, {x});
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("max_over_set forward, singleton, and empty") {
  Tape tape;
  Tensor a = Tensor::of({2}, {1, 5});
  Tensor b = Tensor::of({2}, {3, 2});
  Tensor m = max_over_set(tape, {a, b});
  CHECK(m.data()[0] == 3);
  CHECK(m.data()[1] == 5);

  Tensor s = max_over_set(tape, {a});
  CHECK(s.data()[0] == a.data()[0]);
  CHECK(s.data()[1] == a.data()[1]);

  CHECK_THROWS_AS(max_over_set(tape, {}), EmptyNeighborhoodError);
}

TEST_CASE("max_over_set routes gradient to argmax, lowest index on ties") {
  Tape tape;
  Tensor a = Tensor::of({2}, {1.0, 2.0}, true);
  Tensor b = Tensor::of({2}, {1.0, 3.0}, true);
  Tensor loss = sum_all(tape, max_over_set(tape, {a, b}));
  tape.backward(loss);
  CHECK(a.grad()[0] == 1.0);  // tie at coordinate 0 goes to a
  CHECK(b.grad()[0] == 0.0);
  CHECK(a.grad()[1] == 0.0);
  CHECK(b.grad()[1] == 1.0);
}

TEST_CASE("max_over_set gradient vs finite differences") {
  Rng rng(10);
  std::vector<Tensor> xs = {random_tensor(rng, {4}), random_tensor(rng, {4}),
                            random_tensor(rng, {4})};
  auto rep = gradcheck::check_fn([&](Tape& t) { return sum_all(t, max_over_set(t, xs)); },
                                 {xs[0], xs[1], xs[2]});
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("layer_norm closed forms") {
  Tape tape;
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias = Tensor::zeros({4});
  Tensor c = Tensor::full({4}, 3.25);
  Tensor yc = layer_norm(tape, c, gain, bias);
  for (std::size_t i = 0; i < 4; ++i) CHECK(yc.data()[i] == doctest::Approx(0.0));

  Tensor g2 = Tensor::full({2}, 1.0);
  Tensor b2 = Tensor::zeros({2});
  Tensor x = Tensor::of({2}, {1, 3});
  Tensor y = layer_norm(tape, x, g2, b2);
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);  // (x - mu) / sqrt(var + eps)
  CHECK(y.data()[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm gradient") {
  Rng rng(11);
  Tensor x = random_tensor(rng, {3, 5});
  Tensor gain = random_tensor(rng, {5});
  Tensor bias = random_tensor(rng, {5});
  Tensor w = random_tensor(rng, {3, 5}, false);
  auto rep = gradcheck::check_fn(
      [&](Tape& t) { return sum_all(t, mul(t, layer_norm(t, x, gain, bias), w)); },
      {x, gain, bias});
  CHECK(rep.max_rel_err <= 1e-5);
}

TEST_CASE("backward populates reachable gradients") {
  Tape tape;
  Tensor x = Tensor::of({3}, {1, 2, 3}, true);
  Tensor y = sum_all(tape, x);
  tape.backward(y);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);

  Tape t2;
  Tensor z = Tensor::of({1}, {2.0}, true);
  Tensor w = sum_all(t2, mul(t2, z, z));
  t2.backward(w);
  CHECK(z.grad()[0] == 4.0);
}

TEST_CASE("gradients accumulate across fan-out") {
  Tape tape;
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = add(tape, x, x);  // dy/dx = 2
  tape.backward(sum_all(tape, y));
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("backward usage errors") {
  Tape tape;
  Tensor x = Tensor::of({2}, {1, 2}, true);
  Tensor y = mul(tape, x, x);
  CHECK_THROWS_AS(tape.backward(y), UsageError);  // non-scalar root

  Tensor s = sum_all(tape, y);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), UsageError);  // second backward rejected
  tape.clear();
  CHECK_THROWS_AS(tape.backward(s), UsageError);  // empty tape
}

TEST_CASE("evaluation is bit-identical across runs") {
  auto run = []() {
    Rng rng(123);
    Tape tape;
    tape.set_recording(false);
    Tensor x = random_tensor(rng, {4, 4}, false);
    Tensor w = random_tensor(rng, {4, 4}, false);
    Tensor y = softmax_lastdim(tape, matmul(tape, tanh(tape, x), w));
    return std::vector<double>(y.data().begin(), y.data().end());
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("every remaining primitive passes a finite-difference check") {
  Rng rng(12);
  SUBCASE("relu/tanh/log/scale/smooth_l1") {
    Tensor x = random_tensor(rng, {6});
    // keep log inputs positive and relu away from the kink
    for (double& v : x.raw_data()) v = 0.5 + std::abs(v);
    auto rep = gradcheck::check_fn(
        [&](Tape& t) {
          Tensor a = relu(t, x);
          Tensor b = tanh(t, a);
          Tensor c = log(t, x);
          Tensor d = scale(t, c, 0.7);
          Tensor e = smooth_l1(t, add(t, b, d), 1.0);
          return sum_all(t, e);
        },
        {x});
    CHECK(rep.max_rel_err <= 1e-5);
  }
  SUBCASE("concat/stack/row/element/transpose/reshape/mean_rows") {
    Tensor a = random_tensor(rng, {3});
    Tensor b = random_tensor(rng, {2});
    Tensor m = random_tensor(rng, {2, 5});
    auto rep = gradcheck::check_fn(
        [&](Tape& t) {
          Tensor cat = concat_lastdim(t, {a, b});            // [5]
          Tensor st = stack_rows(t, {cat, row(t, m, 1)});    // [2,5]
          Tensor tr = transpose(t, st);                      // [5,2]
          Tensor rs = reshape(t, tr, {2, 5});
          Tensor mr = mean_rows(t, add(t, rs, m));           // [5]
          return add(t, sum_all(t, mr), element(t, mr, 2));
        },
        {a, b, m});
    CHECK(rep.max_rel_err <= 1e-5);
  }
}

TEST_CASE("smooth_l1 closed forms") {
  Tape tape;
  Tensor x = Tensor::of({3}, {0.0, 0.5, 2.0});
  Tensor y = smooth_l1(tape, x, 1.0);
  CHECK(y.data()[0] == doctest::Approx(0.0));
  CHECK(y.data()[1] == doctest::Approx(0.125));
  CHECK(y.data()[2] == doctest::Approx(1.5));
}
