#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "doctest.h"
#include "noisecurve/errors.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/tape.hpp"
#include "noisecurve/tensor.hpp"

using namespace noisecurve;

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, RngStream& rng,
                   double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Checks the tape gradient of a scalar program against central
// differences at the given leaf point.
void check_fd(const std::function<Var(Tape&, Var)>& program, const Tensor& x0,
              double tol = 2e-6) {
  Tape t;
  Var x = t.input(x0);
  Var out = program(t, x);
  REQUIRE(t.value(out).is_scalar());
  t.backward(out);
  const Tensor got = t.grad(x);

  auto fn = [&](const Tensor& p) {
    Tape s;
    Var xi = s.input(p);
    return s.value(program(s, xi)).item();
  };
  const Tensor want = finite_difference_gradient(fn, x0);
  CHECK(max_abs_diff(got, want) < tol);
}

}  // namespace

TEST_CASE("matmul forward hand value") {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var b = t.constant(Tensor::matrix(3, 2, {7, 8, 9, 10, 11, 12}));
  Var c = t.matmul(a, b);
  const Tensor& v = t.value(c);
  CHECK(v.rows() == 2);
  CHECK(v.cols() == 2);
  CHECK(v.at(0, 0) == 58.0);
  CHECK(v.at(0, 1) == 64.0);
  CHECK(v.at(1, 0) == 139.0);
  CHECK(v.at(1, 1) == 154.0);

  // A vector right operand acts as one column.
  Var x = t.constant(Tensor::vector({1, 0, -1}));
  Var y = t.matmul(a, x);
  CHECK(t.value(y)[0] == -2.0);
  CHECK(t.value(y)[1] == -2.0);
}

TEST_CASE("every op matches finite differences on smooth points") {
  RngStream rng(101, 0, 0);
  const Tensor x34 = rand_tensor({3, 4}, rng);
  const Tensor v5 = rand_tensor({5}, rng);

  // Constants are drawn once outside the program lambdas: the finite
  // difference probe re-runs the program, so anything random inside
  // would change between evaluations.
  const Tensor w23 = rand_tensor({2, 3}, rng);
  const Tensor w42 = rand_tensor({4, 2}, rng);
  const Tensor c34 = rand_tensor({3, 4}, rng);
  const Tensor v3 = rand_tensor({3}, rng);
  const Tensor m34 = rand_tensor({3, 4}, rng);

  // matmul, both sides.
  check_fd([&](Tape& t, Var x) {
    return t.sum(t.matmul(t.constant(w23), x));
  }, x34);
  check_fd([&](Tape& t, Var x) {
    return t.sum(t.matmul(x, t.constant(w42)));
  }, x34);

  check_fd([&](Tape& t, Var x) {
    Var c = t.constant(c34);
    return t.sum(t.mul(t.add(x, c), t.sub(x, c)));
  }, x34);

  check_fd([&](Tape& t, Var x) {
    return t.sum(t.offset(t.scale(x, -1.7), 0.3));
  }, x34);

  check_fd([&](Tape& t, Var x) {
    return t.sum(t.add_colvec(x, t.constant(v3)));
  }, x34);
  check_fd([&](Tape& t, Var x) {
    return t.sum(t.add_colvec(t.constant(m34), x));
  }, rand_tensor({3}, rng));

  check_fd([&](Tape& t, Var x) {
    return t.sum(t.gather_cols(x, {1, 3, 1}));
  }, x34);

  check_fd([&](Tape& t, Var x) { return t.sum(t.rowmeans(x)); }, x34);
  check_fd([&](Tape& t, Var x) { return t.sum(t.colnorms(x)); }, x34);

  // Keep relu/hinge/abs arguments away from the kink.
  Tensor far = x34;
  for (std::size_t i = 0; i < far.size(); ++i)
    far[i] += (far[i] >= 0.0 ? 0.5 : -0.5);
  check_fd([&](Tape& t, Var x) { return t.sum(t.relu(x)); }, far);
  check_fd([&](Tape& t, Var x) { return t.sum(t.hinge(x)); }, far);
  check_fd([&](Tape& t, Var x) { return t.sum(t.abs_value(x)); }, far);

  check_fd([&](Tape& t, Var x) {
    Var b = t.constant(Tensor::scalar(0.25));
    return t.maximum(t.sum(x), b);
  }, Tensor::scalar(0.8));
  check_fd([&](Tape& t, Var x) {
    Var b = t.constant(Tensor::scalar(2.0));
    return t.divide(t.sum(x), b);
  }, Tensor::scalar(0.8));
  check_fd([&](Tape& t, Var x) {
    Var b = t.constant(Tensor::scalar(0.4));
    return t.divide(b, t.sum(x));
  }, Tensor::scalar(0.8));

  const Tensor c5 = rand_tensor({5}, rng);
  check_fd([&](Tape& t, Var x) { return t.dot(x, t.constant(c5)); }, v5);
  check_fd([&](Tape& t, Var x) { return t.dot(x, x); }, v5);
  check_fd([&](Tape& t, Var x) { return t.norm(x); }, v5);
  check_fd([&](Tape& t, Var x) { return t.sum(t.slice_row(x, 2)); }, x34);
  check_fd([&](Tape& t, Var x) { return t.element(x, 3); }, v5);

  const Tensor aw = rand_tensor({2, 3}, rng);
  const Tensor ab = rand_tensor({2}, rng);
  check_fd([&](Tape& t, Var x) {
    return t.sum(t.affine(t.constant(aw), x, t.constant(ab)));
  }, x34);

  check_fd([&](Tape& t, Var x) {
    return t.softmax_cross_entropy(x, {0, 2, 1, 2});
  }, rand_tensor({3, 4}, rng));
}

TEST_CASE("kink conventions are pinned") {
  auto grad_of = [](std::function<Var(Tape&, Var)> f, Tensor x0) {
    Tape t;
    Var x = t.input(std::move(x0));
    t.backward(f(t, x));
    return t.grad(x);
  };

  CHECK(grad_of([](Tape& t, Var x) { return t.sum(t.relu(x)); },
                Tensor::vector({0.0, -0.0, 1.0}))[0] == 0.0);
  CHECK(grad_of([](Tape& t, Var x) { return t.sum(t.hinge(x)); },
                Tensor::vector({0.0}))[0] == 0.0);
  CHECK(grad_of([](Tape& t, Var x) { return t.sum(t.abs_value(x)); },
                Tensor::vector({0.0}))[0] == 0.0);

  // maximum ties route to the first argument.
  {
    Tape t;
    Var a = t.input(Tensor::scalar(1.5));
    Var b = t.input(Tensor::scalar(1.5));
    t.backward(t.maximum(a, b));
    CHECK(t.grad(a).item() == 1.0);
    CHECK(t.grad(b).item() == 0.0);
  }

  CHECK(grad_of([](Tape& t, Var x) { return t.norm(x); },
                Tensor::vector({0.0, 0.0}))[0] == 0.0);
}

TEST_CASE("softmax cross entropy closed forms") {
  {
    Tape t;
    Var z = t.constant(Tensor::zeros({10}));
    Var l = t.softmax_cross_entropy(z, {4});
    CHECK(t.value(l).item() == doctest::Approx(std::log(10.0)).epsilon(1e-15));
  }
  {
    // A 50-gap logit: loss = log(1 + 9 e^-50) ~ 9e-50, must not
    // underflow to garbage or overflow.
    Tensor z = Tensor::zeros({10});
    z[3] = 50.0;
    Tape t;
    Var l = t.softmax_cross_entropy(t.constant(z), {3});
    const double loss = t.value(l).item();
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-20);
  }
  {
    // Batch semantics: mean over columns.
    Tensor z = Tensor::zeros({2, 2});
    z.at(0, 0) = 3.0;  // column 0: logits (3, 0), label 0
    z.at(1, 1) = 1.0;  // column 1: logits (0, 1), label 0
    Tape t;
    Var l = t.softmax_cross_entropy(t.constant(z), {0, 0});
    const double c0 = std::log(1.0 + std::exp(-3.0));
    const double c1 = std::log(1.0 + std::exp(1.0));
    CHECK(t.value(l).item() == doctest::Approx(0.5 * (c0 + c1)).epsilon(1e-14));
  }
  {
    Tape t;
    Var z = t.constant(Tensor::zeros({3}));
    CHECK_THROWS_AS((void)t.softmax_cross_entropy(z, {3}), Error);
    CHECK_THROWS_AS((void)t.softmax_cross_entropy(z, {0, 1}), Error);
  }
}

TEST_CASE("backward rejects non-scalar seeds and repeats cleanly") {
  Tape t;
  Var x = t.input(Tensor::vector({1.0, 2.0}));
  Var y = t.scale(x, 3.0);
  CHECK_THROWS_AS(t.backward(y), Error);

  Var s = t.sum(y);
  t.backward(s);
  const Tensor g1 = t.grad(x);
  t.backward(s);
  const Tensor g2 = t.grad(x);
  CHECK(g1 == g2);
  CHECK(g1[0] == 3.0);

  // Seeding an earlier scalar node after the fact gives that node's
  // gradient, not an accumulation with the previous sweep.
  Var e = t.element(x, 1);
  t.backward(e);
  CHECK(t.grad(x)[0] == 0.0);
  CHECK(t.grad(x)[1] == 1.0);
}

TEST_CASE("forward replaces inputs in declaration order") {
  Tape t;
  Var a = t.input(Tensor::scalar(1.0));
  Var b = t.input(Tensor::scalar(2.0));
  Var c = t.constant(Tensor::scalar(10.0));
  Var out = t.add(t.mul(a, b), c);
  CHECK(t.value(out).item() == 12.0);

  std::vector<Tensor> repl = {Tensor::scalar(3.0), Tensor::scalar(5.0)};
  const Tensor r = t.forward(repl);
  CHECK(r.item() == 25.0);
  CHECK(t.value(out).item() == 25.0);

  t.set_input(a, Tensor::scalar(-1.0));
  t.recompute();
  CHECK(t.value(out).item() == 5.0);

  // Shape changes are rejected.
  std::vector<Tensor> bad = {Tensor::vector({1.0, 2.0}), Tensor::scalar(5.0)};
  CHECK_THROWS_AS((void)t.forward(bad), Error);
}

TEST_CASE("divide rejects zero denominators") {
  Tape t;
  Var a = t.constant(Tensor::scalar(1.0));
  Var z = t.constant(Tensor::scalar(0.0));
  CHECK_THROWS_AS((void)t.divide(a, z), Error);
}

TEST_CASE("finite_difference_gradient matches a closed form") {
  // f(x) = x . A x with symmetric A has gradient 2 A x.
  const Tensor A = Tensor::matrix(3, 3, {2, 1, 0, 1, 3, -1, 0, -1, 1});
  auto fn = [&](const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) acc += x[i] * A.at(i, j) * x[j];
    return acc;
  };
  const Tensor x0 = Tensor::vector({0.3, -0.7, 1.1});
  const Tensor g = finite_difference_gradient(fn, x0);
  for (std::size_t i = 0; i < 3; ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < 3; ++j) want += 2.0 * A.at(i, j) * x0[j];
    CHECK(g[i] == doctest::Approx(want).epsilon(1e-8));
  }

  auto bad = [](const Tensor&) { return std::nan(""); };
  CHECK_THROWS_AS((void)finite_difference_gradient(bad, x0), Error);
}
