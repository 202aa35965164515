#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "doctest.h"
#include "noisecurve/curvature.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/losses.hpp"
#include "noisecurve/model.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/tape.hpp"
#include "noisecurve/tensor.hpp"
#include "noisecurve/theory.hpp"

using namespace noisecurve;

namespace {

Tensor rand_point(std::size_t dim, RngStream& rng) {
  Tensor x = Tensor::zeros({dim});
  for (std::size_t i = 0; i < dim; ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

// Quadratic loss x -> 0.5 x.Hx + g.x with analytic gradient.
LossSystem quadratic_system(const Tensor& H, const Tensor& g) {
  LossSystem sys;
  sys.loss = [H, g](const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += g[i] * x[i];
      for (std::size_t j = 0; j < x.size(); ++j)
        acc += 0.5 * x[i] * H.at(i, j) * x[j];
    }
    return acc;
  };
  sys.grad = [H, g](const Tensor& x) {
    Tensor out = Tensor::zeros({x.size()});
    for (std::size_t i = 0; i < x.size(); ++i) {
      double acc = g[i];
      for (std::size_t j = 0; j < x.size(); ++j) acc += H.at(i, j) * x[j];
      out[i] = acc;
    }
    return out;
  };
  sys.features = [](const Tensor& x) { return x; };
  sys.logits = [](const Tensor& x) { return x; };
  sys.head_row_norm = 1.0;
  return sys;
}

}  // namespace

TEST_CASE("input_gradient matches finite differences and the tape") {
  RngStream rng(301, 0, 0);
  Model m = make_mlp(std::vector<std::size_t>{4, 7, 3}, 3, 19);
  const Tensor x = rand_point(4, rng);
  const int label = 1;

  const Tensor got = input_gradient(m, x, label);
  auto fn = [&](const Tensor& p) {
    LabeledBatch b;
    b.xs = {p};
    b.ys = {label};
    return softmax_loss(m, b);
  };
  const Tensor want = finite_difference_gradient(fn, x);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));

  CHECK_THROWS_AS((void)input_gradient(m, x, 5), Error);
  CHECK_THROWS_AS((void)input_gradient(m, x, -1), Error);
}

TEST_CASE("model_system exposes consistent observables") {
  RngStream rng(302, 0, 0);
  Model m = make_mlp(std::vector<std::size_t>{3, 5, 2}, 3, 23);
  LossSystem sys = model_system(m, 2);
  const Tensor x = rand_point(3, rng);

  LabeledBatch b;
  b.xs = {x};
  b.ys = {2};
  CHECK(sys.loss(x) == doctest::Approx(softmax_loss(m, b)).epsilon(1e-14));
  CHECK(sys.features(x) == features(m, x));
  CHECK(sys.logits(x) == logits(m, x));
  CHECK(sys.head_row_norm == head_row_norm_max(m));
  const Tensor g = sys.grad(x);
  const Tensor gi = input_gradient(m, x, 2);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(g[i] == doctest::Approx(gi[i]).epsilon(1e-12));
}

TEST_CASE("hvp is exact on quadratics") {
  RngStream rng(303, 0, 0);
  const std::size_t d = 4;
  Tensor H = Tensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      H.at(i, j) = v;
      H.at(j, i) = v;
    }
  LossSystem sys = quadratic_system(H, rand_point(d, rng));
  const Tensor x = rand_point(d, rng);
  const Tensor v = rand_point(d, rng);
  const Tensor hv = hvp(sys, x, v, 1e-3);
  for (std::size_t i = 0; i < d; ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < d; ++j) want += H.at(i, j) * v[j];
    CHECK(hv[i] == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("curvature_estimate on a constant loss is zero") {
  LossSystem flat;
  flat.loss = [](const Tensor&) { return 3.0; };
  flat.grad = [](const Tensor& x) { return Tensor::zeros({x.size()}); };
  flat.features = [](const Tensor& x) { return x; };
  flat.logits = [](const Tensor& x) { return x; };
  flat.head_row_norm = 1.0;
  RngStream rng(304, 0, 0);
  CHECK(curvature_estimate(flat, Tensor::zeros({3}), 50, 1e-2, rng) == 0.0);
  CHECK_THROWS_AS(
      (void)curvature_estimate(flat, Tensor::zeros({3}), 0, 1e-2, rng), Error);
}

TEST_CASE("exact_hessian recovers a quadratic and is symmetric") {
  RngStream rng(305, 0, 0);
  const std::size_t d = 5;
  Tensor H = Tensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = rng.uniform(-2.0, 2.0);
      H.at(i, j) = v;
      H.at(j, i) = v;
    }
  LossSystem sys = quadratic_system(H, rand_point(d, rng));
  const Tensor got = exact_hessian(sys, rand_point(d, rng));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(got.at(i, j) == doctest::Approx(H.at(i, j)).epsilon(1e-7));
      CHECK(got.at(i, j) == got.at(j, i));
    }

  LossSystem big = quadratic_system(Tensor::zeros({65, 65}),
                                    Tensor::zeros({65}));
  CHECK_THROWS_AS((void)exact_hessian(big, Tensor::zeros({65})), Error);
}

TEST_CASE("jacobi eigenvalues and sums") {
  Tensor d2 = Tensor::matrix(2, 2, {3.0, 0.0, 0.0, -4.0});
  std::vector<double> ev = jacobi_eigenvalues(d2);
  REQUIRE(ev.size() == 2);
  const double lo = std::min(ev[0], ev[1]);
  const double hi = std::max(ev[0], ev[1]);
  CHECK(lo == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(hi == doctest::Approx(3.0).epsilon(1e-12));

  EigSums s = eig_sums(ev);
  CHECK(s.sum_sq == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(s.sum_abs == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(s.trace == doctest::Approx(-1.0).epsilon(1e-12));

  // Off-diagonal 2x2 with known spectrum {3, 1}.
  Tensor r = Tensor::matrix(2, 2, {2.0, 1.0, 1.0, 2.0});
  EigSums rs = eig_sums(jacobi_eigenvalues(r));
  CHECK(rs.sum_sq == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(rs.trace == doctest::Approx(4.0).epsilon(1e-10));

  Tensor asym = Tensor::matrix(2, 2, {1.0, 0.5, -0.5, 1.0});
  CHECK_THROWS_AS((void)jacobi_eigenvalues(asym), Error);
  Tensor rect = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS((void)jacobi_eigenvalues(rect), Error);
}

TEST_CASE("stability_estimates trivial regimes") {
  RngStream rng(306, 0, 0);
  Model m = make_mlp(std::vector<std::size_t>{3, 4, 2}, 2, 29);
  LossSystem sys = model_system(m, 0);
  const Tensor x = rand_point(3, rng);

  // A huge ball catches every draw.
  RngStream r1(306, 1, 0);
  StabilityEstimates inside = stability_estimates(sys, x, 0.1, 1e9, 200, r1);
  CHECK(inside.eta == 1.0);
  CHECK_FALSE(inside.any_outside);
  CHECK(inside.draws == 200);
  CHECK(inside.loss_clean == doctest::Approx(sys.loss(x)).epsilon(1e-14));

  // Degenerate arguments are rejected outright.
  RngStream r2(306, 2, 0);
  CHECK_THROWS_AS((void)stability_estimates(sys, x, 0.0, 1.0, 50, r2), Error);
  CHECK_THROWS_AS((void)stability_estimates(sys, x, 0.1, 0.0, 50, r2), Error);
  CHECK_THROWS_AS((void)stability_estimates(sys, x, 0.1, 1.0, 0, r2), Error);
}

TEST_CASE("class_dispersion closed forms") {
  std::vector<Tensor> one = {Tensor::vector({1.0, 2.0})};
  CHECK(class_dispersion(one) == 0.0);
  std::vector<Tensor> two = {Tensor::vector({0.0, 0.0}),
                             Tensor::vector({3.0, 4.0})};
  CHECK(class_dispersion(two) == doctest::Approx(5.0).epsilon(1e-12));
  std::vector<Tensor> three = {Tensor::vector({0.0}), Tensor::vector({1.0}),
                               Tensor::vector({-2.0})};
  CHECK(class_dispersion(three) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("prop2 and prop3 applicability gates") {
  // Features well inside delta_v: compact loss 0, prop2 applicable.
  Model m = make_mlp(std::vector<std::size_t>{2, 2}, 2, 31);
  m.head_w = Tensor::matrix(2, 2, {1, 0, -1, 0});
  m.head_b = Tensor::zeros({2});

  ClassFeatures f;
  f.by_class[0] = {Tensor::vector({3.0, 0.1}), Tensor::vector({3.0, -0.1})};
  f.by_class[1] = {Tensor::vector({-3.0, 0.0})};
  CentroidSet c;
  c[0] = Tensor::vector({3.0, 0.0});
  c[1] = Tensor::vector({-3.0, 0.0});

  Prop2Result p2 = prop2_check(f, c, 0.5);
  CHECK(p2.applicable);
  CHECK(p2.compact_value == 0.0);
  CHECK(p2.bound == 1.0);
  CHECK(p2.max_dispersion == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p2.holds);

  // One stray feature breaks applicability.
  ClassFeatures g = f;
  g.by_class[0].push_back(Tensor::vector({3.0, 2.0}));
  Prop2Result p2b = prop2_check(g, c, 0.5);
  CHECK_FALSE(p2b.applicable);

  // Margin side: boundary x0 = 0, centroids 3 away, delta_d 2 satisfied.
  LabeledBatch batch;
  batch.xs = {Tensor::vector({3.0, 0.1}), Tensor::vector({3.0, -0.1}),
              Tensor::vector({-3.0, 0.0})};
  batch.ys = {0, 0, 1};
  // Identity backbone so features == inputs.
  m.layers[0].w = Tensor::matrix(2, 2, {1, 0, 0, 1});
  m.layers[0].b = Tensor::zeros({2});
  m.layers[0].relu_after = false;

  Prop3Result p3 = prop3_check(m, batch, c, 0.5, 2.0);
  CHECK(p3.applicable);
  CHECK(p3.margin_part_applicable);       // delta_d > delta_v
  CHECK(p3.margin_bound == 1.5);
  CHECK(p3.min_margin >= 1.5);
  CHECK(p3.margin_holds);
  CHECK(p3.separation_part_applicable);   // delta_d > 2 delta_v
  CHECK(p3.max_intra < p3.min_inter);
  CHECK(p3.separation_holds);

  // delta_d inside (delta_v, 2 delta_v]: separation clause not claimed.
  Prop3Result narrow = prop3_check(m, batch, c, 0.5, 0.9);
  CHECK(narrow.applicable);
  CHECK(narrow.margin_part_applicable);
  CHECK_FALSE(narrow.separation_part_applicable);

  GeometryReport geo = geometry_report(m, batch, c, 0.5, 2.0);
  CHECK(geo.max_dispersion == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(geo.prop2.holds);
  CHECK(geo.prop3.margin_holds);
  CHECK(geo.dispersion.at(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(geo.margin.at(1) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("phi_rho ramp") {
  CHECK(phi_rho(-2.0, 1.0) == 1.0);
  CHECK(phi_rho(0.0, 1.0) == 1.0);
  CHECK(phi_rho(1.0, 1.0) == 0.0);
  CHECK(phi_rho(5.0, 1.0) == 0.0);
  CHECK(phi_rho(0.25, 1.0) == 0.75);
  CHECK_THROWS_AS((void)phi_rho(0.0, 0.0), Error);
}

TEST_CASE("empirical_margin_risk on scored values") {
  std::vector<double> h = {-1.0, 0.5, 2.0};
  // phi(-1) = 1, phi(0.5) = 0.5, phi(2) = 0 at rho 1.
  CHECK(empirical_margin_risk(h, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  std::vector<double> empty;
  CHECK_THROWS_AS((void)empirical_margin_risk(empty, 1.0), Error);
}

TEST_CASE("generalization slack closed form and monotonicity") {
  const double direct =
      generalization_complexity(1.0, 1.0, 10000, 0.5) +
      generalization_deviation(10000, 0.05);
  CHECK(generalization_slack(1.0, 1.0, 10000, 0.5, 0.05) == direct);

  // Deviation formula spelled out.
  CHECK(generalization_deviation(100, 0.1) ==
        doctest::Approx(3.0 * std::sqrt(std::log(20.0) / 200.0))
            .epsilon(1e-14));

  // More data never hurts.
  CHECK(generalization_slack(1.0, 1.0, 100000, 0.5, 0.05) <
        generalization_slack(1.0, 1.0, 10000, 0.5, 0.05));
  CHECK_THROWS_AS((void)generalization_slack(1.0, 1.0, 0, 0.5, 0.05), Error);
}

TEST_CASE("tau_estimate is the worst-class inside fraction") {
  ClassFeatures f;
  f.by_class[0] = {Tensor::vector({0.0, 0.0}), Tensor::vector({0.2, 0.0}),
                   Tensor::vector({5.0, 0.0}), Tensor::vector({0.0, 0.1})};
  f.by_class[1] = {Tensor::vector({9.0, 0.0}), Tensor::vector({9.0, 0.3})};
  CentroidSet c;
  c[0] = Tensor::vector({0.0, 0.0});
  c[1] = Tensor::vector({9.0, 0.0});
  // Class 0: 3 of 4 inside radius 1; class 1: 2 of 2.
  CHECK(tau_estimate(f, c, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("theorem2_check on a hand-built scene") {
  // Identity-feature model in 2-d.
  Model m = make_mlp(std::vector<std::size_t>{2, 2}, 2, 37);
  m.layers[0].w = Tensor::matrix(2, 2, {1, 0, 0, 1});
  m.layers[0].b = Tensor::zeros({2});
  m.layers[0].relu_after = false;

  const Tensor centroid = Tensor::vector({1.0, 0.0});
  std::vector<Tensor> train = {Tensor::vector({0.1, 0.0}),
                               Tensor::vector({0.0, -0.2}),
                               Tensor::vector({0.3, 0.3})};
  std::vector<Tensor> holdout = {Tensor::vector({0.2, 0.1}),
                                 Tensor::vector({5.0, 0.0})};

  GenBoundReport rep = theorem2_check(m, centroid, 2.0, 1.0, 0.05, train,
                                      holdout);
  // Every training point is deep inside (max d^2 = 1.04 < r^2 - rho = 3):
  // zero empirical risk.
  CHECK(rep.risk_train == 0.0);
  // Holdout point (5,0) escapes: true error 1/2.
  CHECK(rep.holdout_error == 0.5);
  CHECK(rep.lambda_cap ==
        doctest::Approx(std::sqrt(0.18)).epsilon(1e-12));
  CHECK(rep.radius_cap == 1.0);
  CHECK(rep.bound == rep.risk_train + rep.slack);
  CHECK(rep.holds == (rep.bound >= rep.holdout_error));

  // rho must stay below r^2.
  CHECK_THROWS_AS((void)theorem2_check(m, centroid, 1.0, 1.0, 0.05, train,
                                       holdout),
                  Error);
}

TEST_CASE("theorem1_check quadratic smoke") {
  RngStream rng(307, 0, 0);
  Tensor H = Tensor::matrix(2, 2, {0.8, 0.2, 0.2, 0.5});
  Tensor g = Tensor::vector({0.1, -0.3});
  LossSystem sys = quadratic_system(H, g);
  const Tensor x = Tensor::vector({0.2, -0.1});

  const double sigma = 0.3;
  // Second-moment-scaled ball radius as in the harness.
  double gn2 = 0.0;
  const Tensor gr = sys.grad(x);
  for (std::size_t i = 0; i < 2; ++i) gn2 += gr[i] * gr[i];
  EigSums s = eig_sums(jacobi_eigenvalues(H));
  const double delta = std::sqrt(sigma * sigma * gn2 +
                                 0.25 * std::pow(sigma, 4) *
                                     (2.0 * s.sum_sq + s.trace * s.trace));
  CurvatureBoundReport rep = theorem1_check(sys, x, sigma, delta, 2000, rng);
  CHECK(rep.upper_holds);
  CHECK(rep.lower_holds);
  CHECK(rep.sums.sum_sq == doctest::Approx(s.sum_sq).epsilon(1e-6));
  CHECK(rep.lower_lhs ==
        doctest::Approx(2.0 * s.sum_sq + s.sum_abs * s.sum_abs).epsilon(1e-6));
}
