#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "noisecurve/errors.hpp"
#include "noisecurve/model.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/tape.hpp"
#include "noisecurve/tensor.hpp"

using namespace noisecurve;

namespace {

Tensor rand_point(std::size_t dim, RngStream& rng) {
  Tensor x = Tensor::zeros({dim});
  for (std::size_t i = 0; i < dim; ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("make_mlp shapes, flags and init bounds") {
  const std::vector<std::size_t> dims = {5, 8, 3};
  Model m = make_mlp(dims, 4, 11);
  CHECK(m.in_dim() == 5);
  CHECK(m.feature_dim() == 3);
  CHECK(m.class_count() == 4);
  CHECK(m.layer_count() == 2);
  CHECK(m.layers[0].w.rows() == 8);
  CHECK(m.layers[0].w.cols() == 5);
  CHECK(m.layers[0].relu_after);
  CHECK(m.layers[1].w.rows() == 3);
  CHECK(m.layers[1].w.cols() == 8);
  CHECK_FALSE(m.layers[1].relu_after);
  CHECK(m.head_w.rows() == 4);
  CHECK(m.head_w.cols() == 3);

  // param_count matches the flattened vector.
  const std::vector<double> flat = flatten_params(m);
  CHECK(flat.size() == m.param_count());
  CHECK(flat.size() == 8 * 5 + 8 + 3 * 8 + 3 + 4 * 3 + 4);

  // Every weight sits inside +-1/sqrt(fan_in).
  auto inside = [](const Tensor& w, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (std::size_t i = 0; i < w.size(); ++i)
      if (std::abs(w[i]) > bound) return false;
    return true;
  };
  CHECK(inside(m.layers[0].w, 5.0));
  CHECK(inside(m.layers[1].w, 8.0));
  CHECK(inside(m.head_w, 3.0));

  // Same seed rebuilds identically, another seed differs.
  Model m2 = make_mlp(dims, 4, 11);
  CHECK(flatten_params(m2) == flat);
  Model m3 = make_mlp(dims, 4, 12);
  CHECK(flatten_params(m3) != flat);
}

TEST_CASE("feature pipeline matches a manual forward pass") {
  RngStream rng(21, 0, 0);
  Model m = make_mlp(std::vector<std::size_t>{3, 4, 2}, 3, 7);
  const Tensor x = rand_point(3, rng);

  auto affine = [](const BackboneLayer& l, const Tensor& in) {
    Tensor out = Tensor::zeros({l.w.rows()});
    for (std::size_t r = 0; r < l.w.rows(); ++r) {
      double acc = l.b[r];
      for (std::size_t c = 0; c < l.w.cols(); ++c)
        acc += l.w.at(r, c) * in[c];
      out[r] = acc;
    }
    if (l.relu_after)
      for (std::size_t r = 0; r < out.size(); ++r)
        out[r] = std::max(0.0, out[r]);
    return out;
  };

  const Tensor h1 = affine(m.layers[0], x);
  const Tensor q = affine(m.layers[1], h1);
  const Tensor got = features(m, x);
  for (std::size_t i = 0; i < q.size(); ++i)
    CHECK(got[i] == doctest::Approx(q[i]).epsilon(1e-14));

  CHECK(features_at_layer(m, x, 1) == features_at_layer(m, x, 1));
  CHECK(features_at_layer(m, x, 2) == got);
  CHECK(features_at_layer(m, x, 1).size() == 4);
  CHECK_THROWS_AS((void)features_at_layer(m, x, 0), Error);
  CHECK_THROWS_AS((void)features_at_layer(m, x, 3), Error);

  CHECK(logits(m, x) == logits_from_features(m, got));
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Tensor z = Tensor::vector({1.0, -2.0, 0.5, 3.0});
  Tensor p = softmax(z);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i] > 0.0);
    sum += p[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  Tensor zs = z;
  for (std::size_t i = 0; i < zs.size(); ++i) zs[i] += 100.0;
  Tensor ps = softmax(zs);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(ps[i] == doctest::Approx(p[i]).epsilon(1e-12));

  // Extreme logits stay finite.
  Tensor big = Tensor::vector({1000.0, 0.0});
  Tensor pb = softmax(big);
  CHECK(pb[0] == doctest::Approx(1.0));
  CHECK(pb[1] >= 0.0);
}

TEST_CASE("predict breaks ties toward the lowest class") {
  Model m = make_mlp(std::vector<std::size_t>{2, 2}, 3, 5);
  // Zero head makes every logit equal to its bias; equal biases tie.
  m.head_w = Tensor::zeros({3, 2});
  m.head_b = Tensor::zeros({3});
  CHECK(predict(m, Tensor::vector({0.3, -0.4})) == 0);
  m.head_b[2] = 1.0;
  CHECK(predict(m, Tensor::vector({0.3, -0.4})) == 2);
}

TEST_CASE("hyperplane distance hand values") {
  const Tensor W = Tensor::matrix(2, 2, {1, 0, -1, 0});
  const Tensor b = Tensor::zeros({2});

  // Boundary is x0 = 0; the point (2, 5) sits 2 away.
  CHECK(hyperplane_distance(W, b, Tensor::vector({2.0, 5.0}), 0, 1) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(hyperplane_distance(W, b, Tensor::vector({2.0, 5.0}), 1, 0) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(hyperplane_distance(W, b, Tensor::vector({0.0, 3.0}), 0, 1) == 0.0);

  // Bias shifts the boundary: z0 - z1 = 2 x0 + 1 -> distance |2x+1|/2.
  Tensor b2 = Tensor::vector({1.0, 0.0});
  CHECK(hyperplane_distance(W, b2, Tensor::vector({2.0, 0.0}), 0, 1) ==
        doctest::Approx(2.5).epsilon(1e-12));

  CHECK_THROWS_AS((void)hyperplane_distance(W, b, Tensor::vector({1.0, 1.0}), 0, 0),
                  Error);
  CHECK_THROWS_AS((void)hyperplane_distance(W, b, Tensor::vector({1.0, 1.0}), 0, 2),
                  Error);

  // Identical rows, equal biases: no boundary at all.
  const Tensor Wd = Tensor::matrix(2, 2, {1, 0, 1, 0});
  CHECK_THROWS_AS((void)hyperplane_distance(Wd, b, Tensor::vector({1.0, 1.0}), 0, 1),
                  Error);
  // Identical rows, different biases: boundary at infinity.
  CHECK_THROWS_AS((void)hyperplane_distance(Wd, b2, Tensor::vector({1.0, 1.0}), 0, 1),
                  Error);
}

TEST_CASE("scale_transform preserves predictions and scales features") {
  RngStream rng(31, 0, 0);
  Model m = make_mlp(std::vector<std::size_t>{4, 6, 3}, 3, 9);

  Model same = scale_transform(m, 1.0);
  CHECK(flatten_params(same) == flatten_params(m));

  Model twice = scale_transform(m, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = rand_point(4, rng);
    CHECK(predict(twice, x) == predict(m, x));
    const Tensor q = features(m, x);
    const Tensor q2 = features(twice, x);
    for (std::size_t i = 0; i < q.size(); ++i)
      CHECK(q2[i] == doctest::Approx(2.0 * q[i]).epsilon(1e-12));
  }

  // Only the last backbone layer and the head bias move.
  CHECK(twice.layers[0].w == m.layers[0].w);
  CHECK(twice.head_w == m.head_w);
  CHECK(twice.layers[1].w == 2.0 * m.layers[1].w);
  CHECK(twice.head_b == 2.0 * m.head_b);

  CHECK_THROWS_AS((void)scale_transform(m, 0.0), Error);
  CHECK_THROWS_AS((void)scale_transform(m, -1.0), Error);
}

TEST_CASE("head_row_norm_max picks the largest row") {
  Model m = make_mlp(std::vector<std::size_t>{2, 2}, 2, 3);
  m.head_w = Tensor::matrix(2, 2, {3, 4, 1, 0});
  CHECK(head_row_norm_max(m) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("tape forward agrees with the plain forward") {
  RngStream rng(41, 0, 0);
  Model m = make_mlp(std::vector<std::size_t>{3, 5, 4}, 3, 13);
  const Tensor x = rand_point(3, rng);

  for (bool trainable : {true, false}) {
    Tape t;
    ModelVars mv = trainable ? declare_trainable(t, m) : declare_frozen(t, m);
    Var xin = t.input(x);
    Var q = backbone_out(t, mv, xin);
    Var z = logits_out(t, mv, q);
    const Tensor qv = t.value(q);
    const Tensor zv = t.value(z);
    const Tensor qe = features(m, x);
    const Tensor ze = logits(m, x);
    for (std::size_t i = 0; i < qe.size(); ++i)
      CHECK(qv[i] == doctest::Approx(qe[i]).epsilon(1e-14));
    for (std::size_t i = 0; i < ze.size(); ++i)
      CHECK(zv[i] == doctest::Approx(ze[i]).epsilon(1e-14));
  }

  // Frozen parameters receive no gradient; trainable ones do.
  {
    Tape t;
    ModelVars mv = declare_trainable(t, m);
    Var xin = t.input(x);
    t.backward(t.sum(logits_out(t, mv, backbone_out(t, mv, xin))));
    double wsum = 0.0;
    const Tensor gw = t.grad(mv.head_w);
    for (std::size_t i = 0; i < gw.size(); ++i) wsum += std::abs(gw[i]);
    CHECK(wsum > 0.0);
  }
  {
    Tape t;
    ModelVars mv = declare_frozen(t, m);
    Var xin = t.input(x);
    t.backward(t.sum(logits_out(t, mv, backbone_out(t, mv, xin))));
    const Tensor gx = t.grad(xin);
    double xsum = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) xsum += std::abs(gx[i]);
    CHECK(xsum > 0.0);
    const Tensor gw = t.grad(mv.head_w);
    for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == 0.0);
  }
}

TEST_CASE("make_mlp rejects bad shapes") {
  CHECK_THROWS_AS((void)make_mlp(std::vector<std::size_t>{4}, 3, 1), Error);
  CHECK_THROWS_AS((void)make_mlp(std::vector<std::size_t>{4, 0, 2}, 3, 1), Error);
  CHECK_THROWS_AS((void)make_mlp(std::vector<std::size_t>{4, 3}, 1, 1), Error);
}
