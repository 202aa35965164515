#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "noisecurve/errors.hpp"
#include "noisecurve/tensor.hpp"
#include "noisecurve/util.hpp"

using namespace noisecurve;

TEST_CASE("tensor construction and accessors") {
  Tensor s = Tensor::scalar(2.5);
  CHECK(s.is_scalar());
  CHECK(s.item() == 2.5);

  Tensor v = Tensor::vector({1.0, 2.0, 3.0});
  CHECK(v.rank() == 1);
  CHECK(v.size() == 3);
  CHECK(v[1] == 2.0);

  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0);
  CHECK(m.at(0, 1) == 2.0);

  Tensor z = Tensor::zeros({2, 2});
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

  Tensor f = Tensor::full({3}, 7.0);
  CHECK(f[2] == 7.0);
}

TEST_CASE("tensor equality and arithmetic") {
  Tensor a = Tensor::vector({1.0, 2.0});
  Tensor b = Tensor::vector({1.0, 2.0});
  CHECK(a == b);
  Tensor c = a + b;
  CHECK(c[0] == 2.0);
  Tensor d = a - b;
  CHECK(d[1] == 0.0);
  Tensor e = 3.0 * a;
  CHECK(e[1] == 6.0);
  CHECK(dot(a, b) == 5.0);
  CHECK(norm(Tensor::vector({3.0, 4.0})) == 5.0);
}

TEST_CASE("fmt17 round-trips doubles exactly") {
  std::vector<double> vals = {0.0,   -0.0,  1.0 / 3.0, 12.080743045472218,
                              1e308, 5e-324, -2.5,      3.141592653589793};
  for (double v : vals) {
    const double back = parse_double(fmt17(v));
    CHECK(std::memcmp(&back, &v, sizeof v) == 0);
  }
}

TEST_CASE("parse_double rejects junk") {
  CHECK_THROWS_AS((void)parse_double("pelican"), Error);
  CHECK_THROWS_AS((void)parse_double("1.5x"), Error);
  CHECK_THROWS_AS((void)parse_double(""), Error);
  CHECK(parse_double("-1.25e2") == -125.0);
}

TEST_CASE("mean and sample_std") {
  std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  CHECK(mean(xs) == 2.5);
  // Sample variance of 1..4 is 5/3.
  CHECK(sample_std(xs) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
  std::vector<double> one = {2.0};
  CHECK_THROWS_AS((void)sample_std(one), Error);
}

TEST_CASE("quantile uses linear interpolation between order statistics") {
  std::vector<double> xs = {4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(xs, 0.0) == 1.0);
  CHECK(quantile(xs, 1.0) == 4.0);
  CHECK(quantile(xs, 0.5) == doctest::Approx(2.5).epsilon(1e-12));
  // h = 0.25 * 3 = 0.75 -> 1 + 0.75 * (2 - 1).
  CHECK(quantile(xs, 0.25) == doctest::Approx(1.75).epsilon(1e-12));
  std::vector<double> empty;
  CHECK_THROWS_AS((void)quantile(empty, 0.5), Error);
}

TEST_CASE("pearson known value and rejections") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> y = {2.0, 4.0, 6.0, 8.0};
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> yneg = {8.0, 6.0, 4.0, 2.0};
  CHECK(pearson(x, yneg) == doctest::Approx(-1.0).epsilon(1e-12));
  // Hand value: x={1,2,3}, y={1,3,2} -> r = 1/2.
  std::vector<double> x3 = {1.0, 2.0, 3.0};
  std::vector<double> y3 = {1.0, 3.0, 2.0};
  CHECK(pearson(x3, y3) == doctest::Approx(0.5).epsilon(1e-12));
  std::vector<double> flat = {5.0, 5.0, 5.0, 5.0};
  CHECK_THROWS_AS((void)pearson(x, flat), Error);
  std::vector<double> shorty = {1.0};
  CHECK_THROWS_AS((void)pearson(shorty, shorty), Error);
  std::vector<double> mis = {1.0, 2.0};
  CHECK_THROWS_AS((void)pearson(x, mis), Error);
}

TEST_CASE("argmax picks lowest index on ties") {
  std::vector<double> xs = {1.0, 3.0, 3.0, 2.0};
  CHECK(argmax(xs) == 1);
  std::vector<double> same = {2.0, 2.0};
  CHECK(argmax(same) == 0);
  std::vector<double> empty;
  CHECK_THROWS_AS((void)argmax(empty), Error);
}
