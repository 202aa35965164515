#include "noisecurve/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "noisecurve/errors.hpp"

namespace noisecurve {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) fail(ErrorCode::invalid_argument, "empty numeric field");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    fail(ErrorCode::invalid_argument, "bad numeric field '" + s + "'");
  return v;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorCode::invalid_argument, "mean of empty span");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2)
    fail(ErrorCode::invalid_argument, "sample_std needs at least 2 points");
  double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double quantile(std::span<const double> xs, double p) {
  if (xs.empty()) fail(ErrorCode::invalid_argument, "quantile of empty span");
  if (p < 0.0 || p > 1.0)
    fail(ErrorCode::invalid_argument, "quantile p outside [0,1]");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  double h = static_cast<double>(s.size() - 1) * p;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  double w = h - static_cast<double>(lo);
  return s[lo] + w * (s[hi] - s[lo]);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    fail(ErrorCode::invalid_argument, "pearson length mismatch");
  if (xs.size() < 2)
    fail(ErrorCode::invalid_argument, "pearson needs at least 2 points");
  double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    fail(ErrorCode::numeric, "pearson undefined for a constant coordinate");
  return sxy / std::sqrt(sxx * syy);
}

std::size_t argmax(std::span<const double> xs) {
  if (xs.empty()) fail(ErrorCode::invalid_argument, "argmax of empty span");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

}  // namespace noisecurve
