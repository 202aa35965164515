#include "noisecurve/curvature.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "noisecurve/errors.hpp"
#include "noisecurve/tape.hpp"

namespace noisecurve {

namespace {

constexpr std::size_t kExactHessianCap = 64;

Tensor gaussian_vector(std::size_t dim, RngStream& rng) {
  Tensor v = Tensor::zeros({dim});
  for (std::size_t i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

LossSystem model_system(const Model& m, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= m.class_count())
    fail(ErrorCode::invalid_argument,
         "label " + std::to_string(label) + " outside class range");

  // One tape per system, re-run for every query point.
  auto tape = std::make_shared<Tape>();
  Var x = tape->input(Tensor::zeros({m.in_dim()}));
  ModelVars mv = declare_frozen(*tape, m);
  Var q = backbone_out(*tape, mv, x);
  Var z = logits_out(*tape, mv, q);
  Var loss = tape->softmax_cross_entropy(
      z, {static_cast<std::uint32_t>(label)});

  LossSystem sys;
  sys.loss = [tape, x, loss](const Tensor& p) {
    tape->set_input(x, p);
    tape->recompute();
    return tape->value(loss).item();
  };
  sys.grad = [tape, x, loss](const Tensor& p) {
    tape->set_input(x, p);
    tape->recompute();
    tape->backward(loss);
    return tape->grad(x);
  };
  sys.features = [m](const Tensor& p) { return features(m, p); };
  sys.logits = [m](const Tensor& p) { return logits(m, p); };
  sys.head_row_norm = head_row_norm_max(m);
  return sys;
}

Tensor input_gradient(const Model& m, const Tensor& x, int label) {
  return model_system(m, label).grad(x);
}

Tensor hvp(const LossSystem& sys, const Tensor& x, const Tensor& v, double t) {
  if (!(t > 0.0)) fail(ErrorCode::invalid_argument, "hvp needs t > 0");
  if (!x.same_shape(v))
    fail(ErrorCode::shape_mismatch,
         "hvp point " + x.shape_str() + " vs direction " + v.shape_str());
  Tensor shifted = x;
  for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + t * v[i];
  Tensor g1 = sys.grad(shifted);
  Tensor g0 = sys.grad(x);
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (g1[i] - g0[i]) / t;
  return out;
}

double curvature_estimate(const LossSystem& sys, const Tensor& x,
                          std::size_t k, double t, RngStream& rng) {
  if (k == 0) fail(ErrorCode::invalid_argument, "curvature_estimate needs k > 0");
  if (!(t > 0.0))
    fail(ErrorCode::invalid_argument, "curvature_estimate needs t > 0");
  Tensor g0 = sys.grad(x);
  double acc = 0.0;
  Tensor shifted = x;
  for (std::size_t j = 0; j < k; ++j) {
    Tensor e = gaussian_vector(x.size(), rng);
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + t * e[i];
    Tensor g1 = sys.grad(shifted);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double d = (g1[i] - g0[i]) / t;
      s += d * d;
    }
    acc += s;
  }
  return acc / static_cast<double>(k);
}

double curvature_estimate(const Model& m, const Tensor& x, int label,
                          std::size_t k, double t, RngStream& rng) {
  LossSystem sys = model_system(m, label);
  return curvature_estimate(sys, x, k, t, rng);
}

Tensor exact_hessian(const LossSystem& sys, const Tensor& x, double h) {
  std::size_t dim = x.size();
  if (dim > kExactHessianCap)
    fail(ErrorCode::invalid_argument,
         "exact_hessian capped at dim " + std::to_string(kExactHessianCap) +
             ", got " + std::to_string(dim));
  if (!(h > 0.0)) fail(ErrorCode::invalid_argument, "exact_hessian needs h > 0");

  Tensor H = Tensor::zeros({dim, dim});
  Tensor p = x;
  for (std::size_t j = 0; j < dim; ++j) {
    double xj = x[j];
    p[j] = xj + h;
    Tensor gp = sys.grad(p);
    p[j] = xj - h;
    Tensor gm = sys.grad(p);
    p[j] = xj;
    for (std::size_t i = 0; i < dim; ++i)
      H.at(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  // Differencing noise is the only asymmetry source; fold it away.
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i + 1; j < dim; ++j) {
      double v = 0.5 * (H.at(i, j) + H.at(j, i));
      H.at(i, j) = v;
      H.at(j, i) = v;
    }
  return H;
}

Tensor exact_hessian(const Model& m, const Tensor& x, int label, double h) {
  LossSystem sys = model_system(m, label);
  return exact_hessian(sys, x, h);
}

std::vector<double> jacobi_eigenvalues(const Tensor& h) {
  if (h.rank() != 2 || h.rows() != h.cols())
    fail(ErrorCode::shape_mismatch,
         "jacobi_eigenvalues needs a square matrix, got " + h.shape_str());
  std::size_t n = h.rows();

  double fro = 0.0, asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      fro += h.at(i, j) * h.at(i, j);
      double d = h.at(i, j) - h.at(j, i);
      asym += d * d;
    }
  fro = std::sqrt(fro);
  if (std::sqrt(asym) > 1e-8 * std::max(1.0, fro))
    fail(ErrorCode::invalid_argument,
         "jacobi_eigenvalues input is not symmetric");

  Tensor a = h;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (a.at(i, j) + a.at(j, i));
      a.at(i, j) = v;
      a.at(j, i) = v;
    }

  double target = 1e-12 * std::max(1.0, fro);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a.at(i, j) * a.at(i, j);
    if (std::sqrt(off) <= target) break;
    if (sweep == 99)
      fail(ErrorCode::numeric, "jacobi_eigenvalues failed to converge");

    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (apq == 0.0) continue;
        double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
      }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
  return eig;
}

EigSums eig_sums(std::span<const double> eigenvalues) {
  EigSums s;
  for (double l : eigenvalues) {
    s.sum_sq += l * l;
    s.sum_abs += std::fabs(l);
    s.trace += l;
  }
  return s;
}

StabilityEstimates stability_estimates(const LossSystem& sys, const Tensor& x,
                                       double sigma, double delta,
                                       std::size_t n, RngStream& rng) {
  if (!(sigma > 0.0))
    fail(ErrorCode::invalid_argument, "stability_estimates needs sigma > 0");
  if (!(delta > 0.0))
    fail(ErrorCode::invalid_argument, "stability_estimates needs delta > 0");
  if (n == 0)
    fail(ErrorCode::invalid_argument, "stability_estimates needs n >= 1");

  StabilityEstimates st;
  st.draws = n;
  st.loss_clean = sys.loss(x);
  st.grad_norm = norm(sys.grad(x));
  Tensor f0 = sys.features(x);
  Tensor z0 = sys.logits(x);
  for (std::size_t i = 0; i < z0.size(); ++i)
    st.k_max = std::max(st.k_max, std::fabs(z0[i]));

  std::size_t inside = 0, outside = 0;
  double loss_out = 0.0;
  Tensor p = x;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i)
      p[i] = x[i] + sigma * rng.normal();
    Tensor f = sys.features(p);
    Tensor z = sys.logits(p);
    for (std::size_t i = 0; i < z.size(); ++i)
      st.k_max = std::max(st.k_max, std::fabs(z[i]));
    if (norm(f - f0) <= delta) {
      ++inside;
    } else {
      ++outside;
      loss_out += sys.loss(p);
    }
  }
  st.eta = static_cast<double>(inside) / static_cast<double>(n);
  st.any_outside = outside > 0;
  st.l_out = outside > 0 ? loss_out / static_cast<double>(outside)
                         : st.loss_clean;
  return st;
}

CurvatureBoundReport theorem1_check(const LossSystem& sys, const Tensor& x,
                                    double sigma, double delta, std::size_t n,
                                    RngStream& rng) {
  CurvatureBoundReport rep;
  Tensor H = exact_hessian(sys, x);
  std::vector<double> eig = jacobi_eigenvalues(H);
  rep.sums = eig_sums(eig);
  rep.stats = stability_estimates(sys, x, sigma, delta, n, rng);

  double s4 = sigma * sigma * sigma * sigma;
  double w = sys.head_row_norm;
  rep.upper_rhs = (8.0 / s4) * (rep.stats.eta * w * w * delta * delta +
                                4.0 * (1.0 - rep.stats.eta) * rep.stats.k_max *
                                    rep.stats.k_max);
  rep.lower_lhs = 2.0 * rep.sums.sum_sq + rep.sums.sum_abs * rep.sums.sum_abs;
  double escape = 1.0 - rep.stats.eta;
  double gap = rep.stats.l_out - rep.stats.loss_clean;
  double escape_term = escape > 0.0 ? escape * gap * gap : 0.0;
  rep.lower_rhs =
      (4.0 / s4) *
      (escape_term - sigma * sigma * rep.stats.grad_norm * rep.stats.grad_norm);
  rep.upper_holds = rep.sums.sum_sq <= rep.upper_rhs;
  rep.lower_holds = rep.lower_lhs >= rep.lower_rhs;
  return rep;
}

CurvatureBoundReport theorem1_check(const Model& m, const Tensor& x, int label,
                                    double sigma, double delta, std::size_t n,
                                    RngStream& rng) {
  LossSystem sys = model_system(m, label);
  return theorem1_check(sys, x, sigma, delta, n, rng);
}

}  // namespace noisecurve
