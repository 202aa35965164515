#pragma once

#include <functional>
#include <span>
#include <vector>

#include "noisecurve/model.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/tensor.hpp"

namespace noisecurve {

// A differentiable scalar loss over input space together with the
// observables the spectral bounds need. model_system() wires a trained
// classifier at a fixed label; synthetic systems (e.g. exact quadratics)
// fill the callbacks directly.
struct LossSystem {
  std::function<double(const Tensor&)> loss;
  std::function<Tensor(const Tensor&)> grad;
  std::function<Tensor(const Tensor&)> features;
  std::function<Tensor(const Tensor&)> logits;
  double head_row_norm = 0.0;  // largest Euclidean row norm of the head
};

LossSystem model_system(const Model& m, int label);

// d loss / d x of the per-sample softmax loss, reverse mode with frozen
// parameters.
Tensor input_gradient(const Model& m, const Tensor& x, int label);

// Forward-difference Hessian-vector product (grad(x + t v) - grad(x)) / t.
Tensor hvp(const LossSystem& sys, const Tensor& x, const Tensor& v, double t);

// Mean of ||(grad(x + t e) - grad(x)) / t||^2 over k standard normal
// probes e: a Monte Carlo estimate of the squared eigenvalue sum.
double curvature_estimate(const LossSystem& sys, const Tensor& x,
                          std::size_t k, double t, RngStream& rng);
double curvature_estimate(const Model& m, const Tensor& x, int label,
                          std::size_t k, double t, RngStream& rng);

// Dense Hessian from central-differenced gradient columns, symmetrized.
// Guarded to dim <= 64; larger inputs must use the probe estimator.
Tensor exact_hessian(const LossSystem& sys, const Tensor& x, double h = 1e-4);
Tensor exact_hessian(const Model& m, const Tensor& x, int label,
                     double h = 1e-4);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, run until
// the off-diagonal Frobenius norm falls below 1e-12 relative to the input
// scale. Rejects asymmetry beyond 1e-8 (relative).
std::vector<double> jacobi_eigenvalues(const Tensor& h);

struct EigSums {
  double sum_sq = 0.0;   // sum lambda^2
  double sum_abs = 0.0;  // sum |lambda|
  double trace = 0.0;    // sum lambda
};
EigSums eig_sums(std::span<const double> eigenvalues);

// Monte Carlo stability observables at noise scale sigma: eta is the
// fraction of draws whose features stay within delta of the clean
// features, l_out the mean loss over the escaping draws, k_max the
// largest |logit| seen across draws and the clean point.
struct StabilityEstimates {
  double eta = 0.0;
  double l_out = 0.0;  // loss(x) when no draw escapes
  bool any_outside = false;
  double k_max = 0.0;
  double loss_clean = 0.0;
  double grad_norm = 0.0;
  std::size_t draws = 0;
};
StabilityEstimates stability_estimates(const LossSystem& sys, const Tensor& x,
                                       double sigma, double delta,
                                       std::size_t n, RngStream& rng);

// Both spectral bounds evaluated at x: the upper bound on sum lambda^2
// from (eta, k_max) and the lower bound on 2*sum lambda^2 +
// (sum |lambda|)^2 from the escape statistics.
struct CurvatureBoundReport {
  EigSums sums;
  double upper_rhs = 0.0;
  double lower_lhs = 0.0;
  double lower_rhs = 0.0;
  bool upper_holds = false;
  bool lower_holds = false;
  StabilityEstimates stats;
};
CurvatureBoundReport theorem1_check(const LossSystem& sys, const Tensor& x,
                                    double sigma, double delta, std::size_t n,
                                    RngStream& rng);
CurvatureBoundReport theorem1_check(const Model& m, const Tensor& x, int label,
                                    double sigma, double delta, std::size_t n,
                                    RngStream& rng);

}  // namespace noisecurve
