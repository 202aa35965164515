#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisecurve/checkpoint.hpp"
#include "noisecurve/data.hpp"
#include "noisecurve/losses.hpp"
#include "noisecurve/perturb.hpp"

namespace noisecurve {

struct EvalOptions {
  std::vector<PerturbationSpec> perturbations;
  std::size_t repeats = 1;   // fresh noise draws per perturbation
  std::uint64_t seed = 7;
};

// One scored pass over the test set. The loss breakdown pairs the clean
// test set with the perturbed one, so the alignment term reflects this
// record's noise; accuracy is measured on the perturbed inputs. The
// leading "clean" record uses no perturbation.
struct EvalRecord {
  std::string perturbation;
  std::size_t repeat = 0;
  double accuracy = 0.0;
  LossBreakdown losses;
};

std::vector<EvalRecord> evaluate(const Checkpoint& ck, const Dataset& test,
                                 const EvalOptions& opt);

std::string eval_csv(std::span<const EvalRecord> records);

// Per-sample input curvature paired with prediction stability under a
// perturbation, plus the aggregates the robustness analysis reads off.
struct CurvatureOptions {
  PerturbationSpec noise;
  std::size_t probes = 20;      // directions per curvature estimate
  double probe_step = 1e-2;
  std::size_t repeats = 10;     // noise draws per sample for accuracy
  std::uint64_t seed = 11;
  bool exact_oracle = false;  // also compute the dense-Hessian column
};

struct CurvatureRow {
  std::size_t index = 0;
  int label = 0;
  double lambda = 0.0;           // curvature estimate at the sample
  std::size_t correct_count = 0; // correct predictions over the repeats
  double correct_frac = 0.0;
  double exact_sum_sq = 0.0;     // dense-Hessian eigenvalue energy
  bool has_exact = false;
};

struct CurvatureReport {
  std::vector<CurvatureRow> rows;
  // accuracy restricted to samples whose curvature is at most the
  // p-quantile, p = 0.1 .. 1.0
  std::vector<std::pair<double, double>> acc_by_quantile;
  // samples grouped by how many of the noisy repeats they survived;
  // robust models put low-curvature samples in the high-count groups
  struct Group {
    std::size_t correct_count = 0;
    std::size_t size = 0;
    double mean_lambda = 0.0;
  };
  std::vector<Group> groups;
  // Pearson over (correct count, group mean curvature); undefined when
  // either coordinate is constant
  double group_pearson = 0.0;
  bool pearson_defined = false;
  // quartiles of curvature among the lowest 90%
  double low90_q25 = 0.0, low90_median = 0.0, low90_q75 = 0.0;
};

CurvatureReport curvature_report(const Checkpoint& ck, const Dataset& test,
                                 const CurvatureOptions& opt);

std::string curvature_csv(std::span<const CurvatureRow> rows);

// Applies the positive-scale reparameterization and measures what it
// preserves (predictions) and what it scales (margins, dispersions).
struct TransformCheck {
  double nu = 1.0;
  double agreement = 0.0;        // prediction match rate over probes
  double margin_ratio = 0.0;     // transformed / original, on the data
  double dispersion_ratio = 0.0;
  Checkpoint transformed;
};

TransformCheck transform_check(const Checkpoint& ck, double nu,
                               const Dataset& data, std::size_t probe_count,
                               std::uint64_t seed);

}  // namespace noisecurve
