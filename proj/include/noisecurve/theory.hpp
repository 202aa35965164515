#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisecurve/centroids.hpp"
#include "noisecurve/losses.hpp"
#include "noisecurve/model.hpp"
#include "noisecurve/tensor.hpp"

namespace noisecurve {

// Largest pairwise distance; 0 for a single point.
double class_dispersion(std::span<const Tensor> feats);
std::map<int, double> dispersions(const ClassFeatures& feats);

// Distance from each sample's feature vector to its nearest rival
// boundary, minimized per class and overall. Distances are unsigned, so
// every margin is nonnegative.
struct MarginReport {
  std::map<int, double> per_class;
  double min_margin = 0.0;
};
MarginReport class_margins(const Model& m, const LabeledBatch& batch);

// Zero compactness loss forces dispersion <= 2 delta_v.
struct Prop2Result {
  bool applicable = false;  // compactness loss is exactly zero
  double compact_value = 0.0;
  double max_dispersion = 0.0;
  double bound = 0.0;  // 2 delta_v
  bool holds = false;
};
Prop2Result prop2_check(const ClassFeatures& feats, const CentroidSet& centroids,
                        double delta_v);

// Zero compactness and margin losses force (a) class margins of at least
// delta_d - delta_v when delta_d > delta_v and (b) every intra-class
// distance below every inter-class distance when delta_d > 2 delta_v.
struct Prop3Result {
  bool applicable = false;  // both losses exactly zero
  double compact_value = 0.0;
  double margin_value = 0.0;
  bool margin_part_applicable = false;
  double min_margin = 0.0;
  double margin_bound = 0.0;  // delta_d - delta_v
  bool margin_holds = false;
  bool separation_part_applicable = false;
  double max_intra = 0.0;
  double min_inter = 0.0;
  bool separation_holds = false;
};
Prop3Result prop3_check(const Model& m, const LabeledBatch& batch,
                        const CentroidSet& centroids, double delta_v,
                        double delta_d);

// Dispersion and margin per class plus the implication checks above,
// all measured on one labeled sample set.
struct GeometryReport {
  std::map<int, double> dispersion;
  std::map<int, double> margin;
  double max_dispersion = 0.0;
  double min_margin = 0.0;
  Prop2Result prop2;
  Prop3Result prop3;
};
GeometryReport geometry_report(const Model& m, const LabeledBatch& batch,
                               const CentroidSet& centroids, double delta_v,
                               double delta_d);

// Piecewise-linear margin surrogate: 1 below 0, 0 above rho.
double phi_rho(double tau, double rho);

// Mean phi_rho over per-sample scores h(x) = r^2 - ||f(x) - m||^2. The
// scored overload takes precomputed h values; the model overload scores
// the samples itself and requires rho < r^2.
double empirical_margin_risk(std::span<const double> h_values, double rho);
double empirical_margin_risk(const Model& m, const Tensor& centroid,
                             std::span<const Tensor> xs, double r, double rho);

// Additive slack of the cluster membership bound, split into the
// complexity term (2/rho)(L^2 + 2RL + R^2/sqrt(n)) and the confidence
// deviation 3 sqrt(ln(2/delta) / (2n)). Doubling rho halves the
// complexity term bitwise.
double generalization_complexity(double lambda_cap, double radius_cap,
                                 std::size_t n, double rho);
double generalization_deviation(std::size_t n, double delta);
double generalization_slack(double lambda_cap, double radius_cap,
                            std::size_t n, double rho, double delta);

struct GenBoundReport {
  double risk_train = 0.0;
  double slack = 0.0;
  double bound = 0.0;          // risk_train + slack
  double holdout_error = 0.0;  // fraction of holdout with h < 0
  double lambda_cap = 0.0;     // largest feature norm on the training set
  double radius_cap = 0.0;     // centroid norm
  bool holds = false;
};
GenBoundReport theorem2_check(const Model& m, const Tensor& centroid, double r,
                              double rho, double delta,
                              std::span<const Tensor> train_xs,
                              std::span<const Tensor> holdout_xs);

// Smallest per-class fraction of features inside the delta_v ball around
// the class centroid.
double tau_estimate(const ClassFeatures& feats, const CentroidSet& centroids,
                    double delta_v);

// 2-D histogram over a shared bounding box. counts sum to total;
// normalizing by total gives the probability vector.
struct Histogram2D {
  std::size_t bins = 0;
  double lo0 = 0.0, hi0 = 0.0, lo1 = 0.0, hi1 = 0.0;
  std::vector<double> counts;  // bins*bins
  double total = 0.0;
};

struct BinningSpec {
  std::uint64_t projection_seed = 271828;
  std::size_t bins = 32;
};

// Projects both samples through the same seeded orthonormal 2-D map and
// bins them over their combined bounding box.
std::pair<Histogram2D, Histogram2D> project_histograms(
    std::span<const Tensor> a, std::span<const Tensor> b,
    const BinningSpec& spec);

// Jensen-Shannon divergence in nats; at most ln 2. Histograms must share
// their binning; raw vectors must share length and are normalized first.
double jsd(const Histogram2D& p, const Histogram2D& q);
double jsd(std::span<const double> p, std::span<const double> q);

// One hidden layer's class-pair separation: histogram JSD of the layer's
// activations, required to clear (2 tau - 1)^2 / 2 minus a diagnostic
// tolerance for binning and projection losses. tau comes from the
// penultimate layer; below 1/2 the premise is vacuous and the check not
// applicable.
struct Theorem3Report {
  bool applicable = false;
  double tau = 0.0;
  double threshold = 0.0;
  std::size_t layer = 0;
  struct PairResult {
    int class_a = 0;
    int class_b = 0;
    double jsd_value = 0.0;
    bool holds = false;
  };
  std::vector<PairResult> pairs;
  double min_jsd = 0.0;
  bool all_hold = false;
};
Theorem3Report theorem3_check(const Model& m, const LabeledBatch& data,
                              const CentroidSet& centroids, double delta_v,
                              std::size_t layer_index,
                              const BinningSpec& binning, double tolerance);

}  // namespace noisecurve
