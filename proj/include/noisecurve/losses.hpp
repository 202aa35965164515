#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "noisecurve/centroids.hpp"
#include "noisecurve/model.hpp"
#include "noisecurve/tape.hpp"
#include "noisecurve/tensor.hpp"

namespace noisecurve {

struct LossConfig {
  double alpha = 1.0;      // compactness weight
  double beta = 1.0;       // margin weight
  double gamma_reg = 1e-3; // centroid magnitude weight
  double lambda = 1.0;     // noisy alignment weight
  double delta_v = 0.5;    // cluster radius target
  double delta_d = 5.0;    // boundary distance target
};

// Inputs paired with labels. Noised batches keep the clean labels.
struct LabeledBatch {
  std::vector<Tensor> xs;
  std::vector<int> ys;
};

ClassFeatures class_features(const Model& m, const LabeledBatch& batch);

// Mean cross-entropy of the softmax outputs.
double softmax_loss(const Model& m, const LabeledBatch& batch);

// Mean over classes of the mean squared hinge of (distance to own
// centroid - delta_v). Zero exactly when every feature sits within
// delta_v of its centroid. Every batch class must have a centroid.
double compact_loss(const ClassFeatures& batch, const CentroidSet& centroids,
                    double delta_v);

// Mean over centroid classes of the worst rival-boundary hinge
// max_{i != c} [delta_d + d(m_c, P_ci) * side]_+ where side is +1 when
// the rival logit at m_c is >= the own logit (ties count as violations)
// and -1 otherwise. Ties in the max resolve to the lowest rival index.
double margin_loss(const Tensor& head_w, const Tensor& head_b,
                   const CentroidSet& centroids, double delta_d);
double margin_loss(const Model& m, const CentroidSet& centroids,
                   double delta_d);

// Mean centroid norm.
double reg_loss(const CentroidSet& centroids);

// compact_loss over features of perturbed inputs, against centroids
// computed from clean data only.
double noisy_align_loss(const NoisyClassFeatures& batch,
                        const CentroidSet& centroids, double delta_v);

struct LossBreakdown {
  double softmax = 0.0;
  double compact = 0.0;
  double margin = 0.0;
  double reg = 0.0;
  double noisy = 0.0;
  double clean = 0.0;  // alpha*compact + beta*margin + gamma_reg*reg
  double total = 0.0;  // softmax + clean + lambda*noisy
};

LossBreakdown total_loss(const Model& m, const LabeledBatch& clean,
                         const LabeledBatch& noised, const CentroidViews& views,
                         const LossConfig& cfg);

// Tape-side builders mirroring the scalar functions above. Class feature
// matrices are (feature_dim, n_c); centroid vars are (feature_dim).
Var build_compact_loss(Tape& t, const std::map<int, Var>& class_feats,
                       const std::map<int, Var>& centroids, double delta_v);
Var build_margin_loss(Tape& t, Var head_w, Var head_b,
                      const std::map<int, Var>& centroids, double delta_d);
Var build_reg_loss(Tape& t, const std::map<int, Var>& centroids);

}  // namespace noisecurve
