#pragma once

#include <map>
#include <vector>

#include "noisecurve/tensor.hpp"

namespace noisecurve {

// Feature vectors grouped by class id. Always computed from clean
// inputs; the noisy counterpart below is a distinct type so noisy
// features cannot reach centroid computation by accident.
struct ClassFeatures {
  std::map<int, std::vector<Tensor>> by_class;
};

// Features of perturbed inputs. Only the alignment loss accepts these.
struct NoisyClassFeatures {
  ClassFeatures features;
};

using CentroidSet = std::map<int, Tensor>;

enum class CentroidMode { naive, momentum, partial };

// Rolling centroid bookkeeping. previous holds the committed centroid of
// every class seen so far and is treated as a constant by gradients.
struct CentroidState {
  CentroidSet previous;
  double gamma = 0.9;
  CentroidMode mode = CentroidMode::partial;
};

// Per-class means of the batch. Rejects empty classes and inconsistent
// feature dims.
CentroidSet batch_centroid(const ClassFeatures& batch);

// gamma * previous + (1 - gamma) * current per class. A class with no
// previous centroid enters at its current mean; a class absent from
// current keeps its previous centroid.
CentroidSet momentum_update(const CentroidState& st,
                            const CentroidSet& current);

// Centroids handed to the compactness-type losses and to the margin
// loss. Under partial momentum they differ: the compact side sees the
// blended centroid, the margin side the raw batch mean.
struct CentroidViews {
  CentroidSet compact;
  CentroidSet margin;
};

// Views for this batch plus the updated rolling set the caller should
// commit to st.previous afterwards.
struct CentroidStep {
  CentroidViews views;
  CentroidSet committed;
};

CentroidStep centroid_step(const CentroidState& st, const ClassFeatures& batch);

}  // namespace noisecurve
