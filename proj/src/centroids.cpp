#include "noisecurve/centroids.hpp"

#include <string>

#include "noisecurve/errors.hpp"

namespace noisecurve {

CentroidSet batch_centroid(const ClassFeatures& batch) {
  CentroidSet out;
  for (const auto& [cls, feats] : batch.by_class) {
    if (feats.empty())
      fail(ErrorCode::invalid_argument,
           "class " + std::to_string(cls) + " has no features");
    Tensor m = Tensor::zeros(feats.front().shape());
    for (const Tensor& f : feats) {
      if (!f.same_shape(m))
        fail(ErrorCode::shape_mismatch,
             "class " + std::to_string(cls) + " mixes feature shapes " +
                 m.shape_str() + " and " + f.shape_str());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += f[i];
    }
    double inv = 1.0 / static_cast<double>(feats.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] *= inv;
    out.emplace(cls, std::move(m));
  }
  return out;
}

CentroidSet momentum_update(const CentroidState& st,
                            const CentroidSet& current) {
  if (!(st.gamma >= 0.0 && st.gamma < 1.0))
    fail(ErrorCode::invalid_argument, "centroid gamma must lie in [0,1)");
  CentroidSet out = st.previous;
  for (const auto& [cls, cur] : current) {
    auto it = out.find(cls);
    if (it == out.end()) {
      out.emplace(cls, cur);
    } else {
      if (!it->second.same_shape(cur))
        fail(ErrorCode::shape_mismatch,
             "centroid dim changed for class " + std::to_string(cls));
      it->second = st.gamma * it->second + (1.0 - st.gamma) * cur;
    }
  }
  return out;
}

CentroidStep centroid_step(const CentroidState& st,
                           const ClassFeatures& batch) {
  CentroidSet naive = batch_centroid(batch);
  CentroidStep step;
  switch (st.mode) {
    case CentroidMode::naive: {
      step.views.compact = naive;
      step.views.margin = naive;
      step.committed = st.previous;
      for (const auto& [cls, m] : naive) step.committed[cls] = m;
      break;
    }
    case CentroidMode::momentum: {
      CentroidSet blended = momentum_update(st, naive);
      // Only classes present in the batch get a view entry.
      for (const auto& [cls, m] : naive) {
        step.views.compact[cls] = blended.at(cls);
        step.views.margin[cls] = blended.at(cls);
      }
      step.committed = std::move(blended);
      break;
    }
    case CentroidMode::partial: {
      CentroidSet blended = momentum_update(st, naive);
      for (const auto& [cls, m] : naive) {
        step.views.compact[cls] = blended.at(cls);
        step.views.margin[cls] = m;
      }
      step.committed = std::move(blended);
      break;
    }
  }
  return step;
}

}  // namespace noisecurve
