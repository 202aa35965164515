#include "noisecurve/losses.hpp"

#include <cmath>
#include <string>

#include "noisecurve/errors.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {

namespace {

const Tensor& centroid_for(const CentroidSet& centroids, int cls) {
  auto it = centroids.find(cls);
  if (it == centroids.end())
    fail(ErrorCode::invalid_argument,
         "no centroid for class " + std::to_string(cls));
  return it->second;
}

double hinge_sq_mean(const std::vector<Tensor>& feats, const Tensor& m,
                     double delta_v) {
  double acc = 0.0;
  for (const Tensor& q : feats) {
    double h = norm(m - q) - delta_v;
    if (h > 0.0) acc += h * h;
  }
  return acc / static_cast<double>(feats.size());
}

}  // namespace

ClassFeatures class_features(const Model& m, const LabeledBatch& batch) {
  if (batch.xs.size() != batch.ys.size())
    fail(ErrorCode::invalid_argument, "batch inputs and labels differ in size");
  ClassFeatures out;
  for (std::size_t i = 0; i < batch.xs.size(); ++i)
    out.by_class[batch.ys[i]].push_back(features(m, batch.xs[i]));
  return out;
}

double softmax_loss(const Model& m, const LabeledBatch& batch) {
  if (batch.xs.empty())
    fail(ErrorCode::invalid_argument, "softmax_loss on empty batch");
  if (batch.xs.size() != batch.ys.size())
    fail(ErrorCode::invalid_argument, "batch inputs and labels differ in size");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.xs.size(); ++i) {
    int y = batch.ys[i];
    if (y < 0 || static_cast<std::size_t>(y) >= m.class_count())
      fail(ErrorCode::invalid_argument,
           "label " + std::to_string(y) + " outside [0," +
               std::to_string(m.class_count()) + ")");
    Tensor z = logits(m, batch.xs[i]);
    double zmax = z[0];
    for (std::size_t r = 1; r < z.size(); ++r)
      if (z[r] > zmax) zmax = z[r];
    double lse = 0.0;
    for (std::size_t r = 0; r < z.size(); ++r) lse += std::exp(z[r] - zmax);
    total += zmax + std::log(lse) - z[static_cast<std::size_t>(y)];
  }
  return total / static_cast<double>(batch.xs.size());
}

double compact_loss(const ClassFeatures& batch, const CentroidSet& centroids,
                    double delta_v) {
  if (batch.by_class.empty())
    fail(ErrorCode::invalid_argument, "compact_loss on empty batch");
  double acc = 0.0;
  for (const auto& [cls, feats] : batch.by_class) {
    if (feats.empty())
      fail(ErrorCode::invalid_argument,
           "class " + std::to_string(cls) + " has no features");
    acc += hinge_sq_mean(feats, centroid_for(centroids, cls), delta_v);
  }
  return acc / static_cast<double>(batch.by_class.size());
}

double margin_loss(const Tensor& head_w, const Tensor& head_b,
                   const CentroidSet& centroids, double delta_d) {
  std::size_t classes = head_b.size();
  if (classes < 2)
    fail(ErrorCode::invalid_argument, "margin_loss needs at least 2 classes");
  if (centroids.empty())
    fail(ErrorCode::invalid_argument, "margin_loss with no centroids");
  double acc = 0.0;
  for (const auto& [cls, m] : centroids) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= classes)
      fail(ErrorCode::invalid_argument,
           "centroid class " + std::to_string(cls) + " outside [0," +
               std::to_string(classes) + ")");
    std::size_t c = static_cast<std::size_t>(cls);
    // Logits of the centroid decide which side of each boundary it is on.
    std::vector<double> z(classes);
    for (std::size_t r = 0; r < classes; ++r) {
      double s = head_b[r];
      for (std::size_t k = 0; k < m.size(); ++k) s += head_w.at(r, k) * m[k];
      z[r] = s;
    }
    double best = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < classes; ++i) {
      if (i == c) continue;
      double d = hyperplane_distance(head_w, head_b, m, c, i);
      double side = z[i] >= z[c] ? 1.0 : -1.0;
      double term = delta_d + d * side;
      if (term < 0.0) term = 0.0;
      if (first || term > best) best = term;
      first = false;
    }
    acc += best;
  }
  return acc / static_cast<double>(centroids.size());
}

double margin_loss(const Model& m, const CentroidSet& centroids,
                   double delta_d) {
  return margin_loss(m.head_w, m.head_b, centroids, delta_d);
}

double reg_loss(const CentroidSet& centroids) {
  if (centroids.empty())
    fail(ErrorCode::invalid_argument, "reg_loss with no centroids");
  double acc = 0.0;
  for (const auto& [cls, m] : centroids) acc += norm(m);
  return acc / static_cast<double>(centroids.size());
}

double noisy_align_loss(const NoisyClassFeatures& batch,
                        const CentroidSet& centroids, double delta_v) {
  return compact_loss(batch.features, centroids, delta_v);
}

LossBreakdown total_loss(const Model& m, const LabeledBatch& clean,
                         const LabeledBatch& noised, const CentroidViews& views,
                         const LossConfig& cfg) {
  LossBreakdown out;
  out.softmax = softmax_loss(m, clean);
  ClassFeatures feats = class_features(m, clean);
  out.compact = compact_loss(feats, views.compact, cfg.delta_v);
  out.margin = margin_loss(m, views.margin, cfg.delta_d);
  out.reg = reg_loss(views.compact);
  if (!noised.xs.empty()) {
    NoisyClassFeatures noisy{class_features(m, noised)};
    out.noisy = noisy_align_loss(noisy, views.compact, cfg.delta_v);
  }
  out.clean = cfg.alpha * out.compact + cfg.beta * out.margin +
              cfg.gamma_reg * out.reg;
  out.total = out.softmax + out.clean + cfg.lambda * out.noisy;
  return out;
}

Var build_compact_loss(Tape& t, const std::map<int, Var>& class_feats,
                       const std::map<int, Var>& centroids, double delta_v) {
  if (class_feats.empty())
    fail(ErrorCode::invalid_argument, "build_compact_loss on empty batch");
  Var acc;
  bool first = true;
  for (const auto& [cls, q] : class_feats) {
    auto it = centroids.find(cls);
    if (it == centroids.end())
      fail(ErrorCode::invalid_argument,
           "no centroid for class " + std::to_string(cls));
    std::size_t n_c = t.value(q).cols();
    Var diff = t.add_colvec(q, t.scale(it->second, -1.0));
    Var h = t.hinge(t.offset(t.colnorms(diff), -delta_v));
    Var term = t.scale(t.sum(t.mul(h, h)), 1.0 / static_cast<double>(n_c));
    acc = first ? term : t.add(acc, term);
    first = false;
  }
  return t.scale(acc, 1.0 / static_cast<double>(class_feats.size()));
}

Var build_margin_loss(Tape& t, Var head_w, Var head_b,
                      const std::map<int, Var>& centroids, double delta_d) {
  std::size_t classes = t.value(head_b).size();
  if (classes < 2)
    fail(ErrorCode::invalid_argument, "margin loss needs at least 2 classes");
  if (centroids.empty())
    fail(ErrorCode::invalid_argument, "margin loss with no centroids");
  Var acc;
  bool first_class = true;
  for (const auto& [cls, m] : centroids) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= classes)
      fail(ErrorCode::invalid_argument,
           "centroid class " + std::to_string(cls) + " outside [0," +
               std::to_string(classes) + ")");
    std::size_t c = static_cast<std::size_t>(cls);
    Var z = t.affine(head_w, m, head_b);
    const Tensor& zv = t.value(z);
    Var best;
    bool first_rival = true;
    for (std::size_t i = 0; i < classes; ++i) {
      if (i == c) continue;
      Var wdiff = t.sub(t.slice_row(head_w, static_cast<std::uint32_t>(c)),
                        t.slice_row(head_w, static_cast<std::uint32_t>(i)));
      Var nrm = t.norm(wdiff);
      if (t.value(nrm).item() == 0.0) {
        bool same_bias = t.value(head_b)[c] == t.value(head_b)[i];
        fail(ErrorCode::degenerate_boundary,
             "classes " + std::to_string(c) + " and " + std::to_string(i) +
                 (same_bias ? " have identical logits; boundary is degenerate"
                            : " have parallel logits; boundary is empty"));
      }
      Var num = t.add(t.dot(wdiff, m),
                      t.sub(t.element(head_b, static_cast<std::uint32_t>(c)),
                            t.element(head_b, static_cast<std::uint32_t>(i))));
      Var dist = t.divide(t.abs_value(num), nrm);
      double side = zv[i] >= zv[c] ? 1.0 : -1.0;
      Var term = t.hinge(t.offset(t.scale(dist, side), delta_d));
      best = first_rival ? term : t.maximum(best, term);
      first_rival = false;
    }
    acc = first_class ? best : t.add(acc, best);
    first_class = false;
  }
  return t.scale(acc, 1.0 / static_cast<double>(centroids.size()));
}

Var build_reg_loss(Tape& t, const std::map<int, Var>& centroids) {
  if (centroids.empty())
    fail(ErrorCode::invalid_argument, "reg loss with no centroids");
  Var acc;
  bool first = true;
  for (const auto& [cls, m] : centroids) {
    Var n = t.norm(m);
    acc = first ? n : t.add(acc, n);
    first = false;
  }
  return t.scale(acc, 1.0 / static_cast<double>(centroids.size()));
}

}  // namespace noisecurve
