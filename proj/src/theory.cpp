#include "noisecurve/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "noisecurve/errors.hpp"
#include "noisecurve/rng.hpp"

namespace noisecurve {
namespace {

double distance(const Tensor& a, const Tensor& b) { return norm(a - b); }

}  // namespace

double class_dispersion(std::span<const Tensor> feats) {
  double worst = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i)
    for (std::size_t j = i + 1; j < feats.size(); ++j)
      worst = std::max(worst, distance(feats[i], feats[j]));
  return worst;
}

std::map<int, double> dispersions(const ClassFeatures& feats) {
  std::map<int, double> out;
  for (const auto& [cls, xs] : feats.by_class) out[cls] = class_dispersion(xs);
  return out;
}

MarginReport class_margins(const Model& m, const LabeledBatch& batch) {
  if (batch.xs.size() != batch.ys.size())
    fail(ErrorCode::shape_mismatch, "sample and label counts differ");
  const int classes = static_cast<int>(m.class_count());
  if (classes < 2) fail(ErrorCode::invalid_argument, "margins need at least two classes");
  MarginReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < batch.xs.size(); ++n) {
    const int c = batch.ys[n];
    if (c < 0 || c >= classes) fail(ErrorCode::invalid_argument, "label out of range");
    const Tensor q = features(m, batch.xs[n]);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < classes; ++i) {
      if (i == c) continue;
      worst = std::min(worst, hyperplane_distance(m, q, static_cast<std::size_t>(c),
                                                  static_cast<std::size_t>(i)));
    }
    auto it = rep.per_class.find(c);
    if (it == rep.per_class.end())
      rep.per_class[c] = worst;
    else
      it->second = std::min(it->second, worst);
    rep.min_margin = std::min(rep.min_margin, worst);
  }
  if (rep.per_class.empty()) fail(ErrorCode::invalid_argument, "empty batch");
  return rep;
}

Prop2Result prop2_check(const ClassFeatures& feats, const CentroidSet& centroids,
                        double delta_v) {
  Prop2Result res;
  res.compact_value = compact_loss(feats, centroids, delta_v);
  res.applicable = res.compact_value == 0.0;
  res.bound = 2.0 * delta_v;
  for (const auto& [cls, xs] : feats.by_class)
    res.max_dispersion = std::max(res.max_dispersion, class_dispersion(xs));
  // Slop of a few ulps: the triangle inequality through the centroid is
  // what the bound rests on, and each norm rounds once.
  res.holds = res.applicable &&
              res.max_dispersion <= res.bound + 1e-12 * std::max(1.0, res.bound);
  return res;
}

Prop3Result prop3_check(const Model& m, const LabeledBatch& batch,
                        const CentroidSet& centroids, double delta_v,
                        double delta_d) {
  const ClassFeatures feats = class_features(m, batch);
  Prop3Result res;
  res.compact_value = compact_loss(feats, centroids, delta_v);
  res.margin_value = margin_loss(m, centroids, delta_d);
  res.applicable = res.compact_value == 0.0 && res.margin_value == 0.0;

  // Margin part: every feature sits at distance >= delta_d - delta_v from
  // each rival boundary. With both losses zero the feature cannot cross a
  // boundary its centroid clears by delta_d, so the unsigned distance is
  // the margin.
  res.margin_part_applicable = delta_d > delta_v;
  res.margin_bound = delta_d - delta_v;
  res.min_margin = class_margins(m, batch).min_margin;
  res.margin_holds = res.applicable && res.margin_part_applicable &&
                     res.min_margin >= res.margin_bound - 1e-9 * std::max(1.0, res.margin_bound);

  // Separation part: with the wider gap every intra-class distance drops
  // below every inter-class one.
  res.separation_part_applicable = delta_d > 2.0 * delta_v;
  double max_intra = 0.0;
  double min_inter = std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, const std::vector<Tensor>*>> groups;
  for (const auto& [cls, xs] : feats.by_class) groups.emplace_back(cls, &xs);
  for (std::size_t a = 0; a < groups.size(); ++a) {
    max_intra = std::max(max_intra, class_dispersion(*groups[a].second));
    for (std::size_t b = a + 1; b < groups.size(); ++b)
      for (const auto& u : *groups[a].second)
        for (const auto& v : *groups[b].second)
          min_inter = std::min(min_inter, distance(u, v));
  }
  res.max_intra = max_intra;
  res.min_inter = min_inter;
  res.separation_holds = res.applicable && res.separation_part_applicable &&
                         max_intra < min_inter;
  return res;
}

GeometryReport geometry_report(const Model& m, const LabeledBatch& batch,
                               const CentroidSet& centroids, double delta_v,
                               double delta_d) {
  GeometryReport rep;
  const ClassFeatures feats = class_features(m, batch);
  rep.dispersion = dispersions(feats);
  for (const auto& [cls, d] : rep.dispersion)
    rep.max_dispersion = std::max(rep.max_dispersion, d);
  const MarginReport margins = class_margins(m, batch);
  rep.margin = margins.per_class;
  rep.min_margin = margins.min_margin;
  rep.prop2 = prop2_check(feats, centroids, delta_v);
  rep.prop3 = prop3_check(m, batch, centroids, delta_v, delta_d);
  return rep;
}

double phi_rho(double tau, double rho) {
  if (rho <= 0.0) fail(ErrorCode::invalid_argument, "ramp width must be positive");
  if (tau <= 0.0) return 1.0;
  if (tau >= rho) return 0.0;
  return 1.0 - tau / rho;
}

double empirical_margin_risk(std::span<const double> h_values, double rho) {
  if (h_values.empty()) fail(ErrorCode::invalid_argument, "empty sample");
  double acc = 0.0;
  for (double h : h_values) acc += phi_rho(h, rho);
  return acc / static_cast<double>(h_values.size());
}

double empirical_margin_risk(const Model& m, const Tensor& centroid,
                             std::span<const Tensor> xs, double r, double rho) {
  if (rho >= r * r)
    fail(ErrorCode::invalid_argument, "ramp width must stay below the squared radius");
  std::vector<double> h;
  h.reserve(xs.size());
  for (const auto& x : xs) {
    const double d = distance(features(m, x), centroid);
    h.push_back(r * r - d * d);
  }
  return empirical_margin_risk(h, rho);
}

double generalization_complexity(double lambda_cap, double radius_cap,
                                 std::size_t n, double rho) {
  if (n == 0) fail(ErrorCode::invalid_argument, "empty sample");
  if (rho <= 0.0 || lambda_cap <= 0.0 || radius_cap <= 0.0)
    fail(ErrorCode::invalid_argument, "need positive caps and rho > 0");
  const double nn = static_cast<double>(n);
  return (2.0 / rho) * (lambda_cap * lambda_cap +
                        2.0 * radius_cap * lambda_cap +
                        radius_cap * radius_cap / std::sqrt(nn));
}

double generalization_deviation(std::size_t n, double delta) {
  if (n == 0) fail(ErrorCode::invalid_argument, "empty sample");
  if (delta <= 0.0 || delta >= 1.0)
    fail(ErrorCode::invalid_argument, "need delta in (0,1)");
  const double nn = static_cast<double>(n);
  return 3.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * nn));
}

double generalization_slack(double lambda_cap, double radius_cap,
                            std::size_t n, double rho, double delta) {
  return generalization_complexity(lambda_cap, radius_cap, n, rho) +
         generalization_deviation(n, delta);
}

GenBoundReport theorem2_check(const Model& m, const Tensor& centroid, double r,
                              double rho, double delta,
                              std::span<const Tensor> train_xs,
                              std::span<const Tensor> holdout_xs) {
  if (train_xs.empty() || holdout_xs.empty())
    fail(ErrorCode::invalid_argument, "empty sample");
  if (rho >= r * r)
    fail(ErrorCode::invalid_argument, "ramp width must stay below the squared radius");
  GenBoundReport rep;
  rep.radius_cap = norm(centroid);
  std::vector<double> h_train;
  h_train.reserve(train_xs.size());
  // Boundedness caps come from the training sample alone; the holdout
  // only grades the bound.
  for (const auto& x : train_xs) {
    const Tensor q = features(m, x);
    rep.lambda_cap = std::max(rep.lambda_cap, norm(q));
    const double d = distance(q, centroid);
    h_train.push_back(r * r - d * d);
  }
  std::size_t misses = 0;
  for (const auto& x : holdout_xs) {
    const double d = distance(features(m, x), centroid);
    if (r * r - d * d < 0.0) ++misses;
  }
  rep.risk_train = empirical_margin_risk(h_train, rho);
  rep.slack = generalization_slack(rep.lambda_cap, rep.radius_cap,
                                   train_xs.size(), rho, delta);
  rep.bound = rep.risk_train + rep.slack;
  rep.holdout_error = static_cast<double>(misses) / static_cast<double>(holdout_xs.size());
  rep.holds = rep.holdout_error <= rep.bound;
  return rep;
}

double tau_estimate(const ClassFeatures& feats, const CentroidSet& centroids,
                    double delta_v) {
  if (feats.by_class.empty()) fail(ErrorCode::invalid_argument, "empty sample");
  double tau = 1.0;
  for (const auto& [cls, xs] : feats.by_class) {
    auto it = centroids.find(cls);
    if (it == centroids.end()) fail(ErrorCode::invalid_argument, "no centroid for class");
    std::size_t inside = 0;
    for (const auto& q : xs)
      if (distance(q, it->second) <= delta_v) ++inside;
    tau = std::min(tau, static_cast<double>(inside) / static_cast<double>(xs.size()));
  }
  return tau;
}

namespace {

struct Projector {
  std::vector<double> u0, u1;  // empty u1 means project to (x0, 0)

  std::pair<double, double> apply(const Tensor& x) const {
    if (x.size() != u0.size()) fail(ErrorCode::shape_mismatch, "projection dimension mismatch");
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < u0.size(); ++k) {
      a += u0[k] * x.data()[k];
      if (!u1.empty()) b += u1[k] * x.data()[k];
    }
    return {a, b};
  }
};

Projector make_projector(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) fail(ErrorCode::invalid_argument, "cannot project empty vectors");
  Projector pr;
  RngStream rng(seed, 0, 0);
  if (dim == 1) {
    pr.u0 = {1.0};
    return pr;
  }
  auto draw = [&](std::vector<double>& v) {
    v.resize(dim);
    for (auto& e : v) e = rng.normal();
  };
  draw(pr.u0);
  double n0 = 0.0;
  for (double e : pr.u0) n0 += e * e;
  n0 = std::sqrt(n0);
  for (int attempt = 0; n0 < 1e-12; ++attempt) {
    if (attempt >= 16) fail(ErrorCode::numeric, "degenerate projection draw");
    draw(pr.u0);
    n0 = 0.0;
    for (double e : pr.u0) n0 += e * e;
    n0 = std::sqrt(n0);
  }
  for (auto& e : pr.u0) e /= n0;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 16) fail(ErrorCode::numeric, "degenerate projection draw");
    draw(pr.u1);
    double dp = 0.0;
    for (std::size_t k = 0; k < dim; ++k) dp += pr.u1[k] * pr.u0[k];
    double n1 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      pr.u1[k] -= dp * pr.u0[k];
      n1 += pr.u1[k] * pr.u1[k];
    }
    n1 = std::sqrt(n1);
    if (n1 >= 1e-12) {
      for (auto& e : pr.u1) e /= n1;
      return pr;
    }
  }
}

}  // namespace

std::pair<Histogram2D, Histogram2D> project_histograms(
    std::span<const Tensor> a, std::span<const Tensor> b,
    const BinningSpec& spec) {
  if (a.empty() || b.empty()) fail(ErrorCode::invalid_argument, "empty sample");
  if (spec.bins < 2) fail(ErrorCode::invalid_argument, "need at least two bins per axis");
  const std::size_t dim = a[0].size();
  Projector pr = make_projector(dim, spec.projection_seed);

  std::vector<std::pair<double, double>> ca, cb;
  ca.reserve(a.size());
  cb.reserve(b.size());
  double lo0 = std::numeric_limits<double>::infinity(), hi0 = -lo0;
  double lo1 = lo0, hi1 = -lo0;
  auto take = [&](const Tensor& x, std::vector<std::pair<double, double>>& out) {
    auto c = pr.apply(x);
    if (!std::isfinite(c.first) || !std::isfinite(c.second))
      fail(ErrorCode::numeric, "non-finite projection");
    lo0 = std::min(lo0, c.first);
    hi0 = std::max(hi0, c.first);
    lo1 = std::min(lo1, c.second);
    hi1 = std::max(hi1, c.second);
    out.push_back(c);
  };
  for (const auto& x : a) take(x, ca);
  for (const auto& x : b) take(x, cb);
  // A collapsed axis still needs a nonzero width for binning.
  auto widen = [](double& lo, double& hi) {
    if (hi - lo <= 0.0) {
      const double pad = std::max(1e-9, std::abs(lo) * 1e-9);
      lo -= pad;
      hi += pad;
    }
  };
  widen(lo0, hi0);
  widen(lo1, hi1);

  Histogram2D hp, hq;
  for (Histogram2D* h : {&hp, &hq}) {
    h->bins = spec.bins;
    h->lo0 = lo0;
    h->hi0 = hi0;
    h->lo1 = lo1;
    h->hi1 = hi1;
    h->counts.assign(spec.bins * spec.bins, 0.0);
  }
  auto fill = [&](const std::vector<std::pair<double, double>>& cs, Histogram2D& h) {
    for (const auto& c : cs) {
      auto idx = [&](double v, double lo, double hi) {
        auto i = static_cast<std::ptrdiff_t>((v - lo) / (hi - lo) *
                                             static_cast<double>(spec.bins));
        if (i < 0) i = 0;
        if (i >= static_cast<std::ptrdiff_t>(spec.bins))
          i = static_cast<std::ptrdiff_t>(spec.bins) - 1;
        return static_cast<std::size_t>(i);
      };
      h.counts[idx(c.first, lo0, hi0) * spec.bins + idx(c.second, lo1, hi1)] += 1.0;
    }
    h.total = static_cast<double>(cs.size());
  };
  fill(ca, hp);
  fill(cb, hq);
  return {hp, hq};
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    fail(ErrorCode::invalid_argument, "histograms do not share binning");
  double sp = 0.0, sq = 0.0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  if (sp <= 0.0 || sq <= 0.0)
    fail(ErrorCode::invalid_argument, "empty histogram");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i] / sp, b = q[i] / sq;
    const double m = 0.5 * (a + b);
    if (a > 0.0) acc += 0.5 * a * std::log(a / m);
    if (b > 0.0) acc += 0.5 * b * std::log(b / m);
  }
  return std::max(0.0, acc);
}

double jsd(const Histogram2D& p, const Histogram2D& q) {
  if (p.bins != q.bins || p.counts.size() != q.counts.size() || p.lo0 != q.lo0 ||
      p.hi0 != q.hi0 || p.lo1 != q.lo1 || p.hi1 != q.hi1)
    fail(ErrorCode::invalid_argument, "histograms do not share binning");
  return jsd(std::span<const double>(p.counts), std::span<const double>(q.counts));
}

Theorem3Report theorem3_check(const Model& m, const LabeledBatch& data,
                              const CentroidSet& centroids, double delta_v,
                              std::size_t layer_index,
                              const BinningSpec& binning, double tolerance) {
  if (data.xs.size() != data.ys.size())
    fail(ErrorCode::shape_mismatch, "sample and label counts differ");
  if (layer_index < 1 || layer_index > m.layer_count())
    fail(ErrorCode::invalid_argument, "layer index out of range");
  Theorem3Report rep;
  rep.layer = layer_index;
  // Occupancy is always measured where the centroids live: the
  // penultimate layer.
  const ClassFeatures feats = class_features(m, data);
  if (feats.by_class.size() < 2)
    fail(ErrorCode::invalid_argument, "need at least two classes");
  rep.tau = tau_estimate(feats, centroids, delta_v);
  rep.threshold = rep.tau >= 0.5 ? 0.5 * (2.0 * rep.tau - 1.0) * (2.0 * rep.tau - 1.0) : 0.0;
  rep.applicable = rep.tau >= 0.5;

  std::map<int, std::vector<Tensor>> layer_feats;
  for (std::size_t n = 0; n < data.xs.size(); ++n)
    layer_feats[data.ys[n]].push_back(features_at_layer(m, data.xs[n], layer_index));

  // Deterministic per-layer projection seed.
  BinningSpec layer_spec = binning;
  layer_spec.projection_seed = RngStream(binning.projection_seed, layer_index, 0).next_u64();

  rep.min_jsd = std::numeric_limits<double>::infinity();
  rep.all_hold = rep.applicable;
  for (auto ia = layer_feats.begin(); ia != layer_feats.end(); ++ia) {
    for (auto ib = std::next(ia); ib != layer_feats.end(); ++ib) {
      Theorem3Report::PairResult pair;
      pair.class_a = ia->first;
      pair.class_b = ib->first;
      auto [hp, hq] = project_histograms(ia->second, ib->second, layer_spec);
      pair.jsd_value = jsd(hp, hq);
      pair.holds = pair.jsd_value >= rep.threshold - tolerance;
      rep.min_jsd = std::min(rep.min_jsd, pair.jsd_value);
      rep.all_hold = rep.all_hold && pair.holds;
      rep.pairs.push_back(pair);
    }
  }
  return rep;
}

}  // namespace noisecurve
