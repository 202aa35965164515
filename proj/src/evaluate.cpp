#include "noisecurve/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "noisecurve/curvature.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/theory.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {
namespace {

LabeledBatch as_batch(const Dataset& d) {
  LabeledBatch b;
  b.xs = d.samples;
  b.ys = d.labels;
  return b;
}

double accuracy_on(const Model& m, const Dataset& d) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (predict(m, d.samples[i]) == static_cast<std::size_t>(d.labels[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

}  // namespace

std::vector<EvalRecord> evaluate(const Checkpoint& ck, const Dataset& test,
                                 const EvalOptions& opt) {
  if (test.size() == 0) fail(ErrorCode::invalid_argument, "empty test set");
  if (opt.repeats == 0) fail(ErrorCode::invalid_argument, "eval.repeats must be positive");
  const CentroidViews views{ck.centroids.previous, ck.centroids.previous};
  const LabeledBatch clean = as_batch(test);

  std::vector<EvalRecord> out;
  EvalRecord base;
  base.perturbation = "clean";
  base.repeat = 0;
  base.accuracy = accuracy_on(ck.model, test);
  base.losses = total_loss(ck.model, clean, LabeledBatch{}, views, ck.loss);
  out.push_back(std::move(base));

  for (std::size_t p = 0; p < opt.perturbations.size(); ++p) {
    const std::uint64_t pseed = RngStream(opt.seed, p + 1, 0).next_u64();
    for (std::size_t r = 0; r < opt.repeats; ++r) {
      const Dataset noised = noised_dataset(test, opt.perturbations[p], pseed, r);
      EvalRecord rec;
      rec.perturbation = opt.perturbations[p].name();
      rec.repeat = r;
      rec.accuracy = accuracy_on(ck.model, noised);
      rec.losses = total_loss(ck.model, clean, as_batch(noised), views, ck.loss);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::string eval_csv(std::span<const EvalRecord> records) {
  std::ostringstream out;
  out << "perturbation,repeat,accuracy,loss_total,loss_softmax,loss_compact,"
         "loss_margin,loss_reg,loss_noisy\n";
  for (const auto& r : records) {
    out << r.perturbation << ',' << r.repeat << ',' << fmt17(r.accuracy) << ','
        << fmt17(r.losses.total) << ',' << fmt17(r.losses.softmax) << ','
        << fmt17(r.losses.compact) << ',' << fmt17(r.losses.margin) << ','
        << fmt17(r.losses.reg) << ',' << fmt17(r.losses.noisy) << '\n';
  }
  return out.str();
}

CurvatureReport curvature_report(const Checkpoint& ck, const Dataset& test,
                                 const CurvatureOptions& opt) {
  if (test.size() == 0) fail(ErrorCode::invalid_argument, "empty test set");
  if (opt.probes == 0 || opt.repeats == 0)
    fail(ErrorCode::invalid_argument, "probes and repeats must be positive");
  const std::uint64_t probe_seed = RngStream(opt.seed, 1, 0).next_u64();
  const std::uint64_t pred_seed = RngStream(opt.seed, 2, 0).next_u64();

  CurvatureReport rep;
  std::vector<double> lambdas, accs;
  lambdas.reserve(test.size());
  accs.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    CurvatureRow row;
    row.index = i;
    row.label = test.labels[i];
    RngStream prng(probe_seed, i, 0);
    row.lambda = curvature_estimate(ck.model, test.samples[i], test.labels[i],
                                    opt.probes, opt.probe_step, prng);
    if (opt.exact_oracle) {
      const Tensor h = exact_hessian(ck.model, test.samples[i], test.labels[i]);
      row.exact_sum_sq = eig_sums(jacobi_eigenvalues(h)).sum_sq;
      row.has_exact = true;
    }
    std::size_t correct = 0;
    for (std::size_t r = 0; r < opt.repeats; ++r) {
      RngStream nrng(pred_seed, i, r);
      const Tensor noised = apply(opt.noise, test.samples[i], test.shape, nrng);
      if (predict(ck.model, noised) == static_cast<std::size_t>(test.labels[i]))
        ++correct;
    }
    row.correct_count = correct;
    row.correct_frac = static_cast<double>(correct) / static_cast<double>(opt.repeats);
    lambdas.push_back(row.lambda);
    accs.push_back(row.correct_frac);
    rep.rows.push_back(row);
  }

  for (int k = 1; k <= 10; ++k) {
    const double p = static_cast<double>(k) / 10.0;
    const double cut = quantile(lambdas, p);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      if (lambdas[i] <= cut) {
        acc += accs[i];
        ++n;
      }
    rep.acc_by_quantile.emplace_back(p, n ? acc / static_cast<double>(n) : 0.0);
  }

  // Samples bucketed by correct count, mean curvature per bucket.
  std::vector<double> ks, group_lambda;
  for (std::size_t k = 0; k <= opt.repeats; ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : rep.rows)
      if (row.correct_count == k) {
        sum += row.lambda;
        ++n;
      }
    if (n > 0) {
      CurvatureReport::Group g;
      g.correct_count = k;
      g.size = n;
      g.mean_lambda = sum / static_cast<double>(n);
      rep.groups.push_back(g);
      ks.push_back(static_cast<double>(k));
      group_lambda.push_back(g.mean_lambda);
    }
  }
  try {
    rep.group_pearson = pearson(ks, group_lambda);
    rep.pearson_defined = true;
  } catch (const Error&) {
    rep.pearson_defined = false;
  }

  const double cut90 = quantile(lambdas, 0.9);
  std::vector<double> low90;
  for (double l : lambdas)
    if (l <= cut90) low90.push_back(l);
  rep.low90_q25 = quantile(low90, 0.25);
  rep.low90_median = quantile(low90, 0.5);
  rep.low90_q75 = quantile(low90, 0.75);
  return rep;
}

std::string curvature_csv(std::span<const CurvatureRow> rows) {
  const bool exact = !rows.empty() && rows.front().has_exact;
  std::ostringstream out;
  out << "index,label,curvature,correct_count,correct_frac";
  if (exact) out << ",exact_sum_sq";
  out << '\n';
  for (const auto& r : rows) {
    out << r.index << ',' << r.label << ',' << fmt17(r.lambda) << ','
        << r.correct_count << ',' << fmt17(r.correct_frac);
    if (exact) out << ',' << fmt17(r.exact_sum_sq);
    out << '\n';
  }
  return out.str();
}

TransformCheck transform_check(const Checkpoint& ck, double nu,
                               const Dataset& data, std::size_t probe_count,
                               std::uint64_t seed) {
  if (data.size() == 0) fail(ErrorCode::invalid_argument, "empty dataset");
  if (probe_count == 0) fail(ErrorCode::invalid_argument, "need at least one probe");
  TransformCheck res;
  res.nu = nu;
  res.transformed = ck;
  res.transformed.model = scale_transform(ck.model, nu);
  // Centroids live in feature space, so they scale with the features.
  for (auto& [cls, m] : res.transformed.centroids.previous) m = nu * m;

  // Probes drawn around the data's per-coordinate spread so agreement is
  // measured where the model actually operates.
  const std::size_t dim = data.shape.sample_size();
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (const auto& x : data.samples)
    for (std::size_t k = 0; k < dim; ++k) mu[k] += x.data()[k];
  for (auto& v : mu) v /= static_cast<double>(data.size());
  for (const auto& x : data.samples)
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = x.data()[k] - mu[k];
      sd[k] += d * d;
    }
  for (auto& v : sd)
    v = data.size() > 1 ? std::sqrt(v / static_cast<double>(data.size() - 1)) : 0.0;

  std::size_t agree = 0;
  for (std::size_t j = 0; j < probe_count; ++j) {
    RngStream rng(seed, j, 0);
    std::vector<double> p(dim);
    for (std::size_t k = 0; k < dim; ++k) p[k] = mu[k] + sd[k] * rng.normal();
    const Tensor x = Tensor::vector(std::move(p));
    if (predict(ck.model, x) == predict(res.transformed.model, x)) ++agree;
  }
  res.agreement = static_cast<double>(agree) / static_cast<double>(probe_count);

  const LabeledBatch batch = as_batch(data);
  const MarginReport m0 = class_margins(ck.model, batch);
  const MarginReport m1 = class_margins(res.transformed.model, batch);
  if (m0.min_margin != 0.0) res.margin_ratio = m1.min_margin / m0.min_margin;

  const ClassFeatures f0 = class_features(ck.model, batch);
  const ClassFeatures f1 = class_features(res.transformed.model, batch);
  double d0 = 0.0, d1 = 0.0;
  for (const auto& [cls, xs] : f0.by_class) d0 = std::max(d0, class_dispersion(xs));
  for (const auto& [cls, xs] : f1.by_class) d1 = std::max(d1, class_dispersion(xs));
  if (d0 != 0.0) res.dispersion_ratio = d1 / d0;
  return res;
}

}  // namespace noisecurve
