#include "noisecurve/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "noisecurve/errors.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {

TrainMethod method_from_name(const std::string& name) {
  if (name == "normal") return TrainMethod::normal;
  if (name == "noisy_only") return TrainMethod::noisy_only;
  if (name == "clean_plus_noisy") return TrainMethod::clean_plus_noisy;
  if (name == "stability") return TrainMethod::stability;
  if (name == "ours") return TrainMethod::ours;
  fail(ErrorCode::config, "unknown training method: " + name);
}

const char* method_name(TrainMethod m) {
  switch (m) {
    case TrainMethod::normal: return "normal";
    case TrainMethod::noisy_only: return "noisy_only";
    case TrainMethod::clean_plus_noisy: return "clean_plus_noisy";
    case TrainMethod::stability: return "stability";
    case TrainMethod::ours: return "ours";
  }
  fail(ErrorCode::internal, "unknown training method");
}

namespace {

bool uses_noise(TrainMethod m) { return m != TrainMethod::normal; }

// Columns of a (in, B) matrix from the chosen samples.
Tensor pack_columns(const Dataset& data, std::span<const std::size_t> order,
                    std::size_t begin, std::size_t end) {
  const std::size_t in = data.shape.sample_size();
  const std::size_t b = end - begin;
  std::vector<double> buf(in * b);
  for (std::size_t j = 0; j < b; ++j) {
    const Tensor& x = data.samples[order[begin + j]];
    for (std::size_t r = 0; r < in; ++r) buf[r * b + j] = x.data()[r];
  }
  return Tensor::matrix(in, b, std::move(buf));
}

Tensor pack_noised_columns(const Dataset& data, std::span<const std::size_t> order,
                           std::size_t begin, std::size_t end,
                           const PerturbationSpec& spec, std::uint64_t noise_seed,
                           std::size_t epoch) {
  const std::size_t in = data.shape.sample_size();
  const std::size_t b = end - begin;
  std::vector<double> buf(in * b);
  for (std::size_t j = 0; j < b; ++j) {
    const std::size_t i = order[begin + j];
    RngStream rng(noise_seed, i, epoch);
    const Tensor noised = apply(spec, data.samples[i], data.shape, rng);
    for (std::size_t r = 0; r < in; ++r) buf[r * b + j] = noised.data()[r];
  }
  return Tensor::matrix(in, b, std::move(buf));
}

struct ParamRef {
  Tensor* value;
  Var var;
};

std::vector<ParamRef> param_refs(Model& m, const ModelVars& mv) {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    out.push_back({&m.layers[l].w, mv.layers[l].w});
    out.push_back({&m.layers[l].b, mv.layers[l].b});
  }
  out.push_back({&m.head_w, mv.head_w});
  out.push_back({&m.head_b, mv.head_b});
  return out;
}

struct BatchTerms {
  Var total;
  double softmax = 0.0;
  double compact = 0.0;
  double margin = 0.0;
  double reg = 0.0;
  double noisy = 0.0;
  double stability = 0.0;
  std::size_t correct = 0;
  CentroidSet naive;  // batch means, for the rolling commit
};

std::size_t count_correct(const Tensor& logits, std::span<const std::uint32_t> labels) {
  std::size_t correct = 0;
  const std::size_t c = logits.rows(), b = logits.cols();
  for (std::size_t j = 0; j < b; ++j) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < c; ++r)
      if (logits.at(r, j) > logits.at(best, j)) best = r;
    if (best == labels[j]) ++correct;
  }
  return correct;
}

BatchTerms build_batch_loss(Tape& t, const ModelVars& mv, const TrainOptions& opt,
                            const CentroidState& state, const Tensor& xmat,
                            const Tensor& xnoise,
                            const std::vector<std::uint32_t>& labels) {
  BatchTerms out;
  const bool wants_noise = uses_noise(opt.method);
  const Var x = t.constant(xmat);
  const Var xn = wants_noise ? t.constant(xnoise) : Var{};

  if (opt.method == TrainMethod::noisy_only) {
    const Var q = backbone_out(t, mv, xn);
    const Var z = logits_out(t, mv, q);
    const Var ce = t.softmax_cross_entropy(z, labels);
    out.total = ce;
    out.softmax = t.value(ce).item();
    out.correct = count_correct(t.value(z), labels);
    return out;
  }

  const Var q = backbone_out(t, mv, x);
  const Var z = logits_out(t, mv, q);
  const Var ce = t.softmax_cross_entropy(z, labels);
  out.softmax = t.value(ce).item();
  out.correct = count_correct(t.value(z), labels);

  if (opt.method == TrainMethod::normal) {
    out.total = ce;
    return out;
  }
  if (opt.method == TrainMethod::clean_plus_noisy) {
    const Var qn = backbone_out(t, mv, xn);
    const Var zn = logits_out(t, mv, qn);
    const Var cen = t.softmax_cross_entropy(zn, labels);
    out.noisy = t.value(cen).item();
    out.softmax = 0.5 * (out.softmax + out.noisy);
    out.total = t.scale(t.add(ce, cen), 0.5);
    return out;
  }
  if (opt.method == TrainMethod::stability) {
    const Var qn = backbone_out(t, mv, xn);
    const Var drift = t.colnorms(t.sub(q, qn));
    const Var mean_drift =
        t.scale(t.sum(drift), 1.0 / static_cast<double>(labels.size()));
    out.stability = t.value(mean_drift).item();
    out.total = t.add(ce, t.scale(mean_drift, opt.stability_weight));
    return out;
  }

  // ours: cluster geometry terms on top of the clean cross-entropy.
  const Var qn = backbone_out(t, mv, xn);
  std::map<int, std::vector<std::uint32_t>> columns_of;
  for (std::uint32_t j = 0; j < labels.size(); ++j)
    columns_of[static_cast<int>(labels[j])].push_back(j);

  std::map<int, Var> feats, noisy_feats, naive, blended;
  for (const auto& [cls, cols] : columns_of) {
    const Var qc = t.gather_cols(q, cols);
    feats[cls] = qc;
    noisy_feats[cls] = t.gather_cols(qn, cols);
    const Var mean_c = t.rowmeans(qc);
    naive[cls] = mean_c;
    auto prev = state.previous.find(cls);
    if (prev == state.previous.end()) {
      blended[cls] = mean_c;  // first sighting enters at the batch mean
    } else {
      blended[cls] = t.add(t.scale(t.constant(prev->second), state.gamma),
                           t.scale(mean_c, 1.0 - state.gamma));
    }
    out.naive[cls] = t.value(mean_c);
  }
  const bool blend = state.mode != CentroidMode::naive;
  const std::map<int, Var>& compact_view = blend ? blended : naive;
  const std::map<int, Var>& margin_view =
      state.mode == CentroidMode::momentum ? blended : naive;

  const Var compact = build_compact_loss(t, feats, compact_view, opt.loss.delta_v);
  const Var margin =
      build_margin_loss(t, mv.head_w, mv.head_b, margin_view, opt.loss.delta_d);
  const Var reg = build_reg_loss(t, compact_view);
  const Var noisy = build_compact_loss(t, noisy_feats, compact_view, opt.loss.delta_v);
  out.compact = t.value(compact).item();
  out.margin = t.value(margin).item();
  out.reg = t.value(reg).item();
  out.noisy = t.value(noisy).item();

  Var total = t.add(ce, t.scale(compact, opt.loss.alpha));
  total = t.add(total, t.scale(margin, opt.loss.beta));
  total = t.add(total, t.scale(reg, opt.loss.gamma_reg));
  total = t.add(total, t.scale(noisy, opt.loss.lambda));
  out.total = total;
  return out;
}

}  // namespace

TrainResult train(const Dataset& data, const TrainOptions& opt) {
  if (data.size() == 0) fail(ErrorCode::invalid_argument, "empty dataset");
  if (data.class_count < 2) fail(ErrorCode::invalid_argument, "need at least two classes");
  if (opt.batch_size == 0) fail(ErrorCode::config, "train.batch_size must be positive");
  if (opt.lr <= 0.0) fail(ErrorCode::config, "train.lr must be positive");
  if (opt.decay_factor <= 0.0) fail(ErrorCode::config, "train.decay_factor must be positive");
  if (opt.momentum < 0.0 || opt.momentum >= 1.0)
    fail(ErrorCode::config, "train.momentum must be in [0,1)");
  if (uses_noise(opt.method) && !opt.has_noise)
    fail(ErrorCode::config,
         std::string("method ") + method_name(opt.method) + " requires train.noise settings");
  if (opt.loss.delta_d <= opt.loss.delta_v)
    std::cerr << "warning: delta_d <= delta_v leaves no room between cluster "
                 "radius and boundary distance\n";

  // Independent sub-streams so reordering one consumer cannot shift the
  // draws of another.
  const std::uint64_t model_seed = RngStream(opt.seed, 1, 0).next_u64();
  const std::uint64_t shuffle_seed = RngStream(opt.seed, 2, 0).next_u64();
  const std::uint64_t noise_seed = RngStream(opt.seed, 3, 0).next_u64();

  std::vector<std::size_t> dims;
  dims.push_back(data.shape.sample_size());
  for (std::size_t d : opt.hidden_dims) dims.push_back(d);
  Model model = make_mlp(dims, data.class_count, model_seed);

  CentroidState state;
  state.gamma = opt.centroid_gamma;
  state.mode = opt.centroid_mode;

  std::vector<Tensor> velocity;
  TrainResult result;
  result.metrics.reserve(opt.epochs);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::size_t decays = 0;
    for (std::size_t d : opt.decay_epochs)
      if (epoch >= d) ++decays;
    const double lr = opt.lr / std::pow(opt.decay_factor, static_cast<double>(decays));

    RngStream shuffle_rng(shuffle_seed, epoch, 0);
    shuffle(order, shuffle_rng);

    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    std::size_t correct = 0;

    for (std::size_t begin = 0; begin < data.size(); begin += opt.batch_size) {
      const std::size_t end = std::min(begin + opt.batch_size, data.size());
      const std::size_t b = end - begin;
      const Tensor xmat = pack_columns(data, order, begin, end);
      Tensor xnoise;
      if (uses_noise(opt.method))
        xnoise = pack_noised_columns(data, order, begin, end, opt.noise,
                                     noise_seed, epoch);
      std::vector<std::uint32_t> labels(b);
      for (std::size_t j = 0; j < b; ++j)
        labels[j] = static_cast<std::uint32_t>(data.labels[order[begin + j]]);

      Tape t;
      ModelVars mv = declare_trainable(t, model);
      BatchTerms terms = build_batch_loss(t, mv, opt, state, xmat, xnoise, labels);

      const double batch_total = t.value(terms.total).item();
      if (!std::isfinite(batch_total))
        fail(ErrorCode::numeric, "training diverged at epoch " + std::to_string(epoch) +
                                     " batch " + std::to_string(begin / opt.batch_size));

      t.backward(terms.total);
      auto refs = param_refs(model, mv);
      if (velocity.empty()) {
        velocity.reserve(refs.size());
        for (const auto& p : refs) velocity.push_back(Tensor::zeros(p.value->shape()));
      }
      for (std::size_t k = 0; k < refs.size(); ++k) {
        const Tensor g = t.grad(refs[k].var);
        auto vd = velocity[k].data();
        auto pd = refs[k].value->data();
        auto gd = g.data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
          vd[i] = opt.momentum * vd[i] + (gd[i] + opt.weight_decay * pd[i]);
          pd[i] -= lr * vd[i];
        }
      }

      if (opt.method == TrainMethod::ours)
        state.previous = momentum_update(state, terms.naive);

      const double w = static_cast<double>(b) / static_cast<double>(data.size());
      em.total += w * batch_total;
      em.softmax += w * terms.softmax;
      em.compact += w * terms.compact;
      em.margin += w * terms.margin;
      em.reg += w * terms.reg;
      em.noisy += w * terms.noisy;
      em.stability += w * terms.stability;
      correct += terms.correct;
    }
    em.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    result.metrics.push_back(em);
  }

  // Methods without rolling centroids still ship one set so evaluation
  // can score the cluster losses: plain means over the training data.
  // A zero-epoch run of the rolling method gets the same fallback.
  if (opt.method != TrainMethod::ours || state.previous.empty()) {
    ClassFeatures feats;
    for (std::size_t i = 0; i < data.size(); ++i)
      feats.by_class[data.labels[i]].push_back(features(model, data.samples[i]));
    state.previous = batch_centroid(feats);
  }

  result.checkpoint.version = 1;
  result.checkpoint.seed = opt.seed;
  result.checkpoint.model = std::move(model);
  result.checkpoint.centroids = std::move(state);
  result.checkpoint.loss = opt.loss;
  return result;
}

std::string metrics_csv(std::span<const EpochMetrics> rows) {
  std::ostringstream out;
  out << "epoch,lr,loss_total,loss_softmax,loss_compact,loss_margin,loss_reg,"
         "loss_noisy,loss_stability,train_accuracy\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << fmt17(r.lr) << ',' << fmt17(r.total) << ','
        << fmt17(r.softmax) << ',' << fmt17(r.compact) << ',' << fmt17(r.margin)
        << ',' << fmt17(r.reg) << ',' << fmt17(r.noisy) << ','
        << fmt17(r.stability) << ',' << fmt17(r.accuracy) << '\n';
  }
  return out.str();
}

}  // namespace noisecurve
