#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "noisecurve/centroids.hpp"
#include "noisecurve/checkpoint.hpp"
#include "noisecurve/data.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/evaluate.hpp"
#include "noisecurve/model.hpp"
#include "noisecurve/perturb.hpp"
#include "noisecurve/train.hpp"

using namespace noisecurve;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

TrainOptions tiny_options(TrainMethod method, std::size_t epochs) {
  TrainOptions opt;
  opt.method = method;
  opt.hidden_dims = {8};
  opt.epochs = epochs;
  opt.lr = 5e-3;
  opt.batch_size = 32;
  opt.decay_epochs = {};
  opt.seed = 5;
  if (method != TrainMethod::normal) {
    opt.has_noise = true;
    opt.noise = PerturbationSpec::gaussian_noise(0.2);
  }
  return opt;
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

double accuracy_on(const Checkpoint& ck, const Dataset& d) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (static_cast<int>(predict(ck.model, d.samples[i])) == d.labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (TrainMethod m : {TrainMethod::normal, TrainMethod::noisy_only,
                        TrainMethod::clean_plus_noisy, TrainMethod::stability,
                        TrainMethod::ours})
    CHECK(method_from_name(method_name(m)) == m);
  CHECK(code_of([] { (void)method_from_name("sparkle"); }) ==
        ErrorCode::config);
}

TEST_CASE("option validation uses config errors") {
  Dataset d = gen_blobs(2, 10, 3, 1.0, 1);
  TrainOptions opt = tiny_options(TrainMethod::normal, 1);
  opt.batch_size = 0;
  CHECK(code_of([&] { (void)train(d, opt); }) == ErrorCode::config);
  opt = tiny_options(TrainMethod::normal, 1);
  opt.lr = 0.0;
  CHECK(code_of([&] { (void)train(d, opt); }) == ErrorCode::config);
  opt = tiny_options(TrainMethod::normal, 1);
  opt.momentum = 1.0;
  CHECK(code_of([&] { (void)train(d, opt); }) == ErrorCode::config);
  opt = tiny_options(TrainMethod::normal, 1);
  opt.decay_factor = 0.0;
  CHECK(code_of([&] { (void)train(d, opt); }) == ErrorCode::config);
  // Noise-dependent method without noise settings.
  opt = tiny_options(TrainMethod::noisy_only, 1);
  opt.has_noise = false;
  CHECK(code_of([&] { (void)train(d, opt); }) == ErrorCode::config);

  Dataset empty;
  empty.shape.dim = 3;
  CHECK(code_of([&] { (void)train(empty, tiny_options(TrainMethod::normal, 1)); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("zero-epoch training still ships usable centroids") {
  Dataset d = gen_blobs(3, 12, 4, 1.0, 3);
  TrainResult r = train(d, tiny_options(TrainMethod::ours, 0));
  CHECK(r.metrics.empty());
  CHECK(r.checkpoint.centroids.previous.size() == 3);
  CHECK(r.checkpoint.model.in_dim() == 4);
  CHECK(r.checkpoint.model.class_count() == 3);
  // Fallback centroids are plain feature means over the training data.
  ClassFeatures f;
  for (std::size_t i = 0; i < d.size(); ++i)
    f.by_class[d.labels[i]].push_back(
        features(r.checkpoint.model, d.samples[i]));
  CentroidSet naive = batch_centroid(f);
  for (const auto& [cls, cen] : naive)
    CHECK(r.checkpoint.centroids.previous.at(cls) == cen);
}

TEST_CASE("huge learning rates diverge with a numeric error") {
  Dataset d = gen_blobs(2, 20, 3, 1.0, 7);
  TrainOptions opt = tiny_options(TrainMethod::normal, 10);
  opt.lr = 1e12;
  CHECK(code_of([&] { (void)train(d, opt); }) == ErrorCode::numeric);
}

TEST_CASE("training is deterministic and seed sensitive") {
  Dataset d = gen_blobs(3, 20, 5, 1.0, 9);
  TrainOptions opt = tiny_options(TrainMethod::ours, 4);
  TrainResult a = train(d, opt);
  TrainResult b = train(d, opt);
  CHECK(checkpoint_to_json(a.checkpoint) == checkpoint_to_json(b.checkpoint));
  CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));

  opt.seed = 6;
  TrainResult c = train(d, opt);
  CHECK(checkpoint_to_json(c.checkpoint) != checkpoint_to_json(a.checkpoint));
}

TEST_CASE("metrics csv shape") {
  Dataset d = gen_blobs(2, 16, 3, 1.0, 13);
  TrainResult r = train(d, tiny_options(TrainMethod::normal, 3));
  REQUIRE(r.metrics.size() == 3);
  const std::string csv = metrics_csv(r.metrics);
  CHECK(line_count(csv) == 4);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("epoch") != std::string::npos);
  CHECK(header.find("total") != std::string::npos);
  CHECK(header.find("accuracy") != std::string::npos);
  // Rows carry the epoch index in order.
  std::string row;
  std::getline(in, row);
  CHECK(row.substr(0, 2) == "0,");
  CHECK(r.metrics[0].epoch == 0);
  CHECK(r.metrics[2].epoch == 2);
}

TEST_CASE("learning rate decays at the configured epochs") {
  Dataset d = gen_blobs(2, 8, 3, 1.0, 17);
  TrainOptions opt = tiny_options(TrainMethod::normal, 4);
  opt.lr = 1.0e-2;
  opt.decay_epochs = {2};
  opt.decay_factor = 10.0;
  TrainResult r = train(d, opt);
  CHECK(r.metrics[0].lr == 1.0e-2);
  CHECK(r.metrics[1].lr == 1.0e-2);
  CHECK(r.metrics[2].lr == doctest::Approx(1.0e-3).epsilon(1e-12));
  CHECK(r.metrics[3].lr == doctest::Approx(1.0e-3).epsilon(1e-12));
}

TEST_CASE("normal training separates easy blobs") {
  Dataset d = gen_blobs(3, 40, 6, 1.0, 19);
  Dataset held = gen_blobs(3, 30, 6, 1.0, 20);
  TrainOptions opt = tiny_options(TrainMethod::normal, 40);
  opt.hidden_dims = {16, 8};
  opt.batch_size = 16;
  TrainResult r = train(d, opt);
  CHECK(r.metrics.back().total < r.metrics.front().total);
  CHECK(r.metrics.back().accuracy >= 0.95);
  CHECK(accuracy_on(r.checkpoint, held) >= 0.9);
}

TEST_CASE("cluster method drives its losses down") {
  Dataset d = gen_blobs(3, 30, 5, 1.0, 23);
  TrainOptions opt = tiny_options(TrainMethod::ours, 30);
  opt.loss.delta_v = 0.5;
  opt.loss.delta_d = 1.5;
  TrainResult r = train(d, opt);
  CHECK(r.metrics.back().compact < r.metrics.front().compact);
  CHECK(r.metrics.back().total < r.metrics.front().total);
  // The alignment term tracked the noisy batches the whole run.
  CHECK(r.metrics.back().noisy >= 0.0);
  CHECK(r.checkpoint.centroids.previous.size() == 3);
  CHECK(r.checkpoint.loss.delta_d == 1.5);
  CHECK(r.checkpoint.seed == opt.seed);
}

TEST_CASE("relu hidden layers beat a linear probe on rings") {
  Dataset train_set = gen_rings(3, 120, 29);
  Dataset test_set = gen_rings(3, 60, 30);

  TrainOptions linear = tiny_options(TrainMethod::normal, 60);
  linear.hidden_dims = {8};  // single affine layer: a linear classifier
  linear.lr = 1e-2;
  TrainResult lr_run = train(train_set, linear);

  TrainOptions mlp = tiny_options(TrainMethod::normal, 60);
  mlp.hidden_dims = {24, 16};
  mlp.lr = 1e-2;
  TrainResult mlp_run = train(train_set, mlp);

  const double lin_acc = accuracy_on(lr_run.checkpoint, test_set);
  const double mlp_acc = accuracy_on(mlp_run.checkpoint, test_set);
  CHECK(mlp_acc >= lin_acc + 0.1);
  CHECK(mlp_acc >= 0.8);
}

TEST_CASE("evaluation emits the clean record first and is deterministic") {
  Dataset d = gen_blobs(3, 20, 5, 1.0, 31);
  SplitResult sr = split_dataset(d, 0.7, 4);
  TrainResult r = train(sr.train, tiny_options(TrainMethod::ours, 10));

  EvalOptions opt;
  opt.perturbations = {PerturbationSpec::gaussian_noise(0.3),
                       PerturbationSpec::uniform_noise(0.2)};
  opt.repeats = 2;
  opt.seed = 77;
  std::vector<EvalRecord> recs = evaluate(r.checkpoint, sr.test, opt);
  REQUIRE(recs.size() == 1 + 2 * 2);
  CHECK(recs[0].perturbation == "clean");
  CHECK(recs[0].repeat == 0);
  CHECK(recs[1].perturbation == "gaussian(0.3)");
  CHECK(recs[1].repeat == 0);
  CHECK(recs[2].repeat == 1);
  CHECK(recs[3].perturbation == "uniform(0.2)");

  // The clean record has no alignment term; noisy records may.
  CHECK(recs[0].losses.noisy == 0.0);
  CHECK(recs[0].accuracy == accuracy_on(r.checkpoint, sr.test));

  std::vector<EvalRecord> again = evaluate(r.checkpoint, sr.test, opt);
  CHECK(eval_csv(again) == eval_csv(recs));

  // Zero-strength noise scores exactly like the clean pass.
  EvalOptions zero;
  zero.perturbations = {PerturbationSpec::gaussian_noise(0.0)};
  std::vector<EvalRecord> zrecs = evaluate(r.checkpoint, sr.test, zero);
  CHECK(zrecs[1].accuracy == zrecs[0].accuracy);

  EvalOptions bad;
  bad.repeats = 0;
  CHECK_THROWS_AS((void)evaluate(r.checkpoint, sr.test, bad), Error);

  const std::string csv = eval_csv(recs);
  CHECK(csv.rfind("perturbation,repeat,accuracy,loss_total", 0) == 0);
  CHECK(line_count(csv) == recs.size() + 1);
}

TEST_CASE("curvature report aggregates") {
  Dataset d = gen_blobs(3, 25, 6, 1.0, 37);
  SplitResult sr = split_dataset(d, 0.6, 8);
  TrainResult r = train(sr.train, tiny_options(TrainMethod::normal, 15));

  CurvatureOptions opt;
  opt.noise = PerturbationSpec::gaussian_noise(0.4);
  opt.probes = 8;
  opt.repeats = 6;
  opt.seed = 41;
  opt.exact_oracle = true;
  CurvatureReport rep = curvature_report(r.checkpoint, sr.test, opt);

  REQUIRE(rep.rows.size() == sr.test.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const CurvatureRow& row = rep.rows[i];
    CHECK(row.index == i);
    CHECK(row.label == sr.test.labels[i]);
    CHECK(row.lambda >= 0.0);
    CHECK(row.correct_count <= 6);
    CHECK(row.correct_frac ==
          doctest::Approx(row.correct_count / 6.0).epsilon(1e-12));
    CHECK(row.has_exact);
    CHECK(row.exact_sum_sq >= 0.0);
  }

  REQUIRE(rep.acc_by_quantile.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(rep.acc_by_quantile[i].first ==
          doctest::Approx(0.1 * (i + 1)).epsilon(1e-12));
    CHECK(rep.acc_by_quantile[i].second >= 0.0);
    CHECK(rep.acc_by_quantile[i].second <= 1.0);
  }

  // Only non-empty buckets appear, in ascending correct-count order.
  REQUIRE(rep.groups.size() >= 1);
  CHECK(rep.groups.size() <= 7);
  std::size_t grouped = 0;
  std::size_t prev_count = 0;
  for (std::size_t k = 0; k < rep.groups.size(); ++k) {
    const auto& g = rep.groups[k];
    CHECK(g.correct_count <= 6);
    if (k > 0) CHECK(g.correct_count > prev_count);
    prev_count = g.correct_count;
    CHECK(g.size >= 1);
    grouped += g.size;
  }
  CHECK(grouped == sr.test.size());

  CHECK(rep.low90_q25 <= rep.low90_median);
  CHECK(rep.low90_median <= rep.low90_q75);

  const std::string csv = curvature_csv(rep.rows);
  CHECK(line_count(csv) == rep.rows.size() + 1);
  CHECK(csv.rfind("index,label,curvature", 0) == 0);

  CurvatureOptions bad = opt;
  bad.probes = 0;
  CHECK_THROWS_AS((void)curvature_report(r.checkpoint, sr.test, bad), Error);
  bad = opt;
  bad.repeats = 0;
  CHECK_THROWS_AS((void)curvature_report(r.checkpoint, sr.test, bad), Error);
}

TEST_CASE("constant-logit checkpoints leave the pearson undefined") {
  Dataset d = gen_blobs(2, 10, 4, 1.0, 43);
  Checkpoint ck;
  ck.model = make_mlp(std::vector<std::size_t>{4, 3}, 2, 5);
  ck.model.head_w = Tensor::zeros({2, 3});
  ck.model.head_b = Tensor::zeros({2});
  ck.centroids.previous[0] = Tensor::zeros({3});
  ck.centroids.previous[1] = Tensor::zeros({3});

  CurvatureOptions opt;
  opt.noise = PerturbationSpec::gaussian_noise(0.2);
  opt.probes = 4;
  opt.repeats = 3;
  CurvatureReport rep = curvature_report(ck, d, opt);
  for (const CurvatureRow& row : rep.rows) CHECK(row.lambda == 0.0);
  CHECK_FALSE(rep.pearson_defined);
}

TEST_CASE("transform_check at nu 1 is the identity") {
  Dataset d = gen_blobs(2, 15, 4, 1.0, 47);
  TrainResult r = train(d, tiny_options(TrainMethod::ours, 8));
  TransformCheck tc = transform_check(r.checkpoint, 1.0, d, 200, 3);
  CHECK(tc.nu == 1.0);
  CHECK(tc.agreement == 1.0);
  CHECK(tc.margin_ratio == 1.0);
  CHECK(tc.dispersion_ratio == 1.0);
  CHECK(checkpoint_to_json(tc.transformed) ==
        checkpoint_to_json(r.checkpoint));

  TransformCheck half = transform_check(r.checkpoint, 0.5, d, 200, 3);
  CHECK(half.agreement == 1.0);
  CHECK(half.margin_ratio == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(half.dispersion_ratio == doctest::Approx(0.5).epsilon(1e-9));

  CHECK_THROWS_AS((void)transform_check(r.checkpoint, 0.0, d, 10, 3), Error);
}

TEST_CASE("delta_d at or below delta_v only warns") {
  Dataset d = gen_blobs(2, 8, 3, 1.0, 53);
  TrainOptions opt = tiny_options(TrainMethod::ours, 1);
  opt.loss.delta_v = 1.0;
  opt.loss.delta_d = 0.5;
  CHECK_NOTHROW((void)train(d, opt));
}

TEST_CASE("textures train to high clean accuracy") {
  Dataset train_set = gen_textures(3, 40, 8, 8, 59);
  Dataset test_set = gen_textures(3, 20, 8, 8, 60);
  TrainOptions opt = tiny_options(TrainMethod::normal, 25);
  opt.hidden_dims = {16};
  opt.batch_size = 16;
  TrainResult r = train(train_set, opt);
  CHECK(accuracy_on(r.checkpoint, test_set) >= 0.95);
}
