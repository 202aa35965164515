#include "noisecurve.h"

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "noisecurve/checkpoint.hpp"
#include "noisecurve/config.hpp"
#include "noisecurve/data.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/evaluate.hpp"
#include "noisecurve/losses.hpp"
#include "noisecurve/perturb.hpp"
#include "noisecurve/theory.hpp"
#include "noisecurve/train.hpp"
#include "noisecurve/util.hpp"
#include "noisecurve/verify.hpp"

using json = nlohmann::json;
namespace nc = noisecurve;

struct nc_config {
  nc::Config impl;
};

struct nc_dataset {
  nc::Dataset impl;
};

namespace {

thread_local std::string t_last_error;

template <typename Fn>
nc_status guard(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return NC_OK;
  } catch (const nc::Error& e) {
    t_last_error = e.what();
    return static_cast<nc_status>(static_cast<int>(e.code()));
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return NC_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr)
    nc::fail(nc::ErrorCode::invalid_argument,
             std::string(what) + " must not be null");
}

std::filesystem::path prepare_run_dir(const char* run_dir) {
  need(run_dir, "run_dir");
  std::filesystem::path dir(run_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    nc::fail(nc::ErrorCode::io,
             "cannot create run directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) nc::fail(nc::ErrorCode::io, "cannot open '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) nc::fail(nc::ErrorCode::io, "write failed on '" + path.string() + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

nc::CentroidMode mode_from_name(const std::string& s) {
  if (s == "naive") return nc::CentroidMode::naive;
  if (s == "momentum") return nc::CentroidMode::momentum;
  if (s == "partial") return nc::CentroidMode::partial;
  nc::fail(nc::ErrorCode::config, "unknown centroid mode: " + s);
}

nc::TrainOptions train_options_from(const nc::Config& cfg) {
  nc::TrainOptions opt;
  opt.method = nc::method_from_name(
      cfg.get_string("train.method", nc::method_name(opt.method)));
  opt.hidden_dims = cfg.get_size_list("train.hidden_dims", opt.hidden_dims);
  opt.epochs = cfg.get_u64("train.epochs", opt.epochs);
  opt.lr = cfg.get_double("train.lr", opt.lr);
  opt.momentum = cfg.get_double("train.momentum", opt.momentum);
  opt.weight_decay = cfg.get_double("train.weight_decay", opt.weight_decay);
  opt.batch_size = cfg.get_u64("train.batch_size", opt.batch_size);
  opt.decay_epochs = cfg.get_size_list("train.decay_epochs", opt.decay_epochs);
  opt.decay_factor = cfg.get_double("train.decay_factor", opt.decay_factor);
  opt.stability_weight =
      cfg.get_double("train.stability_weight", opt.stability_weight);
  opt.centroid_gamma = cfg.get_double("train.centroid_gamma", opt.centroid_gamma);
  opt.centroid_mode = mode_from_name(cfg.get_string("train.centroid_mode", "partial"));
  opt.seed = cfg.get_u64("train.seed", opt.seed);
  opt.loss.alpha = cfg.get_double("loss.alpha", opt.loss.alpha);
  opt.loss.beta = cfg.get_double("loss.beta", opt.loss.beta);
  opt.loss.gamma_reg = cfg.get_double("loss.gamma_reg", opt.loss.gamma_reg);
  opt.loss.lambda = cfg.get_double("loss.lambda", opt.loss.lambda);
  opt.loss.delta_v = cfg.get_double("loss.delta_v", opt.loss.delta_v);
  opt.loss.delta_d = cfg.get_double("loss.delta_d", opt.loss.delta_d);
  if (cfg.has("noise.variant")) {
    opt.has_noise = true;
    opt.noise = nc::perturb_from_config(cfg, "noise");
  }
  return opt;
}

json breakdown_json(const nc::LossBreakdown& b) {
  return json{{"softmax", b.softmax}, {"compact", b.compact},
              {"margin", b.margin},   {"reg", b.reg},
              {"noisy", b.noisy},     {"clean", b.clean},
              {"total", b.total}};
}

json geometry_json(const nc::GeometryReport& g) {
  json dispersion = json::object();
  for (const auto& [cls, v] : g.dispersion) dispersion[std::to_string(cls)] = v;
  json margin = json::object();
  for (const auto& [cls, v] : g.margin) margin[std::to_string(cls)] = v;
  return json{
      {"dispersion", std::move(dispersion)},
      {"margin", std::move(margin)},
      {"max_dispersion", g.max_dispersion},
      {"min_margin", g.min_margin},
      {"dispersion_bound",
       json{{"applicable", g.prop2.applicable},
            {"compact_value", g.prop2.compact_value},
            {"max_dispersion", g.prop2.max_dispersion},
            {"bound", g.prop2.bound},
            {"holds", g.prop2.holds}}},
      {"margin_bound",
       json{{"applicable", g.prop3.applicable},
            {"compact_value", g.prop3.compact_value},
            {"margin_value", g.prop3.margin_value},
            {"margin_part_applicable", g.prop3.margin_part_applicable},
            {"min_margin", g.prop3.min_margin},
            {"bound", g.prop3.margin_bound},
            {"margin_holds", g.prop3.margin_holds},
            {"separation_part_applicable", g.prop3.separation_part_applicable},
            {"max_intra", g.prop3.max_intra},
            {"min_inter", g.prop3.min_inter},
            {"separation_holds", g.prop3.separation_holds}}}};
}

nc::LabeledBatch as_batch(const nc::Dataset& d) {
  nc::LabeledBatch b;
  b.xs = d.samples;
  b.ys = d.labels;
  return b;
}

}  // namespace

extern "C" {

const char* nc_status_name(nc_status s) {
  switch (s) {
    case NC_OK: return "ok";
    case NC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case NC_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case NC_ERR_CONFIG: return "config";
    case NC_ERR_IO: return "io";
    case NC_ERR_FORMAT_MAGIC: return "format_magic";
    case NC_ERR_FORMAT_HEADER: return "format_header";
    case NC_ERR_FORMAT_TRUNCATED: return "format_truncated";
    case NC_ERR_DEGENERATE_BOUNDARY: return "degenerate_boundary";
    case NC_ERR_NUMERIC: return "numeric";
    case NC_ERR_VERIFY_FAILED: return "verify_failed";
    case NC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* nc_last_error(void) { return t_last_error.c_str(); }

nc_status nc_env_seed(uint64_t* seed_out, int* present_out) {
  return guard([&] {
    need(seed_out, "seed_out");
    need(present_out, "present_out");
    const auto v = nc::env_seed_override();
    *present_out = v.has_value() ? 1 : 0;
    if (v) *seed_out = *v;
  });
}

nc_status nc_config_create(nc_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new nc_config{};
  });
}

nc_status nc_config_load(const char* path, nc_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new nc_config{nc::Config::load(path)};
  });
}

nc_status nc_config_parse(const char* text, nc_config** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = new nc_config{nc::Config::parse(text)};
  });
}

nc_status nc_config_set(nc_config* cfg, const char* key, const char* value) {
  return guard([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->impl.set(key, value);
  });
}

void nc_config_free(nc_config* cfg) { delete cfg; }

nc_status nc_dataset_generate(const nc_config* cfg, nc_dataset** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    const nc::Config& c = cfg->impl;
    const std::string kind = c.get_string("data.kind");
    const std::uint64_t seed = c.get_u64("data.seed", 1);
    const std::size_t classes = c.get_u64("data.classes", 4);
    const std::size_t per_class = c.get_u64("data.per_class", 100);
    nc::Dataset d;
    if (kind == "blobs") {
      d = nc::gen_blobs(classes, per_class, c.get_u64("data.dim", 8),
                        c.get_double("data.spread", 1.0), seed);
    } else if (kind == "rings") {
      d = nc::gen_rings(classes, per_class, seed);
    } else if (kind == "textures") {
      d = nc::gen_textures(classes, per_class, c.get_u64("data.h", 8),
                           c.get_u64("data.w", 8), seed);
    } else {
      nc::fail(nc::ErrorCode::config, "unknown data kind: " + kind);
    }
    c.require_all_consumed();
    *out = new nc_dataset{std::move(d)};
  });
}

nc_status nc_dataset_load(const char* path, nc_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new nc_dataset{nc::load_dataset(path)};
  });
}

nc_status nc_dataset_save(const nc_dataset* d, const char* path) {
  return guard([&] {
    need(d, "dataset");
    need(path, "path");
    nc::save_dataset(d->impl, path);
  });
}

nc_status nc_dataset_export_csv(const nc_dataset* d, const char* path) {
  return guard([&] {
    need(d, "dataset");
    need(path, "path");
    nc::export_csv(d->impl, path);
  });
}

nc_status nc_dataset_split(const nc_dataset* d, double ratio, uint64_t seed,
                           nc_dataset** train_out, nc_dataset** test_out) {
  return guard([&] {
    need(d, "dataset");
    need(train_out, "train_out");
    need(test_out, "test_out");
    nc::SplitResult s = nc::split_dataset(d->impl, ratio, seed);
    *train_out = new nc_dataset{std::move(s.train)};
    *test_out = new nc_dataset{std::move(s.test)};
  });
}

nc_status nc_dataset_info(const nc_dataset* d, size_t* count_out,
                          size_t* sample_size_out, size_t* classes_out) {
  return guard([&] {
    need(d, "dataset");
    if (count_out) *count_out = d->impl.size();
    if (sample_size_out) *sample_size_out = d->impl.shape.sample_size();
    if (classes_out) *classes_out = d->impl.class_count;
  });
}

void nc_dataset_free(nc_dataset* d) { delete d; }

nc_status nc_train_run(const nc_dataset* train_set, const nc_config* cfg,
                       const char* run_dir) {
  return guard([&] {
    need(train_set, "train_set");
    need(cfg, "cfg");
    const auto dir = prepare_run_dir(run_dir);
    const auto t0 = std::chrono::steady_clock::now();

    const nc::TrainOptions opt = train_options_from(cfg->impl);
    cfg->impl.require_all_consumed();
    nc::TrainResult result = nc::train(train_set->impl, opt);

    nc::save_checkpoint(result.checkpoint, (dir / "checkpoint.json").string());
    write_text(dir / "metrics.csv", nc::metrics_csv(result.metrics));

    json rep;
    rep["command"] = "train";
    rep["method"] = nc::method_name(opt.method);
    rep["epochs"] = opt.epochs;
    rep["train_count"] = train_set->impl.size();
    rep["seed"] = opt.seed;
    if (result.metrics.empty()) {
      rep["final"] = nullptr;
    } else {
      const nc::EpochMetrics& last = result.metrics.back();
      rep["final"] = json{{"epoch", last.epoch},       {"total", last.total},
                          {"softmax", last.softmax},   {"compact", last.compact},
                          {"margin", last.margin},     {"reg", last.reg},
                          {"noisy", last.noisy},       {"stability", last.stability},
                          {"accuracy", last.accuracy}};
    }
    rep["wall_seconds"] = seconds_since(t0);
    write_text(dir / "report.json", rep.dump(2) + "\n");
  });
}

nc_status nc_eval_run(const char* checkpoint_path, const nc_dataset* test_set,
                      const nc_config* cfg, const char* run_dir) {
  return guard([&] {
    need(checkpoint_path, "checkpoint_path");
    need(test_set, "test_set");
    need(cfg, "cfg");
    const auto dir = prepare_run_dir(run_dir);
    const auto t0 = std::chrono::steady_clock::now();

    const nc::Config& c = cfg->impl;
    nc::EvalOptions opt;
    opt.repeats = c.get_u64("eval.repeats", opt.repeats);
    opt.seed = c.get_u64("eval.seed", opt.seed);
    const std::uint64_t n_perturb = c.get_u64("eval.perturbations", 0);
    for (std::uint64_t i = 0; i < n_perturb; ++i)
      opt.perturbations.push_back(
          nc::perturb_from_config(c, "eval.perturb." + std::to_string(i)));
    c.require_all_consumed();

    const nc::Checkpoint ck = nc::load_checkpoint(checkpoint_path);
    const std::vector<nc::EvalRecord> records =
        nc::evaluate(ck, test_set->impl, opt);
    write_text(dir / "eval.csv", nc::eval_csv(records));

    json recs = json::array();
    for (const auto& r : records)
      recs.push_back(json{{"perturbation", r.perturbation},
                          {"repeat", r.repeat},
                          {"accuracy", r.accuracy},
                          {"losses", breakdown_json(r.losses)}});

    // Mean and spread of accuracy per perturbation, over its repeats.
    json aggs = json::array();
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> by_name;
    for (const auto& r : records) {
      if (!by_name.count(r.perturbation)) order.push_back(r.perturbation);
      by_name[r.perturbation].push_back(r.accuracy);
    }
    for (const auto& name : order) {
      const auto& accs = by_name[name];
      aggs.push_back(
          json{{"perturbation", name},
               {"repeats", accs.size()},
               {"mean_accuracy", nc::mean(accs)},
               {"std_accuracy", accs.size() > 1 ? nc::sample_std(accs) : 0.0}});
    }

    json rep;
    rep["command"] = "eval";
    rep["checkpoint"] = checkpoint_path;
    rep["test_count"] = test_set->impl.size();
    rep["seed"] = opt.seed;
    rep["records"] = std::move(recs);
    rep["aggregates"] = std::move(aggs);
    if (ck.centroids.previous.empty()) {
      rep["geometry"] = nullptr;
    } else {
      rep["geometry"] = geometry_json(
          nc::geometry_report(ck.model, as_batch(test_set->impl),
                              ck.centroids.previous, ck.loss.delta_v,
                              ck.loss.delta_d));
    }
    rep["wall_seconds"] = seconds_since(t0);
    write_text(dir / "report.json", rep.dump(2) + "\n");
  });
}

nc_status nc_curvature_run(const char* checkpoint_path,
                           const nc_dataset* test_set, const nc_config* cfg,
                           const char* run_dir) {
  return guard([&] {
    need(checkpoint_path, "checkpoint_path");
    need(test_set, "test_set");
    need(cfg, "cfg");
    const auto dir = prepare_run_dir(run_dir);
    const auto t0 = std::chrono::steady_clock::now();

    const nc::Config& c = cfg->impl;
    nc::CurvatureOptions opt;
    opt.probes = c.get_u64("curvature.probes", opt.probes);
    opt.probe_step = c.get_double("curvature.probe_step", opt.probe_step);
    opt.repeats = c.get_u64("curvature.repeats", opt.repeats);
    opt.seed = c.get_u64("curvature.seed", opt.seed);
    opt.exact_oracle = c.get_bool("curvature.exact_oracle", false);
    if (c.has("curvature.noise.variant"))
      opt.noise = nc::perturb_from_config(c, "curvature.noise");
    c.require_all_consumed();

    const nc::Checkpoint ck = nc::load_checkpoint(checkpoint_path);
    const nc::CurvatureReport report =
        nc::curvature_report(ck, test_set->impl, opt);
    write_text(dir / "curvature.csv", nc::curvature_csv(report.rows));

    json quantiles = json::array();
    for (const auto& [p, acc] : report.acc_by_quantile)
      quantiles.push_back(json{{"quantile", p}, {"accuracy", acc}});
    json groups = json::array();
    for (const auto& g : report.groups)
      groups.push_back(json{{"correct_count", g.correct_count},
                            {"size", g.size},
                            {"mean_curvature", g.mean_lambda}});

    json rep;
    rep["command"] = "curvature";
    rep["checkpoint"] = checkpoint_path;
    rep["test_count"] = test_set->impl.size();
    rep["noise"] = opt.noise.name();
    rep["probes"] = opt.probes;
    rep["repeats"] = opt.repeats;
    rep["seed"] = opt.seed;
    rep["acc_by_quantile"] = std::move(quantiles);
    rep["groups"] = std::move(groups);
    if (report.pearson_defined)
      rep["group_pearson"] = report.group_pearson;
    else
      rep["group_pearson"] = nullptr;
    rep["low90"] = json{{"q25", report.low90_q25},
                        {"median", report.low90_median},
                        {"q75", report.low90_q75}};
    rep["wall_seconds"] = seconds_since(t0);
    write_text(dir / "report.json", rep.dump(2) + "\n");
  });
}

nc_status nc_transform_run(const char* checkpoint_path, const nc_dataset* data,
                           const nc_config* cfg, const char* run_dir) {
  return guard([&] {
    need(checkpoint_path, "checkpoint_path");
    need(data, "data");
    need(cfg, "cfg");
    const auto dir = prepare_run_dir(run_dir);
    const auto t0 = std::chrono::steady_clock::now();

    const nc::Config& c = cfg->impl;
    const double nu = c.get_double("transform.nu");
    const std::size_t probes = c.get_u64("transform.probes", 1000);
    const std::uint64_t seed = c.get_u64("transform.seed", 5);
    c.require_all_consumed();

    const nc::Checkpoint ck = nc::load_checkpoint(checkpoint_path);
    const nc::TransformCheck tc =
        nc::transform_check(ck, nu, data->impl, probes, seed);
    nc::save_checkpoint(tc.transformed, (dir / "checkpoint.json").string());

    json rep;
    rep["command"] = "transform";
    rep["checkpoint"] = checkpoint_path;
    rep["nu"] = tc.nu;
    rep["probes"] = probes;
    rep["seed"] = seed;
    rep["agreement"] = tc.agreement;
    rep["margin_ratio"] = tc.margin_ratio;
    rep["dispersion_ratio"] = tc.dispersion_ratio;
    rep["wall_seconds"] = seconds_since(t0);
    write_text(dir / "report.json", rep.dump(2) + "\n");
  });
}

nc_status nc_verify_run(const char* suites, uint64_t seed, int verbose,
                        const char* report_path, size_t* failures_out) {
  return guard([&] {
    need(suites, "suites");
    if (failures_out) *failures_out = 0;

    std::vector<std::string> names;
    const std::string spec(suites);
    if (spec == "all" || spec.empty()) {
      names = nc::suite_names();
    } else {
      std::size_t pos = 0;
      while (pos <= spec.size()) {
        const std::size_t comma = spec.find(',', pos);
        const std::string part =
            spec.substr(pos, comma == std::string::npos ? std::string::npos
                                                        : comma - pos);
        if (!part.empty()) names.push_back(part);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (names.empty())
        nc::fail(nc::ErrorCode::config, "no verify suites named");
    }

    std::vector<nc::SuiteReport> reports;
    std::size_t failures = 0;
    for (const auto& name : names) {
      nc::SuiteReport rep = nc::run_suite(name, seed);
      if (verbose != 0) {
        for (const auto& ch : rep.checks)
          std::printf("%s  %s :: %s  (measured %.9g, tolerance %.9g)%s%s\n",
                      ch.pass ? "PASS" : "FAIL", rep.suite.c_str(),
                      ch.name.c_str(), ch.measured, ch.tolerance,
                      ch.note.empty() ? "" : "  ",
                      ch.note.empty() ? "" : ch.note.c_str());
        std::printf("suite %s: %zu checks, %zu failures\n", rep.suite.c_str(),
                    rep.checks.size(), rep.failures());
        std::fflush(stdout);
      }
      failures += rep.failures();
      reports.push_back(std::move(rep));
    }
    if (failures_out) *failures_out = failures;
    if (report_path != nullptr)
      write_text(report_path, nc::report_json(reports));
    if (failures > 0)
      nc::fail(nc::ErrorCode::verify_failed,
               std::to_string(failures) + " verification checks failed");
  });
}

}  // extern "C"
