// Command line front end. Talks to the core exclusively through the C
// API in noisecurve.h; all heavy lifting happens behind that boundary.
//
// Exit codes: 0 success, 1 verification checks failed, 2 anything that
// keeps a command from running (usage, config, io, bad data).

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "noisecurve.h"

namespace {

struct ConfigHandle {
  nc_config* p = nullptr;
  ~ConfigHandle() { nc_config_free(p); }
  ConfigHandle() = default;
  ConfigHandle(const ConfigHandle&) = delete;
  ConfigHandle& operator=(const ConfigHandle&) = delete;
};

struct DatasetHandle {
  nc_dataset* p = nullptr;
  ~DatasetHandle() { nc_dataset_free(p); }
  DatasetHandle() = default;
  DatasetHandle(const DatasetHandle&) = delete;
  DatasetHandle& operator=(const DatasetHandle&) = delete;
};

int exit_code(nc_status rc) { return rc == NC_ERR_VERIFY_FAILED ? 1 : 2; }

int report_failure(nc_status rc) {
  std::fprintf(stderr, "error: %s (%s)\n", nc_last_error(), nc_status_name(rc));
  return exit_code(rc);
}

// Config from --config when given, empty otherwise (defaults apply).
nc_status open_config(const std::string& path, ConfigHandle& out) {
  return path.empty() ? nc_config_create(&out.p)
                      : nc_config_load(path.c_str(), &out.p);
}

// Seed precedence: NOISECURVE_SEED beats --seed beats the config file.
struct SeedPolicy {
  bool env_present = false;
  std::uint64_t env_seed = 0;

  nc_status apply(nc_config* cfg, const char* key, bool flag_given,
                  std::uint64_t flag_seed) const {
    if (env_present)
      return nc_config_set(cfg, key, std::to_string(env_seed).c_str());
    if (flag_given)
      return nc_config_set(cfg, key, std::to_string(flag_seed).c_str());
    return NC_OK;
  }

  std::uint64_t resolve(std::uint64_t flag_seed) const {
    return env_present ? env_seed : flag_seed;
  }
};

void print_dataset(const char* tag, const nc_dataset* d) {
  size_t count = 0, dim = 0, classes = 0;
  if (nc_dataset_info(d, &count, &dim, &classes) == NC_OK)
    std::printf("%s: %zu samples, %zu values each, %zu classes\n", tag, count,
                dim, classes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisecurve: cluster-shaped training and its verification lab"};
  app.require_subcommand(1);

  SeedPolicy seeds;
  {
    int present = 0;
    const nc_status rc = nc_env_seed(&seeds.env_seed, &present);
    if (rc != NC_OK) return report_failure(rc);
    seeds.env_present = present != 0;
  }

  std::string config_path, data_path, checkpoint_path, out_dir;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "seed override")
        ->each([&](const std::string&) { seed_given = true; });
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a dataset file");
  std::string gen_out, gen_train_out, gen_test_out, gen_csv;
  double split_ratio = 0.0;
  std::uint64_t split_seed = 9;
  gen->add_option("--config", config_path, "data.* key=value file")->required();
  gen->add_option("--out", gen_out, "output dataset path");
  gen->add_option("--split", split_ratio, "train share in (0,1)");
  gen->add_option("--split-seed", split_seed, "seed for the split");
  gen->add_option("--train-out", gen_train_out, "train split path");
  gen->add_option("--test-out", gen_test_out, "test split path");
  gen->add_option("--csv", gen_csv, "also export the full set as CSV");
  add_seed(gen);

  // train
  auto* train = app.add_subcommand("train", "train a classifier");
  train->add_option("--config", config_path, "train.*/loss.*/noise.* file");
  train->add_option("--data", data_path, "training dataset")->required();
  train->add_option("--out", out_dir, "run directory")->required();
  add_seed(train);

  // eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a test set");
  eval->add_option("--config", config_path, "eval.* key=value file");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint.json")->required();
  eval->add_option("--data", data_path, "test dataset")->required();
  eval->add_option("--out", out_dir, "run directory")->required();
  add_seed(eval);

  // curvature
  auto* curv = app.add_subcommand("curvature", "per-sample curvature sweep");
  curv->add_option("--config", config_path, "curvature.* key=value file");
  curv->add_option("--checkpoint", checkpoint_path, "checkpoint.json")->required();
  curv->add_option("--data", data_path, "test dataset")->required();
  curv->add_option("--out", out_dir, "run directory")->required();
  add_seed(curv);

  // transform
  auto* trans = app.add_subcommand("transform", "rescale a checkpoint");
  double nu = 1.0;
  std::uint64_t probes = 1000;
  trans->add_option("--checkpoint", checkpoint_path, "checkpoint.json")->required();
  trans->add_option("--data", data_path, "dataset for the invariance report")->required();
  trans->add_option("--out", out_dir, "run directory")->required();
  trans->add_option("--nu", nu, "positive scale factor")->required();
  trans->add_option("--probes", probes, "prediction agreement probes");
  add_seed(trans);

  // verify
  auto* verify = app.add_subcommand("verify", "run numerical verification suites");
  std::string suites = "all";
  std::string report_path;
  std::uint64_t verify_seed = 1;
  bool quiet = false;
  verify->add_option("--suites", suites, "comma list of suites, or 'all'");
  verify->add_option("--report", report_path, "write the JSON report here");
  verify->add_option("--seed", verify_seed, "verification seed");
  verify->add_flag("--quiet", quiet, "suppress per-check lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  nc_status rc = NC_OK;

  if (*gen) {
    ConfigHandle cfg;
    rc = open_config(config_path, cfg);
    if (rc == NC_OK) rc = seeds.apply(cfg.p, "data.seed", seed_given, seed_flag);
    DatasetHandle data;
    if (rc == NC_OK) rc = nc_dataset_generate(cfg.p, &data.p);
    if (rc != NC_OK) return report_failure(rc);
    print_dataset("dataset", data.p);

    if (split_ratio > 0.0) {
      if (gen_train_out.empty() || gen_test_out.empty()) {
        std::fprintf(stderr, "error: --split needs --train-out and --test-out\n");
        return 2;
      }
      DatasetHandle train_set, test_set;
      rc = nc_dataset_split(data.p, split_ratio, split_seed, &train_set.p,
                            &test_set.p);
      if (rc == NC_OK) rc = nc_dataset_save(train_set.p, gen_train_out.c_str());
      if (rc == NC_OK) rc = nc_dataset_save(test_set.p, gen_test_out.c_str());
      if (rc != NC_OK) return report_failure(rc);
      print_dataset("train", train_set.p);
      print_dataset("test", test_set.p);
      std::printf("wrote %s and %s\n", gen_train_out.c_str(), gen_test_out.c_str());
    } else if (!gen_out.empty()) {
      rc = nc_dataset_save(data.p, gen_out.c_str());
      if (rc != NC_OK) return report_failure(rc);
      std::printf("wrote %s\n", gen_out.c_str());
    } else {
      std::fprintf(stderr, "error: need --out, or --split with --train-out/--test-out\n");
      return 2;
    }
    if (!gen_csv.empty()) {
      rc = nc_dataset_export_csv(data.p, gen_csv.c_str());
      if (rc != NC_OK) return report_failure(rc);
      std::printf("wrote %s\n", gen_csv.c_str());
    }
    return 0;
  }

  if (*train) {
    ConfigHandle cfg;
    rc = open_config(config_path, cfg);
    if (rc == NC_OK) rc = seeds.apply(cfg.p, "train.seed", seed_given, seed_flag);
    DatasetHandle data;
    if (rc == NC_OK) rc = nc_dataset_load(data_path.c_str(), &data.p);
    if (rc == NC_OK) rc = nc_train_run(data.p, cfg.p, out_dir.c_str());
    if (rc != NC_OK) return report_failure(rc);
    std::printf("train: checkpoint.json, metrics.csv, report.json in %s\n",
                out_dir.c_str());
    return 0;
  }

  if (*eval) {
    ConfigHandle cfg;
    rc = open_config(config_path, cfg);
    if (rc == NC_OK) rc = seeds.apply(cfg.p, "eval.seed", seed_given, seed_flag);
    DatasetHandle data;
    if (rc == NC_OK) rc = nc_dataset_load(data_path.c_str(), &data.p);
    if (rc == NC_OK)
      rc = nc_eval_run(checkpoint_path.c_str(), data.p, cfg.p, out_dir.c_str());
    if (rc != NC_OK) return report_failure(rc);
    std::printf("eval: eval.csv, report.json in %s\n", out_dir.c_str());
    return 0;
  }

  if (*curv) {
    ConfigHandle cfg;
    rc = open_config(config_path, cfg);
    if (rc == NC_OK)
      rc = seeds.apply(cfg.p, "curvature.seed", seed_given, seed_flag);
    DatasetHandle data;
    if (rc == NC_OK) rc = nc_dataset_load(data_path.c_str(), &data.p);
    if (rc == NC_OK)
      rc = nc_curvature_run(checkpoint_path.c_str(), data.p, cfg.p,
                            out_dir.c_str());
    if (rc != NC_OK) return report_failure(rc);
    std::printf("curvature: curvature.csv, report.json in %s\n", out_dir.c_str());
    return 0;
  }

  if (*trans) {
    ConfigHandle cfg;
    rc = nc_config_create(&cfg.p);
    char nu_text[64];
    std::snprintf(nu_text, sizeof nu_text, "%.17g", nu);
    if (rc == NC_OK) rc = nc_config_set(cfg.p, "transform.nu", nu_text);
    if (rc == NC_OK)
      rc = nc_config_set(cfg.p, "transform.probes",
                         std::to_string(probes).c_str());
    if (rc == NC_OK)
      rc = seeds.apply(cfg.p, "transform.seed", seed_given, seed_flag);
    DatasetHandle data;
    if (rc == NC_OK) rc = nc_dataset_load(data_path.c_str(), &data.p);
    if (rc == NC_OK)
      rc = nc_transform_run(checkpoint_path.c_str(), data.p, cfg.p,
                            out_dir.c_str());
    if (rc != NC_OK) return report_failure(rc);
    std::printf("transform: checkpoint.json, report.json in %s\n", out_dir.c_str());
    return 0;
  }

  if (*verify) {
    size_t failures = 0;
    rc = nc_verify_run(suites.c_str(), seeds.resolve(verify_seed),
                       quiet ? 0 : 1,
                       report_path.empty() ? nullptr : report_path.c_str(),
                       &failures);
    if (rc == NC_OK) {
      std::printf("verify: all checks passed\n");
      return 0;
    }
    if (rc == NC_ERR_VERIFY_FAILED)
      std::fprintf(stderr, "verify: %zu checks failed\n", failures);
    return report_failure(rc);
  }

  return 2;
}
