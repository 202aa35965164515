#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "noisecurve/centroids.hpp"
#include "noisecurve/checkpoint.hpp"
#include "noisecurve/data.hpp"
#include "noisecurve/losses.hpp"
#include "noisecurve/perturb.hpp"

namespace noisecurve {

// normal          cross-entropy on clean inputs
// noisy_only      cross-entropy on perturbed inputs
// clean_plus_noisy  mean of the two cross-entropies
// stability       clean cross-entropy + w * mean feature displacement
// ours            clean cross-entropy + cluster losses + noisy alignment
enum class TrainMethod : std::uint8_t {
  normal,
  noisy_only,
  clean_plus_noisy,
  stability,
  ours,
};

TrainMethod method_from_name(const std::string& name);
const char* method_name(TrainMethod m);

struct TrainOptions {
  TrainMethod method = TrainMethod::ours;
  std::vector<std::size_t> hidden_dims = {32, 16};  // layer widths after the input
  std::size_t epochs = 200;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 64;
  std::vector<std::size_t> decay_epochs = {60, 120, 160};
  double decay_factor = 5.0;
  double stability_weight = 1.0;
  bool has_noise = false;  // every method except normal requires it
  PerturbationSpec noise;
  LossConfig loss;
  double centroid_gamma = 0.9;
  CentroidMode centroid_mode = CentroidMode::partial;
  std::uint64_t seed = 1;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // zero based
  double lr = 0.0;
  double total = 0.0;
  double softmax = 0.0;
  double compact = 0.0;
  double margin = 0.0;
  double reg = 0.0;
  double noisy = 0.0;
  double stability = 0.0;
  double accuracy = 0.0;  // on the inputs that drove the cross-entropy
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

// Deterministic for a fixed (dataset, options) pair: batch order, model
// init, and per-epoch noise draws all derive from opt.seed.
TrainResult train(const Dataset& data, const TrainOptions& opt);

// Header plus one row per epoch, reals at 17 significant digits.
std::string metrics_csv(std::span<const EpochMetrics> rows);

}  // namespace noisecurve
