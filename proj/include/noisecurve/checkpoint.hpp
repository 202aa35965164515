#pragma once

#include <cstdint>
#include <string>

#include "noisecurve/centroids.hpp"
#include "noisecurve/losses.hpp"
#include "noisecurve/model.hpp"

namespace noisecurve {

// Everything needed to resume or evaluate a trained run. Reals are
// serialized as shortest-round-trip decimal strings so saving and
// reloading reproduces the exact same bytes.
struct Checkpoint {
  int version = 1;
  std::uint64_t seed = 0;
  Model model;
  CentroidState centroids;
  LossConfig loss;
};

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace noisecurve
