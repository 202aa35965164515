#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisecurve/data.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/tensor.hpp"

namespace noisecurve {

// One perturbation recipe. gaussian/uniform act on any sample; the
// structured variants (occlusion, stripes, down-up sampling) need grid
// data. clamp01 optionally clips grid values back into [0,1] after the
// effect.
struct PerturbationSpec {
  enum class Kind : std::uint8_t {
    gaussian,
    uniform,
    occlusion,
    stripes,
    du_sample,
    compose,
  };

  Kind kind = Kind::gaussian;
  double sigma = 0.0;       // gaussian, >= 0 (0 is the identity)
  double amplitude = 0.0;   // uniform, >= 0
  std::size_t patches = 0;  // occlusion
  std::size_t patch_h = 0;
  std::size_t patch_w = 0;
  double fill = 0.0;
  std::size_t stripes_n = 0;  // stripes, full-height bands, fill 0
  std::size_t thickness = 0;
  bool vertical = true;
  std::size_t factor = 0;  // du_sample, block size >= 2
  std::vector<PerturbationSpec> parts;  // compose, applied in order
  bool clamp01 = false;

  static PerturbationSpec gaussian_noise(double sigma);
  static PerturbationSpec uniform_noise(double amplitude);
  static PerturbationSpec occlusion_patches(std::size_t n, std::size_t ph,
                                            std::size_t pw, double fill = 0.0);
  static PerturbationSpec stripe_bands(std::size_t n, std::size_t thickness,
                                       bool vertical = true);
  static PerturbationSpec down_up(std::size_t factor);
  static PerturbationSpec compose_of(std::vector<PerturbationSpec> parts);

  // Short display tag used for metrics keys, e.g. "gaussian(0.06)".
  std::string name() const;
};

// All randomness comes from the caller's stream; draw order per variant
// is fixed, so a given (spec, sample, stream) triple is reproducible.
Tensor apply(const PerturbationSpec& spec, const Tensor& x,
             const DataShape& shape, RngStream& rng);

// Applies spec to every sample, one stream per sample keyed by
// (seed, sample_index, draw). Labels and shape carry over.
Dataset noised_dataset(const Dataset& d, const PerturbationSpec& spec,
                       std::uint64_t seed, std::uint64_t draw = 0);

class Config;

// Flat-config round trip under a key prefix: "<prefix>.variant" names
// the kind, the remaining keys carry its parameters. compose stores its
// part count in "<prefix>.parts" and each part under "<prefix>.<i>".
PerturbationSpec perturb_from_config(const Config& cfg, const std::string& prefix);
void perturb_to_config(const PerturbationSpec& spec, Config& cfg,
                       const std::string& prefix);

}  // namespace noisecurve
