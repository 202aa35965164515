#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace noisecurve {

// One numerical claim with its measured value and the tolerance it was
// held to. measured/tolerance are 0 for pure yes/no claims.
struct Check {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<Check> checks;

  std::size_t failures() const;
};

// gradients       reverse-mode gradients against central differences
// propositions    centroid gradient scaling, dispersion and margin
//                 consequences of zero losses, scale reparameterization
// curvature-bounds  spectral bounds, probe estimator, moment identities
// generalization  ramp loss, deviation term, cluster membership bound
// jsd             histogram divergence and the separation threshold
// serialization   dataset and checkpoint round-trips, config hygiene
std::vector<std::string> suite_names();

SuiteReport run_suite(const std::string& name, std::uint64_t seed);
std::vector<SuiteReport> run_all_suites(std::uint64_t seed);

std::string report_json(std::span<const SuiteReport> reports);

}  // namespace noisecurve
