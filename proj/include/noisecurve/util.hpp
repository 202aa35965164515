#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace noisecurve {

// Shortest decimal form that reparses to the identical double: 17
// significant digits. Used everywhere a real is serialized so that
// save/load/save round-trips are byte-stable.
std::string fmt17(double v);

// strtod with full-string validation. Rejects trailing garbage.
double parse_double(const std::string& s);

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);  // n-1 denominator

// Linear-interpolation quantile on the sorted copy of xs, p in [0,1]
// (the common "type 7" rule: h = (n-1)p, interpolate neighbours).
double quantile(std::span<const double> xs, double p);

// Pearson correlation; rejects length mismatch, < 2 points, or a
// degenerate (constant) coordinate.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Lowest index attaining the maximum. Rejects empty input.
std::size_t argmax(std::span<const double> xs);

}  // namespace noisecurve
