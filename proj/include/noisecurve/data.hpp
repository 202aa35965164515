#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisecurve/tensor.hpp"

namespace noisecurve {

enum class DataKind : std::uint32_t { vector_kind = 0, grid_kind = 1 };

struct GridShape {
  std::size_t h = 0, w = 0, ch = 0;
  std::size_t size() const { return h * w * ch; }
};

struct DataShape {
  DataKind kind = DataKind::vector_kind;
  std::size_t dim = 0;  // vector kind
  GridShape grid;       // grid kind
  std::size_t sample_size() const {
    return kind == DataKind::vector_kind ? dim : grid.size();
  }
};

// Samples are flat vectors; grid samples are row-major (h, w, ch).
// Values are produced and stored at 32-bit precision (widened to 64 bits
// in memory) so that save/load round-trips are exact.
struct Dataset {
  DataShape shape;
  std::vector<Tensor> samples;
  std::vector<int> labels;
  std::size_t class_count = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
};

// Gaussian blobs around scaled basis vectors; pairwise mean distance is
// 4 * spread. Needs dim >= classes.
Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                  double spread, std::uint64_t seed);

// Concentric rings in the plane, radius c+1 for class c, radial jitter
// with standard deviation 0.1.
Dataset gen_rings(std::size_t classes, std::size_t per_class,
                  std::uint64_t seed);

// Single-channel sinusoidal textures, one frequency pair per class,
// pixel jitter 0.1. Needs h, w >= 8.
Dataset gen_textures(std::size_t classes, std::size_t per_class,
                     std::size_t h, std::size_t w, std::uint64_t seed);

// Little-endian container: magic "RNL1", u32 kind, u32 class_count,
// u32 sample_count, extents (u32 dim | u32 h,w,ch), u64 seed, f32
// payload, u16 labels. Distinct error codes for a bad magic, a malformed
// header, and a payload length mismatch.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// label,v0,...,vN per row, 17 significant digits.
void export_csv(const Dataset& d, const std::string& path);

struct SplitResult {
  Dataset train;
  Dataset test;
};

// Stratified split; per-class train share is round(ratio * n_c).
SplitResult split_dataset(const Dataset& d, double ratio, std::uint64_t seed);

}  // namespace noisecurve
