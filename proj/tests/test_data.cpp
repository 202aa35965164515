#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "noisecurve/data.hpp"
#include "noisecurve/errors.hpp"

using namespace noisecurve;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "noisecurve-tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode load_error(const fs::path& p) {
  try {
    (void)load_dataset(p.string());
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

bool f32_clean(const Dataset& d) {
  for (const Tensor& s : d.samples)
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<double>(static_cast<float>(s[i])) != s[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("gen_blobs shape, labels and cluster placement") {
  Dataset d = gen_blobs(3, 20, 5, 1.0, 42);
  CHECK(d.size() == 60);
  CHECK(d.class_count == 3);
  CHECK(d.seed == 42);
  CHECK(d.shape.kind == DataKind::vector_kind);
  CHECK(d.shape.dim == 5);

  std::map<int, int> counts;
  for (int y : d.labels) ++counts[y];
  for (int c = 0; c < 3; ++c) CHECK(counts[c] == 20);

  // Sample i of class c clusters around s * e_c with s = 4 / sqrt(2);
  // jitter is sigma 1 per coordinate, so 6 sigma covers everything.
  const double s = 4.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int c = d.labels[i];
    for (std::size_t k = 0; k < 5; ++k) {
      const double center = (static_cast<int>(k) == c) ? s : 0.0;
      CHECK(std::abs(d.samples[i][k] - center) < 6.0);
    }
  }

  CHECK(f32_clean(d));
  // Determinism plus seed sensitivity.
  Dataset d2 = gen_blobs(3, 20, 5, 1.0, 42);
  CHECK(d2.samples[7] == d.samples[7]);
  Dataset d3 = gen_blobs(3, 20, 5, 1.0, 43);
  CHECK(d3.samples[7] != d.samples[7]);

  CHECK_THROWS_AS((void)gen_blobs(6, 10, 5, 1.0, 1), Error);  // dim < classes
  CHECK_THROWS_AS((void)gen_blobs(3, 10, 5, 0.0, 1), Error);
  CHECK_THROWS_AS((void)gen_blobs(3, 0, 5, 1.0, 1), Error);
}

TEST_CASE("gen_rings radii and plane shape") {
  Dataset d = gen_rings(3, 50, 7);
  CHECK(d.shape.dim == 2);
  CHECK(d.size() == 150);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = std::hypot(d.samples[i][0], d.samples[i][1]);
    const double target = d.labels[i] + 1.0;
    CHECK(std::abs(r - target) < 0.8);  // jitter sigma 0.1
  }
  CHECK(f32_clean(d));
}

TEST_CASE("gen_textures grid shape and value range") {
  Dataset d = gen_textures(2, 5, 8, 10, 3);
  CHECK(d.shape.kind == DataKind::grid_kind);
  CHECK(d.shape.grid.h == 8);
  CHECK(d.shape.grid.w == 10);
  CHECK(d.shape.grid.ch == 1);
  CHECK(d.size() == 10);
  for (const Tensor& s : d.samples) {
    CHECK(s.size() == 80);
    for (std::size_t i = 0; i < s.size(); ++i) {
      // 0.5 +- 0.5 pattern plus 0.1 sigma jitter.
      CHECK(s[i] > -0.7);
      CHECK(s[i] < 1.7);
    }
  }
  CHECK(f32_clean(d));
  CHECK_THROWS_AS((void)gen_textures(2, 5, 7, 8, 3), Error);
  CHECK_THROWS_AS((void)gen_textures(2, 5, 8, 7, 3), Error);
}

TEST_CASE("split is stratified with rounded class shares") {
  Dataset d = gen_blobs(3, 21, 4, 1.0, 5);
  SplitResult sr = split_dataset(d, 0.8, 99);
  // round(0.8 * 21) = 17 per class.
  std::map<int, int> train_counts, test_counts;
  for (int y : sr.train.labels) ++train_counts[y];
  for (int y : sr.test.labels) ++test_counts[y];
  for (int c = 0; c < 3; ++c) {
    CHECK(train_counts[c] == 17);
    CHECK(test_counts[c] == 4);
  }
  CHECK(sr.train.size() + sr.test.size() == d.size());
  CHECK(sr.train.class_count == 3);
  CHECK(sr.test.shape.dim == 4);

  // Same seed, same assignment; the split is a permutation of the data.
  SplitResult sr2 = split_dataset(d, 0.8, 99);
  CHECK(sr2.train.samples == sr.train.samples);
  CHECK(sr2.test.labels == sr.test.labels);

  CHECK_THROWS_AS((void)split_dataset(d, -0.1, 1), Error);
  CHECK_THROWS_AS((void)split_dataset(d, 1.5, 1), Error);
}

TEST_CASE("dataset round-trips through the binary container") {
  for (int which = 0; which < 3; ++which) {
    Dataset d = which == 0   ? gen_blobs(3, 7, 4, 1.2, 11)
                : which == 1 ? gen_rings(2, 9, 12)
                             : gen_textures(2, 3, 8, 8, 13);
    fs::path p = temp_file("roundtrip-" + std::to_string(which) + ".bin");
    save_dataset(d, p.string());
    Dataset back = load_dataset(p.string());
    CHECK(back.shape.kind == d.shape.kind);
    CHECK(back.shape.sample_size() == d.shape.sample_size());
    CHECK(back.class_count == d.class_count);
    CHECK(back.seed == d.seed);
    CHECK(back.labels == d.labels);
    CHECK(back.samples == d.samples);

    // Saving the loaded copy reproduces the same bytes.
    fs::path q = temp_file("resave-" + std::to_string(which) + ".bin");
    save_dataset(back, q.string());
    CHECK(slurp(p) == slurp(q));
  }
}

TEST_CASE("malformed containers give three distinct errors") {
  Dataset d = gen_blobs(2, 5, 3, 1.0, 21);
  fs::path p = temp_file("well-formed.bin");
  save_dataset(d, p.string());
  const std::string good = slurp(p);

  fs::path bad = temp_file("bad.bin");

  std::string magic = good;
  magic[0] = 'X';
  spit(bad, magic);
  CHECK(load_error(bad) == ErrorCode::format_magic);

  std::string header = good;
  header[4] = 9;  // unknown shape kind
  spit(bad, header);
  CHECK(load_error(bad) == ErrorCode::format_header);

  spit(bad, good.substr(0, good.size() - 5));
  CHECK(load_error(bad) == ErrorCode::format_truncated);

  CHECK(load_error(temp_file("does-not-exist.bin")) == ErrorCode::io);
}

TEST_CASE("csv export shape") {
  Dataset d = gen_blobs(2, 2, 3, 1.0, 31);
  fs::path p = temp_file("export.csv");
  export_csv(d, p.string());
  const std::string text = slurp(p);
  std::size_t lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == d.size() + 1);  // header row plus one row per sample
  const std::string header = text.substr(0, text.find('\n'));
  CHECK(header == "label,v0,v1,v2");
  // Each data row is label plus dim values.
  const std::string first = text.substr(header.size() + 1,
                                        text.find('\n', header.size() + 1) - header.size() - 1);
  std::size_t commas = 0;
  for (char ch : first)
    if (ch == ',') ++commas;
  CHECK(commas == 3);
  CHECK(first.substr(0, 2) == std::to_string(d.labels[0]) + ",");
}
