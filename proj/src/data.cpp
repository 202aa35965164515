#include "noisecurve/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "noisecurve/errors.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {

namespace {

constexpr char kMagic[4] = {'R', 'N', 'L', '1'};

double widen(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = widen(t[i]);
}

void check_counts(std::size_t classes, std::size_t per_class) {
  if (classes < 2)
    fail(ErrorCode::invalid_argument, "generator needs at least 2 classes");
  if (classes > 65535)
    fail(ErrorCode::invalid_argument, "class count exceeds label width");
  if (per_class == 0)
    fail(ErrorCode::invalid_argument, "generator needs per_class >= 1");
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_f32(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

class Reader {
 public:
  Reader(const std::string& bytes) : bytes_(bytes) {}

  bool exhausted() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void raw(void* out, std::size_t n, ErrorCode short_code) {
    if (remaining() < n)
      fail(short_code, "file ends inside a field (offset " +
                           std::to_string(pos_) + ")");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::uint32_t u32(ErrorCode short_code) {
    unsigned char b[4];
    raw(b, 4, short_code);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint64_t u64(ErrorCode short_code) {
    std::uint64_t lo = u32(short_code);
    std::uint64_t hi = u32(short_code);
    return lo | (hi << 32);
  }

  std::uint16_t u16(ErrorCode short_code) {
    unsigned char b[2];
    raw(b, 2, short_code);
    return static_cast<std::uint16_t>(b[0] |
                                      (static_cast<std::uint16_t>(b[1]) << 8));
  }

  float f32(ErrorCode short_code) {
    std::uint32_t bits = u32(short_code);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Dataset gen_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                  double spread, std::uint64_t seed) {
  check_counts(classes, per_class);
  if (dim < classes)
    fail(ErrorCode::invalid_argument,
         "gen_blobs needs dim >= classes to place the simplex");
  if (!(spread > 0.0))
    fail(ErrorCode::invalid_argument, "gen_blobs needs spread > 0");

  // Means at s * e_c give every pair distance s * sqrt(2).
  double s = 4.0 * spread / std::sqrt(2.0);
  Dataset d;
  d.shape = {DataKind::vector_kind, dim, {}};
  d.class_count = classes;
  d.seed = seed;
  std::size_t index = 0;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i, ++index) {
      RngStream rng(seed, index);
      Tensor x = Tensor::zeros({dim});
      for (std::size_t k = 0; k < dim; ++k)
        x[k] = (k == c ? s : 0.0) + spread * rng.normal();
      quantize(x);
      d.samples.push_back(std::move(x));
      d.labels.push_back(static_cast<int>(c));
    }
  return d;
}

Dataset gen_rings(std::size_t classes, std::size_t per_class,
                  std::uint64_t seed) {
  check_counts(classes, per_class);
  Dataset d;
  d.shape = {DataKind::vector_kind, 2, {}};
  d.class_count = classes;
  d.seed = seed;
  std::size_t index = 0;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i, ++index) {
      RngStream rng(seed, index);
      double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double radius = static_cast<double>(c + 1) + 0.1 * rng.normal();
      Tensor x = Tensor::vector({radius * std::cos(angle),
                                 radius * std::sin(angle)});
      quantize(x);
      d.samples.push_back(std::move(x));
      d.labels.push_back(static_cast<int>(c));
    }
  return d;
}

Dataset gen_textures(std::size_t classes, std::size_t per_class,
                     std::size_t h, std::size_t w, std::uint64_t seed) {
  check_counts(classes, per_class);
  if (h < 8 || w < 8)
    fail(ErrorCode::invalid_argument, "gen_textures needs h, w >= 8");

  Dataset d;
  d.shape = {DataKind::grid_kind, 0, {h, w, 1}};
  d.class_count = classes;
  d.seed = seed;
  std::size_t index = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    double fr = static_cast<double>(c + 1);
    double fc = static_cast<double>(2 * c + 1);
    for (std::size_t i = 0; i < per_class; ++i, ++index) {
      RngStream rng(seed, index);
      Tensor x = Tensor::zeros({h * w});
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t col = 0; col < w; ++col) {
          double u = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
          double v = (static_cast<double>(col) + 0.5) / static_cast<double>(w);
          double base = 0.5 +
                        0.25 * std::sin(2.0 * std::numbers::pi * fr * u) +
                        0.25 * std::cos(2.0 * std::numbers::pi * fc * v);
          x[r * w + col] = base + 0.1 * rng.normal();
        }
      quantize(x);
      d.samples.push_back(std::move(x));
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  if (d.samples.size() != d.labels.size())
    fail(ErrorCode::invalid_argument, "dataset samples/labels mismatch");
  if (d.class_count == 0 || d.class_count > 65535)
    fail(ErrorCode::invalid_argument, "dataset class_count outside [1,65535]");
  std::size_t ssz = d.shape.sample_size();
  if (ssz == 0) fail(ErrorCode::invalid_argument, "dataset with empty shape");

  std::string buf;
  buf.reserve(32 + d.samples.size() * (4 * ssz + 2));
  buf.append(kMagic, 4);
  put_u32(buf, static_cast<std::uint32_t>(d.shape.kind));
  put_u32(buf, static_cast<std::uint32_t>(d.class_count));
  put_u32(buf, static_cast<std::uint32_t>(d.samples.size()));
  if (d.shape.kind == DataKind::vector_kind) {
    put_u32(buf, static_cast<std::uint32_t>(d.shape.dim));
  } else {
    put_u32(buf, static_cast<std::uint32_t>(d.shape.grid.h));
    put_u32(buf, static_cast<std::uint32_t>(d.shape.grid.w));
    put_u32(buf, static_cast<std::uint32_t>(d.shape.grid.ch));
  }
  put_u64(buf, d.seed);
  for (const Tensor& x : d.samples) {
    if (x.size() != ssz)
      fail(ErrorCode::invalid_argument, "sample size differs from shape");
    for (std::size_t i = 0; i < ssz; ++i)
      put_f32(buf, static_cast<float>(x[i]));
  }
  for (int y : d.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= d.class_count)
      fail(ErrorCode::invalid_argument, "label outside class range");
    put_u16(buf, static_cast<std::uint16_t>(y));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::io, "short write to '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());

  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4, ErrorCode::format_magic);
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorCode::format_magic, "bad magic in '" + path + "'");

  std::uint32_t kind = r.u32(ErrorCode::format_header);
  std::uint32_t classes = r.u32(ErrorCode::format_header);
  std::uint32_t count = r.u32(ErrorCode::format_header);
  if (kind > 1) fail(ErrorCode::format_header, "unknown dataset kind");
  if (classes == 0 || classes > 65535)
    fail(ErrorCode::format_header, "class count outside [1,65535]");

  Dataset d;
  d.class_count = classes;
  if (kind == 0) {
    std::uint32_t dim = r.u32(ErrorCode::format_header);
    if (dim == 0) fail(ErrorCode::format_header, "zero sample dim");
    d.shape = {DataKind::vector_kind, dim, {}};
  } else {
    std::uint32_t h = r.u32(ErrorCode::format_header);
    std::uint32_t w = r.u32(ErrorCode::format_header);
    std::uint32_t ch = r.u32(ErrorCode::format_header);
    if (h == 0 || w == 0 || ch == 0)
      fail(ErrorCode::format_header, "zero grid extent");
    d.shape = {DataKind::grid_kind, 0, {h, w, ch}};
  }
  d.seed = r.u64(ErrorCode::format_header);

  std::size_t ssz = d.shape.sample_size();
  if (ssz > (1u << 24) || count > (1u << 24))
    fail(ErrorCode::format_header, "implausible sample size or count");
  std::size_t expect = count * (4 * ssz + 2);
  if (r.remaining() != expect)
    fail(ErrorCode::format_truncated,
         "payload holds " + std::to_string(r.remaining()) + " bytes, header " +
             "promises " + std::to_string(expect));

  d.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor x = Tensor::zeros({ssz});
    for (std::size_t k = 0; k < ssz; ++k)
      x[k] = static_cast<double>(r.f32(ErrorCode::format_truncated));
    d.samples.push_back(std::move(x));
  }
  d.labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t y = r.u16(ErrorCode::format_truncated);
    if (y >= classes)
      fail(ErrorCode::format_header,
           "label " + std::to_string(y) + " outside class range");
    d.labels.push_back(y);
  }
  return d;
}

void export_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << "label";
  for (std::size_t k = 0; k < d.shape.sample_size(); ++k) out << ",v" << k;
  out << "\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.labels[i];
    for (std::size_t k = 0; k < d.samples[i].size(); ++k)
      out << ',' << fmt17(d.samples[i][k]);
    out << "\n";
  }
  if (!out) fail(ErrorCode::io, "short write to '" + path + "'");
}

SplitResult split_dataset(const Dataset& d, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    fail(ErrorCode::invalid_argument, "split ratio outside [0,1]");
  std::vector<std::vector<std::size_t>> per_class(d.class_count);
  for (std::size_t i = 0; i < d.size(); ++i)
    per_class[static_cast<std::size_t>(d.labels[i])].push_back(i);

  SplitResult out;
  out.train.shape = out.test.shape = d.shape;
  out.train.class_count = out.test.class_count = d.class_count;
  out.train.seed = out.test.seed = d.seed;
  for (std::size_t c = 0; c < d.class_count; ++c) {
    auto& idx = per_class[c];
    RngStream rng(seed, c);
    shuffle(idx, rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(idx.size())));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Dataset& dst = j < n_train ? out.train : out.test;
      dst.samples.push_back(d.samples[idx[j]]);
      dst.labels.push_back(d.labels[idx[j]]);
    }
  }
  return out;
}

}  // namespace noisecurve
