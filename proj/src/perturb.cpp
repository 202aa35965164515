#include "noisecurve/perturb.hpp"

#include <cmath>
#include <cstdio>

#include "noisecurve/config.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void require_grid(const PerturbationSpec& spec, const DataShape& shape,
                  const char* what) {
  if (shape.kind != DataKind::grid_kind)
    fail(ErrorCode::invalid_argument,
         std::string(what) + " perturbation needs grid data");
  (void)spec;
}

void apply_in_place(const PerturbationSpec& spec, Tensor& x,
                    const DataShape& shape, RngStream& rng);

void apply_gaussian(double sigma, Tensor& x, RngStream& rng) {
  if (sigma < 0.0)
    fail(ErrorCode::invalid_argument, "gaussian sigma must be >= 0");
  if (sigma == 0.0) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += sigma * rng.normal();
}

void apply_uniform(double amplitude, Tensor& x, RngStream& rng) {
  if (amplitude < 0.0)
    fail(ErrorCode::invalid_argument, "uniform amplitude must be >= 0");
  if (amplitude == 0.0) return;
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] += rng.uniform(-amplitude, amplitude);
}

void apply_occlusion(const PerturbationSpec& spec, Tensor& x,
                     const GridShape& g, RngStream& rng) {
  if (spec.patch_h == 0 || spec.patch_w == 0 || spec.patch_h > g.h ||
      spec.patch_w > g.w)
    fail(ErrorCode::invalid_argument, "occlusion patch exceeds grid");
  for (std::size_t p = 0; p < spec.patches; ++p) {
    std::size_t r0 = rng.below(g.h - spec.patch_h + 1);
    std::size_t c0 = rng.below(g.w - spec.patch_w + 1);
    for (std::size_t r = r0; r < r0 + spec.patch_h; ++r)
      for (std::size_t c = c0; c < c0 + spec.patch_w; ++c)
        for (std::size_t k = 0; k < g.ch; ++k)
          x[(r * g.w + c) * g.ch + k] = spec.fill;
  }
}

void apply_stripes(const PerturbationSpec& spec, Tensor& x, const GridShape& g,
                   RngStream& rng) {
  std::size_t extent = spec.vertical ? g.w : g.h;
  if (spec.thickness == 0 || spec.thickness > extent)
    fail(ErrorCode::invalid_argument, "stripe thickness exceeds grid");
  for (std::size_t s = 0; s < spec.stripes_n; ++s) {
    std::size_t p0 = rng.below(extent - spec.thickness + 1);
    for (std::size_t r = 0; r < g.h; ++r)
      for (std::size_t c = 0; c < g.w; ++c) {
        std::size_t along = spec.vertical ? c : r;
        if (along < p0 || along >= p0 + spec.thickness) continue;
        for (std::size_t k = 0; k < g.ch; ++k)
          x[(r * g.w + c) * g.ch + k] = 0.0;
      }
  }
}

// Block-average downsample then nearest-neighbour upsample. Edge blocks
// may be partial; averaging over the cells present makes a second
// application a no-op.
void apply_du(std::size_t factor, Tensor& x, const GridShape& g) {
  if (factor < 2)
    fail(ErrorCode::invalid_argument, "du_sample factor must be >= 2");
  std::size_t bh = (g.h + factor - 1) / factor;
  std::size_t bw = (g.w + factor - 1) / factor;
  for (std::size_t k = 0; k < g.ch; ++k)
    for (std::size_t br = 0; br < bh; ++br)
      for (std::size_t bc = 0; bc < bw; ++bc) {
        std::size_t r0 = br * factor, c0 = bc * factor;
        std::size_t r1 = std::min(r0 + factor, g.h);
        std::size_t c1 = std::min(c0 + factor, g.w);
        double s = 0.0;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t c = c0; c < c1; ++c)
            s += x[(r * g.w + c) * g.ch + k];
        double m = s / static_cast<double>((r1 - r0) * (c1 - c0));
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t c = c0; c < c1; ++c)
            x[(r * g.w + c) * g.ch + k] = m;
      }
}

void apply_in_place(const PerturbationSpec& spec, Tensor& x,
                    const DataShape& shape, RngStream& rng) {
  switch (spec.kind) {
    case PerturbationSpec::Kind::gaussian:
      apply_gaussian(spec.sigma, x, rng);
      break;
    case PerturbationSpec::Kind::uniform:
      apply_uniform(spec.amplitude, x, rng);
      break;
    case PerturbationSpec::Kind::occlusion:
      require_grid(spec, shape, "occlusion");
      apply_occlusion(spec, x, shape.grid, rng);
      break;
    case PerturbationSpec::Kind::stripes:
      require_grid(spec, shape, "stripes");
      apply_stripes(spec, x, shape.grid, rng);
      break;
    case PerturbationSpec::Kind::du_sample:
      require_grid(spec, shape, "du_sample");
      apply_du(spec.factor, x, shape.grid);
      break;
    case PerturbationSpec::Kind::compose:
      for (const PerturbationSpec& part : spec.parts)
        apply_in_place(part, x, shape, rng);
      break;
  }
  if (spec.clamp01) {
    if (shape.kind != DataKind::grid_kind)
      fail(ErrorCode::invalid_argument, "clamp01 applies to grid data only");
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::min(1.0, std::max(0.0, x[i]));
  }
}

}  // namespace

PerturbationSpec PerturbationSpec::gaussian_noise(double sigma) {
  PerturbationSpec s;
  s.kind = Kind::gaussian;
  s.sigma = sigma;
  return s;
}

PerturbationSpec PerturbationSpec::uniform_noise(double amplitude) {
  PerturbationSpec s;
  s.kind = Kind::uniform;
  s.amplitude = amplitude;
  return s;
}

PerturbationSpec PerturbationSpec::occlusion_patches(std::size_t n,
                                                     std::size_t ph,
                                                     std::size_t pw,
                                                     double fill) {
  PerturbationSpec s;
  s.kind = Kind::occlusion;
  s.patches = n;
  s.patch_h = ph;
  s.patch_w = pw;
  s.fill = fill;
  return s;
}

PerturbationSpec PerturbationSpec::stripe_bands(std::size_t n,
                                                std::size_t thickness,
                                                bool vertical) {
  PerturbationSpec s;
  s.kind = Kind::stripes;
  s.stripes_n = n;
  s.thickness = thickness;
  s.vertical = vertical;
  return s;
}

PerturbationSpec PerturbationSpec::down_up(std::size_t factor) {
  PerturbationSpec s;
  s.kind = Kind::du_sample;
  s.factor = factor;
  return s;
}

PerturbationSpec PerturbationSpec::compose_of(
    std::vector<PerturbationSpec> parts) {
  PerturbationSpec s;
  s.kind = Kind::compose;
  s.parts = std::move(parts);
  return s;
}

std::string PerturbationSpec::name() const {
  switch (kind) {
    case Kind::gaussian:
      return "gaussian(" + num(sigma) + ")";
    case Kind::uniform:
      return "uniform(" + num(amplitude) + ")";
    case Kind::occlusion:
      return "occlusion(" + std::to_string(patches) + "x" +
             std::to_string(patch_h) + "x" + std::to_string(patch_w) +
             ",fill=" + num(fill) + ")";
    case Kind::stripes:
      return std::string("stripes(") + std::to_string(stripes_n) + ",t=" +
             std::to_string(thickness) + (vertical ? ",v)" : ",h)");
    case Kind::du_sample:
      return "du_sample(" + std::to_string(factor) + ")";
    case Kind::compose: {
      std::string s = "compose(";
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) s += '+';
        s += parts[i].name();
      }
      return s + ")";
    }
  }
  return "?";
}

Tensor apply(const PerturbationSpec& spec, const Tensor& x,
             const DataShape& shape, RngStream& rng) {
  if (x.size() != shape.sample_size())
    fail(ErrorCode::shape_mismatch,
         "sample size " + std::to_string(x.size()) + " does not match shape");
  Tensor out = x;
  apply_in_place(spec, out, shape, rng);
  return out;
}

Dataset noised_dataset(const Dataset& d, const PerturbationSpec& spec,
                       std::uint64_t seed, std::uint64_t draw) {
  Dataset out;
  out.shape = d.shape;
  out.class_count = d.class_count;
  out.seed = d.seed;
  out.labels = d.labels;
  out.samples.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    RngStream rng(seed, i, draw);
    out.samples.push_back(apply(spec, d.samples[i], d.shape, rng));
  }
  return out;
}

PerturbationSpec perturb_from_config(const Config& cfg, const std::string& prefix) {
  using Kind = PerturbationSpec::Kind;
  const std::string variant = cfg.get_string(prefix + ".variant");
  PerturbationSpec spec;
  if (variant == "gaussian") {
    spec = PerturbationSpec::gaussian_noise(cfg.get_double(prefix + ".sigma"));
  } else if (variant == "uniform") {
    spec = PerturbationSpec::uniform_noise(cfg.get_double(prefix + ".amplitude"));
  } else if (variant == "occlusion") {
    spec = PerturbationSpec::occlusion_patches(
        static_cast<std::size_t>(cfg.get_u64(prefix + ".n_patches")),
        static_cast<std::size_t>(cfg.get_u64(prefix + ".patch_h")),
        static_cast<std::size_t>(cfg.get_u64(prefix + ".patch_w")),
        cfg.get_double(prefix + ".fill", 0.0));
  } else if (variant == "stripes") {
    const std::string orient = cfg.get_string(prefix + ".orientation", "vertical");
    if (orient != "vertical" && orient != "horizontal")
      fail(ErrorCode::config, "unknown stripe orientation: " + orient);
    spec = PerturbationSpec::stripe_bands(
        static_cast<std::size_t>(cfg.get_u64(prefix + ".n_stripes")),
        static_cast<std::size_t>(cfg.get_u64(prefix + ".thickness")),
        orient == "vertical");
  } else if (variant == "du_sample") {
    spec = PerturbationSpec::down_up(
        static_cast<std::size_t>(cfg.get_u64(prefix + ".factor")));
  } else if (variant == "compose") {
    std::vector<PerturbationSpec> parts;
    const std::uint64_t n = cfg.get_u64(prefix + ".parts");
    if (n == 0) fail(ErrorCode::config, "compose needs at least one part");
    for (std::uint64_t i = 0; i < n; ++i)
      parts.push_back(perturb_from_config(cfg, prefix + "." + std::to_string(i)));
    spec = PerturbationSpec::compose_of(std::move(parts));
  } else {
    fail(ErrorCode::config, "unknown perturbation variant: " + variant);
  }
  spec.clamp01 = cfg.get_bool(prefix + ".clamp", false);
  if (spec.kind == Kind::compose)
    for (auto& p : spec.parts) p.clamp01 = p.clamp01 || spec.clamp01;
  return spec;
}

void perturb_to_config(const PerturbationSpec& spec, Config& cfg,
                       const std::string& prefix) {
  using Kind = PerturbationSpec::Kind;
  switch (spec.kind) {
    case Kind::gaussian:
      cfg.set(prefix + ".variant", "gaussian");
      cfg.set(prefix + ".sigma", fmt17(spec.sigma));
      break;
    case Kind::uniform:
      cfg.set(prefix + ".variant", "uniform");
      cfg.set(prefix + ".amplitude", fmt17(spec.amplitude));
      break;
    case Kind::occlusion:
      cfg.set(prefix + ".variant", "occlusion");
      cfg.set(prefix + ".n_patches", std::to_string(spec.patches));
      cfg.set(prefix + ".patch_h", std::to_string(spec.patch_h));
      cfg.set(prefix + ".patch_w", std::to_string(spec.patch_w));
      cfg.set(prefix + ".fill", fmt17(spec.fill));
      break;
    case Kind::stripes:
      cfg.set(prefix + ".variant", "stripes");
      cfg.set(prefix + ".n_stripes", std::to_string(spec.stripes_n));
      cfg.set(prefix + ".thickness", std::to_string(spec.thickness));
      cfg.set(prefix + ".orientation", spec.vertical ? "vertical" : "horizontal");
      break;
    case Kind::du_sample:
      cfg.set(prefix + ".variant", "du_sample");
      cfg.set(prefix + ".factor", std::to_string(spec.factor));
      break;
    case Kind::compose:
      cfg.set(prefix + ".variant", "compose");
      cfg.set(prefix + ".parts", std::to_string(spec.parts.size()));
      for (std::size_t i = 0; i < spec.parts.size(); ++i)
        perturb_to_config(spec.parts[i], cfg, prefix + "." + std::to_string(i));
      break;
  }
  if (spec.clamp01) cfg.set(prefix + ".clamp", "true");
}

}  // namespace noisecurve
