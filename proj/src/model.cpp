#include "noisecurve/model.hpp"

#include <cmath>
#include <string>

#include "noisecurve/errors.hpp"
#include "noisecurve/rng.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {

namespace {

Tensor uniform_init(std::size_t rows, std::size_t cols, double bound,
                    RngStream& rng) {
  Tensor t = Tensor::zeros(cols == 0 ? std::vector<std::size_t>{rows}
                                     : std::vector<std::size_t>{rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

void check_input_dim(const Model& m, const Tensor& x) {
  bool ok = (x.rank() == 1 && x.size() == m.in_dim()) ||
            (x.rank() == 2 && x.rows() == m.in_dim());
  if (!ok)
    fail(ErrorCode::shape_mismatch, "model expects input dim " +
                                        std::to_string(m.in_dim()) + ", got " +
                                        x.shape_str());
}

}  // namespace

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n + head_w.size() + head_b.size();
}

Model make_mlp(std::span<const std::size_t> dims, std::size_t classes,
               std::uint64_t seed) {
  if (dims.size() < 2)
    fail(ErrorCode::invalid_argument,
         "make_mlp needs at least input and feature dims");
  if (classes < 2)
    fail(ErrorCode::invalid_argument, "make_mlp needs at least 2 classes");
  for (std::size_t d : dims)
    if (d == 0) fail(ErrorCode::invalid_argument, "make_mlp zero layer dim");

  Model m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    RngStream rw(seed, l, 0);
    RngStream rb(seed, l, 1);
    BackboneLayer layer;
    layer.w = uniform_init(dims[l + 1], dims[l], bound, rw);
    layer.b = uniform_init(dims[l + 1], 0, bound, rb);
    layer.relu_after = (l + 2 < dims.size());
    m.layers.push_back(std::move(layer));
  }
  double bound = 1.0 / std::sqrt(static_cast<double>(dims.back()));
  RngStream rw(seed, dims.size() - 1, 0);
  RngStream rb(seed, dims.size() - 1, 1);
  m.head_w = uniform_init(classes, dims.back(), bound, rw);
  m.head_b = uniform_init(classes, 0, bound, rb);
  return m;
}

Tensor features_at_layer(const Model& m, const Tensor& x, std::size_t l) {
  check_input_dim(m, x);
  if (l < 1 || l > m.layer_count())
    fail(ErrorCode::invalid_argument,
         "layer index " + std::to_string(l) + " outside [1," +
             std::to_string(m.layer_count()) + "]");
  Tensor h = x;
  for (std::size_t i = 0; i < l; ++i) {
    const BackboneLayer& layer = m.layers[i];
    Tensor out = Tensor::zeros(h.rank() == 1
                                   ? std::vector<std::size_t>{layer.w.rows()}
                                   : std::vector<std::size_t>{layer.w.rows(),
                                                              h.cols()});
    std::size_t batch = h.rank() == 1 ? 1 : h.cols();
    for (std::size_t r = 0; r < layer.w.rows(); ++r)
      for (std::size_t c = 0; c < batch; ++c) {
        double s = layer.b[r];
        for (std::size_t k = 0; k < layer.w.cols(); ++k)
          s += layer.w.at(r, k) * (h.rank() == 1 ? h[k] : h.at(k, c));
        double v = (layer.relu_after && s < 0.0) ? 0.0 : s;
        if (out.rank() == 1)
          out[r] = v;
        else
          out.at(r, c) = v;
      }
    h = std::move(out);
  }
  return h;
}

Tensor features(const Model& m, const Tensor& x) {
  return features_at_layer(m, x, m.layer_count());
}

Tensor logits_from_features(const Model& m, const Tensor& q) {
  if (q.rank() != 1 || q.size() != m.feature_dim())
    fail(ErrorCode::shape_mismatch,
         "logits expect feature dim " + std::to_string(m.feature_dim()) +
             ", got " + q.shape_str());
  Tensor z = Tensor::zeros({m.class_count()});
  for (std::size_t r = 0; r < m.class_count(); ++r) {
    double s = m.head_b[r];
    for (std::size_t k = 0; k < m.feature_dim(); ++k)
      s += m.head_w.at(r, k) * q[k];
    z[r] = s;
  }
  return z;
}

Tensor logits(const Model& m, const Tensor& x) {
  return logits_from_features(m, features(m, x));
}

Tensor softmax(const Tensor& z) {
  if (z.rank() != 1 || z.size() == 0)
    fail(ErrorCode::shape_mismatch, "softmax on " + z.shape_str());
  double m = z[0];
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > m) m = z[i];
  Tensor p = Tensor::zeros(z.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    s += p[i];
  }
  for (std::size_t i = 0; i < z.size(); ++i) p[i] /= s;
  return p;
}

std::size_t predict(const Model& m, const Tensor& x) {
  Tensor z = logits(m, x);
  return argmax(z.data());
}

double hyperplane_distance(const Tensor& head_w, const Tensor& head_b,
                           const Tensor& q, std::size_t c, std::size_t i) {
  std::size_t classes = head_w.rows();
  if (c == i)
    fail(ErrorCode::invalid_argument, "hyperplane_distance with c == i");
  if (c >= classes || i >= classes)
    fail(ErrorCode::invalid_argument, "hyperplane_distance class out of range");
  if (q.rank() != 1 || q.size() != head_w.cols())
    fail(ErrorCode::shape_mismatch,
         "hyperplane_distance point " + q.shape_str() + " vs head " +
             head_w.shape_str());

  double num = head_b[c] - head_b[i];
  double nsq = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    double d = head_w.at(c, k) - head_w.at(i, k);
    num += d * q[k];
    nsq += d * d;
  }
  if (nsq == 0.0) {
    if (head_b[c] == head_b[i])
      fail(ErrorCode::degenerate_boundary,
           "classes " + std::to_string(c) + " and " + std::to_string(i) +
               " have identical logits; boundary is degenerate");
    fail(ErrorCode::degenerate_boundary,
         "classes " + std::to_string(c) + " and " + std::to_string(i) +
             " have parallel logits; boundary is empty");
  }
  return std::fabs(num) / std::sqrt(nsq);
}

double hyperplane_distance(const Model& m, const Tensor& q, std::size_t c,
                           std::size_t i) {
  return hyperplane_distance(m.head_w, m.head_b, q, c, i);
}

Model scale_transform(const Model& m, double nu) {
  if (!(nu > 0.0))
    fail(ErrorCode::invalid_argument, "scale_transform needs nu > 0");
  if (m.layers.empty())
    fail(ErrorCode::invalid_argument, "scale_transform on empty backbone");
  Model out = m;
  BackboneLayer& last = out.layers.back();
  last.w = nu * last.w;
  last.b = nu * last.b;
  out.head_b = nu * out.head_b;
  return out;
}

std::vector<double> flatten_params(const Model& m) {
  std::vector<double> out;
  out.reserve(m.param_count());
  for (const auto& l : m.layers) {
    out.insert(out.end(), l.w.data().begin(), l.w.data().end());
    out.insert(out.end(), l.b.data().begin(), l.b.data().end());
  }
  out.insert(out.end(), m.head_w.data().begin(), m.head_w.data().end());
  out.insert(out.end(), m.head_b.data().begin(), m.head_b.data().end());
  return out;
}

double head_row_norm_max(const Model& m) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.head_w.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.head_w.cols(); ++k)
      s += m.head_w.at(r, k) * m.head_w.at(r, k);
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

ModelVars declare_trainable(Tape& t, const Model& m) {
  ModelVars mv;
  for (const auto& l : m.layers)
    mv.layers.push_back({t.input(l.w), t.input(l.b), l.relu_after});
  mv.head_w = t.input(m.head_w);
  mv.head_b = t.input(m.head_b);
  return mv;
}

ModelVars declare_frozen(Tape& t, const Model& m) {
  ModelVars mv;
  for (const auto& l : m.layers)
    mv.layers.push_back({t.constant(l.w), t.constant(l.b), l.relu_after});
  mv.head_w = t.constant(m.head_w);
  mv.head_b = t.constant(m.head_b);
  return mv;
}

Var backbone_out(Tape& t, const ModelVars& mv, Var x) {
  Var h = x;
  for (const auto& l : mv.layers) {
    h = t.affine(l.w, h, l.b);
    if (l.relu_after) h = t.relu(h);
  }
  return h;
}

Var logits_out(Tape& t, const ModelVars& mv, Var q) {
  return t.affine(mv.head_w, q, mv.head_b);
}

}  // namespace noisecurve
