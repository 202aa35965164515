#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "noisecurve/tape.hpp"
#include "noisecurve/tensor.hpp"

namespace noisecurve {

// One affine backbone layer, optionally followed by relu.
struct BackboneLayer {
  Tensor w;  // (out, in)
  Tensor b;  // (out)
  bool relu_after = true;
};

// MLP backbone followed by a linear softmax head. The backbone output is
// the feature vector all cluster geometry is measured in.
struct Model {
  std::vector<BackboneLayer> layers;
  Tensor head_w;  // (classes, feature_dim)
  Tensor head_b;  // (classes)

  std::size_t in_dim() const { return layers.front().w.cols(); }
  std::size_t feature_dim() const { return layers.back().w.rows(); }
  std::size_t class_count() const { return head_b.size(); }
  std::size_t layer_count() const { return layers.size(); }
  std::size_t param_count() const;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization, one stream
// per tensor so layouts are reproducible. dims = {in, h1, ..., feature}.
// relu follows every layer except the last; the head stays linear.
Model make_mlp(std::span<const std::size_t> dims, std::size_t classes,
               std::uint64_t seed);

Tensor features(const Model& m, const Tensor& x);
// Activation after layer l, l in [1, layer_count()].
Tensor features_at_layer(const Model& m, const Tensor& x, std::size_t l);
Tensor logits_from_features(const Model& m, const Tensor& q);
Tensor logits(const Model& m, const Tensor& x);

// Stabilized softmax probabilities of a logit vector.
Tensor softmax(const Tensor& z);

// Lowest index among maximal logits.
std::size_t predict(const Model& m, const Tensor& x);

// Euclidean distance from point q to the decision boundary between
// classes c and i. Rejects c == i, out-of-range classes, and the two
// degenerate row configurations (identical rows with equal or unequal
// biases).
double hyperplane_distance(const Tensor& head_w, const Tensor& head_b,
                           const Tensor& q, std::size_t c, std::size_t i);
double hyperplane_distance(const Model& m, const Tensor& q, std::size_t c,
                           std::size_t i);

// Multiplies the last backbone layer and the head bias by nu > 0.
// Predictions are invariant; feature-space distances scale by nu.
Model scale_transform(const Model& m, double nu);

// Parameters flattened in a fixed order (layer w, layer b, ..., head w,
// head b), used for optimizer state and parameter-space geometry.
std::vector<double> flatten_params(const Model& m);

double head_row_norm_max(const Model& m);  // largest Euclidean row norm

// Tape integration. Trainable declares parameters as differentiable
// leaves, frozen as constants (for input-space gradients).
struct ModelVars {
  struct Layer {
    Var w, b;
    bool relu_after;
  };
  std::vector<Layer> layers;
  Var head_w, head_b;
};

ModelVars declare_trainable(Tape& t, const Model& m);
ModelVars declare_frozen(Tape& t, const Model& m);
// x may be a single column (in) or a batch (in, B).
Var backbone_out(Tape& t, const ModelVars& mv, Var x);
Var logits_out(Tape& t, const ModelVars& mv, Var q);

}  // namespace noisecurve
