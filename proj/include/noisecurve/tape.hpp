#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "noisecurve/tensor.hpp"

namespace noisecurve {

// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = 0;
};

// Reverse-mode tape. Ops execute eagerly: creating a node computes its
// value immediately, so intermediate values (needed e.g. for data
// dependent branching) are always available. backward() then sweeps the
// recorded program once in reverse.
//
// Conventions baked into the kernels:
//   relu'(0) = 0, hinge'(0) = 0, d|x|/dx at 0 = 0,
//   maximum(a, b) routes its gradient to a on ties,
//   norm gradient at the origin is 0.
class Tape {
 public:
  // Leaves. input() participates in gradients, constant() never does.
  Var input(Tensor v);
  Var constant(Tensor v);

  // (m,k)x(k,n) -> (m,n); a (k) right operand is treated as one column.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);        // elementwise, same shape
  Var sub(Var a, Var b);        // elementwise, same shape
  Var mul(Var a, Var b);        // elementwise, same shape
  Var scale(Var a, double s);   // s * a
  Var offset(Var a, double s);  // a + s, elementwise
  Var add_colvec(Var m, Var v);              // column-broadcast add
  Var gather_cols(Var m, std::vector<std::uint32_t> idx);
  Var rowmeans(Var m);          // (r,c) -> (r), mean across columns
  Var colnorms(Var m);          // (r,c) -> (c), Euclidean per column
  Var relu(Var a);
  Var hinge(Var a);             // max(0, x); same kernel as relu
  Var abs_value(Var a);
  Var maximum(Var a, Var b);    // scalars
  Var divide(Var a, Var b);     // scalars, rejects division by zero
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var norm(Var a);              // Euclidean over all elements
  Var slice_row(Var m, std::uint32_t row);
  Var element(Var v, std::uint32_t i);

  // Mean cross-entropy of log-sum-exp stabilized softmax over columns of
  // a (C,B) matrix (a (C) vector counts as one column). One label per
  // column, each in [0, C).
  Var softmax_cross_entropy(Var z, std::vector<std::uint32_t> labels);

  // W x + b with column broadcast when x is a matrix.
  Var affine(Var w, Var x, Var b);

  const Tensor& value(Var v) const;

  // Reverse sweep from a scalar seed. Rejects non-scalar seeds. Grads
  // accumulate over the whole recorded program; constants are skipped.
  void backward(Var seed);

  // Gradient captured by the last backward(); zeros if the node was not
  // reached (or was recorded after the seed).
  Tensor grad(Var v) const;

  // Replace leaf values (in input() declaration order), recompute every
  // node, return the value of the most recently recorded node. Shapes
  // must match the original declarations.
  Tensor forward(std::span<const Tensor> inputs);

  void set_input(Var v, Tensor value);
  void recompute();

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t input_count() const noexcept { return input_ids_.size(); }

 private:
  enum class Op : std::uint8_t {
    input,
    constant,
    matmul,
    add,
    sub,
    mul,
    scale,
    offset,
    add_colvec,
    gather_cols,
    rowmeans,
    colnorms,
    relu,
    hinge,
    abs_value,
    maximum,
    divide,
    dot,
    sum,
    norm,
    slice_row,
    element,
    softmax_ce,
  };

  struct Node {
    Op op;
    bool tracked;  // participates in gradient propagation
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double s = 0.0;
    std::uint32_t index = 0;
    std::vector<std::uint32_t> idx;  // gather indices or labels
  };

  Var push(Node n, Tensor value);
  void eval_node(std::uint32_t i);
  void check_fresh(const char* what) const;
  [[noreturn]] void reject(const std::string& msg) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<std::uint32_t> input_ids_;
  bool stale_ = false;  // set_input happened, recompute pending
};

// Central-difference gradient of a scalar field, the oracle the tape is
// tested against. Rejects non-finite samples of fn.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn,
                                  const Tensor& point, double step = 1e-5);

}  // namespace noisecurve
