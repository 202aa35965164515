#include "noisecurve/tape.hpp"

#include <cmath>
#include <string>

#include "noisecurve/errors.hpp"

namespace noisecurve {

namespace {

std::string node_tag(std::size_t id) { return "node " + std::to_string(id); }

}  // namespace

void Tape::reject(const std::string& msg) const {
  fail(ErrorCode::shape_mismatch, node_tag(nodes_.size()) + ": " + msg);
}

Var Tape::push(Node n, Tensor value) {
  std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(std::move(n));
  values_.push_back(std::move(value));
  return {id};
}

Var Tape::input(Tensor v) {
  Var var = push({Op::input, true}, std::move(v));
  input_ids_.push_back(var.id);
  return var;
}

Var Tape::constant(Tensor v) {
  return push({Op::constant, false}, std::move(v));
}

const Tensor& Tape::value(Var v) const {
  if (v.id >= values_.size())
    fail(ErrorCode::invalid_argument, "value() of unknown " + node_tag(v.id));
  return values_[v.id];
}

void Tape::check_fresh(const char* what) const {
  if (stale_)
    fail(ErrorCode::invalid_argument,
         std::string(what) + " on a stale tape; recompute() first");
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2) ||
      A.cols() != B.shape()[0])
    reject("matmul shapes " + A.shape_str() + " and " + B.shape_str() +
           " incompatible");
  Node n{Op::matmul, nodes_[a.id].tracked || nodes_[b.id].tracked, a.id, b.id};
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::add(Var a, Var b) {
  if (!value(a).same_shape(value(b)))
    reject("add shapes " + value(a).shape_str() + " and " +
           value(b).shape_str() + " differ");
  Var out = push({Op::add, nodes_[a.id].tracked || nodes_[b.id].tracked,
                  a.id, b.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::sub(Var a, Var b) {
  if (!value(a).same_shape(value(b)))
    reject("sub shapes " + value(a).shape_str() + " and " +
           value(b).shape_str() + " differ");
  Var out = push({Op::sub, nodes_[a.id].tracked || nodes_[b.id].tracked,
                  a.id, b.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::mul(Var a, Var b) {
  if (!value(a).same_shape(value(b)))
    reject("mul shapes " + value(a).shape_str() + " and " +
           value(b).shape_str() + " differ");
  Var out = push({Op::mul, nodes_[a.id].tracked || nodes_[b.id].tracked,
                  a.id, b.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::scale(Var a, double s) {
  Node n{Op::scale, nodes_[a.id].tracked, a.id};
  n.s = s;
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::offset(Var a, double s) {
  Node n{Op::offset, nodes_[a.id].tracked, a.id};
  n.s = s;
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::add_colvec(Var m, Var v) {
  const Tensor& M = value(m);
  const Tensor& V = value(v);
  if (M.rank() != 2 || V.rank() != 1 || V.shape()[0] != M.rows())
    reject("add_colvec shapes " + M.shape_str() + " and " + V.shape_str() +
           " incompatible");
  Var out = push({Op::add_colvec,
                  nodes_[m.id].tracked || nodes_[v.id].tracked, m.id, v.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::gather_cols(Var m, std::vector<std::uint32_t> idx) {
  const Tensor& M = value(m);
  if (M.rank() != 2) reject("gather_cols on " + M.shape_str());
  if (idx.empty()) reject("gather_cols with no indices");
  for (std::uint32_t j : idx)
    if (j >= M.cols())
      reject("gather_cols index " + std::to_string(j) + " out of range");
  Node n{Op::gather_cols, nodes_[m.id].tracked, m.id};
  n.idx = std::move(idx);
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::rowmeans(Var m) {
  const Tensor& M = value(m);
  if (M.rank() != 2 || M.cols() == 0) reject("rowmeans on " + M.shape_str());
  Var out = push({Op::rowmeans, nodes_[m.id].tracked, m.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::colnorms(Var m) {
  const Tensor& M = value(m);
  if (M.rank() != 2) reject("colnorms on " + M.shape_str());
  Var out = push({Op::colnorms, nodes_[m.id].tracked, m.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::relu(Var a) {
  Var out = push({Op::relu, nodes_[a.id].tracked, a.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::hinge(Var a) {
  Var out = push({Op::hinge, nodes_[a.id].tracked, a.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::abs_value(Var a) {
  Var out = push({Op::abs_value, nodes_[a.id].tracked, a.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::maximum(Var a, Var b) {
  if (!value(a).is_scalar() || !value(b).is_scalar())
    reject("maximum needs scalars");
  Var out = push({Op::maximum, nodes_[a.id].tracked || nodes_[b.id].tracked,
                  a.id, b.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::divide(Var a, Var b) {
  if (!value(a).is_scalar() || !value(b).is_scalar())
    reject("divide needs scalars");
  Var out = push({Op::divide, nodes_[a.id].tracked || nodes_[b.id].tracked,
                  a.id, b.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::dot(Var a, Var b) {
  if (!value(a).same_shape(value(b)))
    reject("dot shapes " + value(a).shape_str() + " and " +
           value(b).shape_str() + " differ");
  Var out = push({Op::dot, nodes_[a.id].tracked || nodes_[b.id].tracked,
                  a.id, b.id},
                 Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::sum(Var a) {
  Var out = push({Op::sum, nodes_[a.id].tracked, a.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::norm(Var a) {
  Var out = push({Op::norm, nodes_[a.id].tracked, a.id}, Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::slice_row(Var m, std::uint32_t row) {
  const Tensor& M = value(m);
  if (M.rank() != 2 || row >= M.rows())
    reject("slice_row " + std::to_string(row) + " of " + M.shape_str());
  Node n{Op::slice_row, nodes_[m.id].tracked, m.id};
  n.index = row;
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::element(Var v, std::uint32_t i) {
  const Tensor& V = value(v);
  if (V.rank() != 1 || i >= V.size())
    reject("element " + std::to_string(i) + " of " + V.shape_str());
  Node n{Op::element, nodes_[v.id].tracked, v.id};
  n.index = i;
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::softmax_cross_entropy(Var z, std::vector<std::uint32_t> labels) {
  const Tensor& Z = value(z);
  std::size_t classes, batch;
  if (Z.rank() == 2) {
    classes = Z.rows();
    batch = Z.cols();
  } else if (Z.rank() == 1) {
    classes = Z.size();
    batch = 1;
  } else {
    reject("softmax_cross_entropy on " + Z.shape_str());
  }
  if (labels.size() != batch)
    reject("softmax_cross_entropy got " + std::to_string(labels.size()) +
           " labels for " + std::to_string(batch) + " columns");
  for (std::uint32_t y : labels)
    if (y >= classes)
      reject("label " + std::to_string(y) + " outside [0," +
             std::to_string(classes) + ")");
  Node n{Op::softmax_ce, nodes_[z.id].tracked, z.id};
  n.idx = std::move(labels);
  Var out = push(std::move(n), Tensor{});
  eval_node(out.id);
  return out;
}

Var Tape::affine(Var w, Var x, Var b) {
  Var wx = matmul(w, x);
  if (value(x).rank() == 2) return add_colvec(wx, b);
  return add(wx, b);
}

void Tape::eval_node(std::uint32_t i) {
  const Node& n = nodes_[i];
  switch (n.op) {
    case Op::input:
    case Op::constant:
      return;
    case Op::matmul: {
      const Tensor& A = values_[n.a];
      const Tensor& B = values_[n.b];
      std::size_t m = A.rows(), k = A.cols();
      if (B.rank() == 1) {
        Tensor out = Tensor::zeros({m});
        for (std::size_t r = 0; r < m; ++r) {
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += A.at(r, j) * B[j];
          out[r] = s;
        }
        values_[i] = std::move(out);
      } else {
        std::size_t c = B.cols();
        Tensor out = Tensor::zeros({m, c});
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < k; ++j) {
            double arj = A.at(r, j);
            if (arj == 0.0) continue;
            for (std::size_t q = 0; q < c; ++q)
              out.at(r, q) += arj * B.at(j, q);
          }
        values_[i] = std::move(out);
      }
      return;
    }
    case Op::add: {
      values_[i] = values_[n.a] + values_[n.b];
      return;
    }
    case Op::sub: {
      values_[i] = values_[n.a] - values_[n.b];
      return;
    }
    case Op::mul: {
      Tensor out = values_[n.a];
      const Tensor& B = values_[n.b];
      for (std::size_t j = 0; j < out.size(); ++j) out[j] *= B[j];
      values_[i] = std::move(out);
      return;
    }
    case Op::scale: {
      values_[i] = n.s * values_[n.a];
      return;
    }
    case Op::offset: {
      Tensor out = values_[n.a];
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += n.s;
      values_[i] = std::move(out);
      return;
    }
    case Op::add_colvec: {
      Tensor out = values_[n.a];
      const Tensor& V = values_[n.b];
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += V[r];
      values_[i] = std::move(out);
      return;
    }
    case Op::gather_cols: {
      const Tensor& M = values_[n.a];
      Tensor out = Tensor::zeros({M.rows(), n.idx.size()});
      for (std::size_t j = 0; j < n.idx.size(); ++j)
        for (std::size_t r = 0; r < M.rows(); ++r)
          out.at(r, j) = M.at(r, n.idx[j]);
      values_[i] = std::move(out);
      return;
    }
    case Op::rowmeans: {
      const Tensor& M = values_[n.a];
      Tensor out = Tensor::zeros({M.rows()});
      for (std::size_t r = 0; r < M.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < M.cols(); ++c) s += M.at(r, c);
        out[r] = s / static_cast<double>(M.cols());
      }
      values_[i] = std::move(out);
      return;
    }
    case Op::colnorms: {
      const Tensor& M = values_[n.a];
      Tensor out = Tensor::zeros({M.cols()});
      for (std::size_t c = 0; c < M.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < M.rows(); ++r)
          s += M.at(r, c) * M.at(r, c);
        out[c] = std::sqrt(s);
      }
      values_[i] = std::move(out);
      return;
    }
    case Op::relu:
    case Op::hinge: {
      Tensor out = values_[n.a];
      for (std::size_t j = 0; j < out.size(); ++j)
        if (out[j] < 0.0) out[j] = 0.0;
      values_[i] = std::move(out);
      return;
    }
    case Op::abs_value: {
      Tensor out = values_[n.a];
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::fabs(out[j]);
      values_[i] = std::move(out);
      return;
    }
    case Op::maximum: {
      double a = values_[n.a].item(), b = values_[n.b].item();
      values_[i] = Tensor::scalar(a >= b ? a : b);
      return;
    }
    case Op::divide: {
      double b = values_[n.b].item();
      if (b == 0.0)
        fail(ErrorCode::numeric, node_tag(i) + ": division by zero");
      values_[i] = Tensor::scalar(values_[n.a].item() / b);
      return;
    }
    case Op::dot: {
      values_[i] = Tensor::scalar(noisecurve::dot(values_[n.a], values_[n.b]));
      return;
    }
    case Op::sum: {
      double s = 0.0;
      for (std::size_t j = 0; j < values_[n.a].size(); ++j)
        s += values_[n.a][j];
      values_[i] = Tensor::scalar(s);
      return;
    }
    case Op::norm: {
      values_[i] = Tensor::scalar(noisecurve::norm(values_[n.a]));
      return;
    }
    case Op::slice_row: {
      const Tensor& M = values_[n.a];
      Tensor out = Tensor::zeros({M.cols()});
      for (std::size_t c = 0; c < M.cols(); ++c) out[c] = M.at(n.index, c);
      values_[i] = std::move(out);
      return;
    }
    case Op::element: {
      values_[i] = Tensor::scalar(values_[n.a][n.index]);
      return;
    }
    case Op::softmax_ce: {
      const Tensor& Z = values_[n.a];
      std::size_t classes = Z.rank() == 2 ? Z.rows() : Z.size();
      std::size_t batch = Z.rank() == 2 ? Z.cols() : 1;
      auto logit = [&](std::size_t r, std::size_t c) {
        return Z.rank() == 2 ? Z.at(r, c) : Z[r];
      };
      double total = 0.0;
      for (std::size_t c = 0; c < batch; ++c) {
        double m = logit(0, c);
        for (std::size_t r = 1; r < classes; ++r)
          if (logit(r, c) > m) m = logit(r, c);
        double lse = 0.0;
        for (std::size_t r = 0; r < classes; ++r)
          lse += std::exp(logit(r, c) - m);
        total += m + std::log(lse) - logit(n.idx[c], c);
      }
      values_[i] = Tensor::scalar(total / static_cast<double>(batch));
      return;
    }
  }
}

void Tape::backward(Var seed) {
  check_fresh("backward");
  if (seed.id >= nodes_.size())
    fail(ErrorCode::invalid_argument, "backward from unknown " +
                                          node_tag(seed.id));
  if (!values_[seed.id].is_scalar())
    fail(ErrorCode::invalid_argument,
         "backward seed must be scalar, got " +
             values_[seed.id].shape_str() + " at " + node_tag(seed.id));

  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const Tensor& v : values_) grads_.push_back(Tensor::zeros(v.shape()));
  grads_[seed.id][0] = 1.0;

  for (std::uint32_t i = seed.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.tracked || n.op == Op::input || n.op == Op::constant) continue;
    const Tensor& g = grads_[i];
    bool track_a = nodes_[n.a].tracked;
    bool track_b = (n.op == Op::matmul || n.op == Op::add || n.op == Op::sub ||
                    n.op == Op::mul || n.op == Op::add_colvec ||
                    n.op == Op::maximum || n.op == Op::divide ||
                    n.op == Op::dot)
                       ? nodes_[n.b].tracked
                       : false;
    switch (n.op) {
      case Op::input:
      case Op::constant:
        break;
      case Op::matmul: {
        const Tensor& A = values_[n.a];
        const Tensor& B = values_[n.b];
        std::size_t m = A.rows(), k = A.cols();
        if (B.rank() == 1) {
          if (track_a) {
            Tensor& da = grads_[n.a];
            for (std::size_t r = 0; r < m; ++r)
              for (std::size_t j = 0; j < k; ++j)
                da.at(r, j) += g[r] * B[j];
          }
          if (track_b) {
            Tensor& db = grads_[n.b];
            for (std::size_t j = 0; j < k; ++j)
              for (std::size_t r = 0; r < m; ++r)
                db[j] += A.at(r, j) * g[r];
          }
        } else {
          std::size_t c = B.cols();
          if (track_a) {
            Tensor& da = grads_[n.a];
            for (std::size_t r = 0; r < m; ++r)
              for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t q = 0; q < c; ++q)
                  s += g.at(r, q) * B.at(j, q);
                da.at(r, j) += s;
              }
          }
          if (track_b) {
            Tensor& db = grads_[n.b];
            for (std::size_t j = 0; j < k; ++j)
              for (std::size_t q = 0; q < c; ++q) {
                double s = 0.0;
                for (std::size_t r = 0; r < m; ++r)
                  s += A.at(r, j) * g.at(r, q);
                db.at(j, q) += s;
              }
          }
        }
        break;
      }
      case Op::add: {
        if (track_a)
          for (std::size_t j = 0; j < g.size(); ++j) grads_[n.a][j] += g[j];
        if (track_b)
          for (std::size_t j = 0; j < g.size(); ++j) grads_[n.b][j] += g[j];
        break;
      }
      case Op::sub: {
        if (track_a)
          for (std::size_t j = 0; j < g.size(); ++j) grads_[n.a][j] += g[j];
        if (track_b)
          for (std::size_t j = 0; j < g.size(); ++j) grads_[n.b][j] -= g[j];
        break;
      }
      case Op::mul: {
        if (track_a)
          for (std::size_t j = 0; j < g.size(); ++j)
            grads_[n.a][j] += g[j] * values_[n.b][j];
        if (track_b)
          for (std::size_t j = 0; j < g.size(); ++j)
            grads_[n.b][j] += g[j] * values_[n.a][j];
        break;
      }
      case Op::scale: {
        if (track_a)
          for (std::size_t j = 0; j < g.size(); ++j)
            grads_[n.a][j] += n.s * g[j];
        break;
      }
      case Op::offset: {
        if (track_a)
          for (std::size_t j = 0; j < g.size(); ++j) grads_[n.a][j] += g[j];
        break;
      }
      case Op::add_colvec: {
        if (track_a)
          for (std::size_t j = 0; j < g.size(); ++j) grads_[n.a][j] += g[j];
        if (track_b) {
          Tensor& dv = grads_[n.b];
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c)
              dv[r] += g.at(r, c);
        }
        break;
      }
      case Op::gather_cols: {
        if (track_a) {
          Tensor& dm = grads_[n.a];
          for (std::size_t j = 0; j < n.idx.size(); ++j)
            for (std::size_t r = 0; r < g.rows(); ++r)
              dm.at(r, n.idx[j]) += g.at(r, j);
        }
        break;
      }
      case Op::rowmeans: {
        if (track_a) {
          Tensor& dm = grads_[n.a];
          double inv = 1.0 / static_cast<double>(dm.cols());
          for (std::size_t r = 0; r < dm.rows(); ++r)
            for (std::size_t c = 0; c < dm.cols(); ++c)
              dm.at(r, c) += g[r] * inv;
        }
        break;
      }
      case Op::colnorms: {
        if (track_a) {
          const Tensor& M = values_[n.a];
          const Tensor& v = values_[i];
          Tensor& dm = grads_[n.a];
          for (std::size_t c = 0; c < M.cols(); ++c) {
            if (v[c] == 0.0) continue;
            double f = g[c] / v[c];
            for (std::size_t r = 0; r < M.rows(); ++r)
              dm.at(r, c) += f * M.at(r, c);
          }
        }
        break;
      }
      case Op::relu:
      case Op::hinge: {
        if (track_a) {
          const Tensor& x = values_[n.a];
          for (std::size_t j = 0; j < g.size(); ++j)
            if (x[j] > 0.0) grads_[n.a][j] += g[j];
        }
        break;
      }
      case Op::abs_value: {
        if (track_a) {
          const Tensor& x = values_[n.a];
          for (std::size_t j = 0; j < g.size(); ++j) {
            if (x[j] > 0.0)
              grads_[n.a][j] += g[j];
            else if (x[j] < 0.0)
              grads_[n.a][j] -= g[j];
          }
        }
        break;
      }
      case Op::maximum: {
        bool pick_a = values_[n.a].item() >= values_[n.b].item();
        if (pick_a && track_a) grads_[n.a][0] += g[0];
        if (!pick_a && track_b) grads_[n.b][0] += g[0];
        break;
      }
      case Op::divide: {
        double a = values_[n.a].item(), b = values_[n.b].item();
        if (track_a) grads_[n.a][0] += g[0] / b;
        if (track_b) grads_[n.b][0] -= g[0] * a / (b * b);
        break;
      }
      case Op::dot: {
        if (track_a)
          for (std::size_t j = 0; j < values_[n.b].size(); ++j)
            grads_[n.a][j] += g[0] * values_[n.b][j];
        if (track_b)
          for (std::size_t j = 0; j < values_[n.a].size(); ++j)
            grads_[n.b][j] += g[0] * values_[n.a][j];
        break;
      }
      case Op::sum: {
        if (track_a)
          for (std::size_t j = 0; j < grads_[n.a].size(); ++j)
            grads_[n.a][j] += g[0];
        break;
      }
      case Op::norm: {
        if (track_a) {
          double v = values_[i].item();
          if (v != 0.0) {
            double f = g[0] / v;
            const Tensor& x = values_[n.a];
            for (std::size_t j = 0; j < x.size(); ++j)
              grads_[n.a][j] += f * x[j];
          }
        }
        break;
      }
      case Op::slice_row: {
        if (track_a) {
          Tensor& dm = grads_[n.a];
          for (std::size_t c = 0; c < g.size(); ++c)
            dm.at(n.index, c) += g[c];
        }
        break;
      }
      case Op::element: {
        if (track_a) grads_[n.a][n.index] += g[0];
        break;
      }
      case Op::softmax_ce: {
        if (track_a) {
          const Tensor& Z = values_[n.a];
          std::size_t classes = Z.rank() == 2 ? Z.rows() : Z.size();
          std::size_t batch = Z.rank() == 2 ? Z.cols() : 1;
          auto logit = [&](std::size_t r, std::size_t c) {
            return Z.rank() == 2 ? Z.at(r, c) : Z[r];
          };
          Tensor& dz = grads_[n.a];
          auto dref = [&](std::size_t r, std::size_t c) -> double& {
            return Z.rank() == 2 ? dz.at(r, c) : dz[r];
          };
          double gb = g[0] / static_cast<double>(batch);
          for (std::size_t c = 0; c < batch; ++c) {
            double m = logit(0, c);
            for (std::size_t r = 1; r < classes; ++r)
              if (logit(r, c) > m) m = logit(r, c);
            double lse = 0.0;
            for (std::size_t r = 0; r < classes; ++r)
              lse += std::exp(logit(r, c) - m);
            for (std::size_t r = 0; r < classes; ++r) {
              double p = std::exp(logit(r, c) - m) / lse;
              dref(r, c) += gb * (p - (r == n.idx[c] ? 1.0 : 0.0));
            }
          }
        }
        break;
      }
    }
  }
}

Tensor Tape::grad(Var v) const {
  if (grads_.empty())
    fail(ErrorCode::invalid_argument, "grad() before backward()");
  if (v.id >= nodes_.size())
    fail(ErrorCode::invalid_argument, "grad() of unknown " + node_tag(v.id));
  if (v.id >= grads_.size()) return Tensor::zeros(values_[v.id].shape());
  return grads_[v.id];
}

Tensor Tape::forward(std::span<const Tensor> inputs) {
  if (inputs.size() != input_ids_.size())
    fail(ErrorCode::shape_mismatch,
         "forward got " + std::to_string(inputs.size()) + " inputs, tape has " +
             std::to_string(input_ids_.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i)
    set_input({input_ids_[i]}, inputs[i]);
  recompute();
  if (nodes_.empty()) fail(ErrorCode::invalid_argument, "forward on empty tape");
  return values_.back();
}

void Tape::set_input(Var v, Tensor value) {
  if (v.id >= nodes_.size() || nodes_[v.id].op != Op::input)
    fail(ErrorCode::invalid_argument,
         node_tag(v.id) + " is not an input leaf");
  if (!values_[v.id].same_shape(value))
    fail(ErrorCode::shape_mismatch,
         node_tag(v.id) + ": input shape " + value.shape_str() +
             " does not match declared " + values_[v.id].shape_str());
  values_[v.id] = std::move(value);
  stale_ = true;
}

void Tape::recompute() {
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) eval_node(i);
  stale_ = false;
}

Tensor finite_difference_gradient(
    const std::function<double(const Tensor&)>& fn, const Tensor& point,
    double step) {
  if (step <= 0.0)
    fail(ErrorCode::invalid_argument, "finite difference step must be > 0");
  Tensor g = Tensor::zeros(point.shape());
  Tensor x = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    double xi = point[i];
    x[i] = xi + step;
    double hi = fn(x);
    x[i] = xi - step;
    double lo = fn(x);
    x[i] = xi;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      fail(ErrorCode::numeric,
           "non-finite sample in finite_difference_gradient at coordinate " +
               std::to_string(i));
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

}  // namespace noisecurve
