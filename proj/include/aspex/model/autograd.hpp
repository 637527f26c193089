// Copyright 2026 The Aspex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "aspex/common.hpp"

namespace aspex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) { zero_grad(); }

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

/// Numerically stable log(1 + e^x).
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Reverse-mode tape over dense matrices. A graph is built per batch and
/// discarded afterwards; parameter gradients are accumulated into
/// Parameter::grad by backward().
class Graph {
 public:
  struct Var {
    int id = -1;
  };

  explicit Graph(bool track_gradients = true) : track_(track_gradients) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const Matrix& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.ref ? *n.ref : n.value;
  }
  double scalar(Var v) const { return value(v)(0, 0); }

  /// Gradient of the last backward() target w.r.t. `v` (zeros if untouched).
  Matrix grad(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) return Matrix::Zero(value(v).rows(), value(v).cols());
    return n.grad;
  }

  Var constant(Matrix m) { return push(std::move(m), false); }

  /// Leaf bound to a parameter; created once per graph per parameter.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
    Node n;
    n.ref = &p.value;
    n.requires_grad = track_;
    n.param = &p;
    nodes_.push_back(std::move(n));
    Var v{static_cast<int>(nodes_.size() - 1)};
    param_nodes_.emplace(&p, v);
    return v;
  }

  /// Rows `ids` of a parameter table; the gradient is scattered straight into
  /// the parameter so large tables are never copied into the tape.
  Var gather_rows(Parameter& p, std::span<const int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), p.value.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || ids[r] >= p.value.rows()) {
        throw UnknownId(p.name + ": row " + std::to_string(ids[r]) + " out of range");
      }
      out.row(static_cast<Eigen::Index>(r)) = p.value.row(ids[r]);
    }
    Var v = push(std::move(out), track_);
    if (tracking(v)) {
      std::vector<int> rows(ids.begin(), ids.end());
      Parameter* target = &p;
      set_backward(v, [v, rows, target](Graph& g) {
        const Matrix& d = g.node(v).grad;
        if (target->grad.rows() != target->value.rows()) target->zero_grad();
        for (std::size_t r = 0; r < rows.size(); ++r) {
          target->grad.row(rows[r]) += d.row(static_cast<Eigen::Index>(r));
        }
      });
    }
    return v;
  }

  Var matmul(Var a, Var b) {
    Var v = push(value(a) * value(b), any(a, b));
    if (tracking(v)) {
      set_backward(v, [v, a, b](Graph& g) {
        const Matrix& d = g.node(v).grad;
        if (g.tracking(a)) g.accum(a, d * g.value(b).transpose());
        if (g.tracking(b)) g.accum(b, g.value(a).transpose() * d);
      });
    }
    return v;
  }

  /// a * b^T
  Var matmul_nt(Var a, Var b) {
    Var v = push(value(a) * value(b).transpose(), any(a, b));
    if (tracking(v)) {
      set_backward(v, [v, a, b](Graph& g) {
        const Matrix& d = g.node(v).grad;
        if (g.tracking(a)) g.accum(a, d * g.value(b));
        if (g.tracking(b)) g.accum(b, d.transpose() * g.value(a));
      });
    }
    return v;
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Var v = push(value(a) + value(b), any(a, b));
    if (tracking(v)) {
      set_backward(v, [v, a, b](Graph& g) {
        const Matrix& d = g.node(v).grad;
        if (g.tracking(a)) g.accum(a, d);
        if (g.tracking(b)) g.accum(b, d);
      });
    }
    return v;
  }

  /// Adds a 1 x n row to every row of a.
  Var add_row(Var a, Var row) {
    if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
      throw InvalidArgument("add_row: shape mismatch");
    }
    Matrix out = value(a);
    out.rowwise() += value(row).row(0);
    Var v = push(std::move(out), any(a, row));
    if (tracking(v)) {
      set_backward(v, [v, a, row](Graph& g) {
        const Matrix& d = g.node(v).grad;
        if (g.tracking(a)) g.accum(a, d);
        if (g.tracking(row)) g.accum(row, d.colwise().sum());
      });
    }
    return v;
  }

  Var scale(Var a, double s) {
    Var v = push(value(a) * s, any(a));
    if (tracking(v)) {
      set_backward(v, [v, a, s](Graph& g) { g.accum(a, g.node(v).grad * s); });
    }
    return v;
  }

  Var relu(Var a) {
    Var v = push(value(a).cwiseMax(0.0), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a](Graph& g) {
        const Matrix mask = (g.value(a).array() > 0.0).cast<double>().matrix();
        g.accum(a, g.node(v).grad.cwiseProduct(mask));
      });
    }
    return v;
  }

  /// tanh approximation of GELU.
  Var gelu(Var a) {
    static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double c = 0.044715;
    const Matrix& x = value(a);
    Matrix t = ((x.array() + c * x.array().cube()) * k).tanh().matrix();
    Matrix out = (0.5 * x.array() * (1.0 + t.array())).matrix();
    Var v = push(std::move(out), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a, t = std::move(t)](Graph& g) {
        const auto& xa = g.value(a).array();
        const auto dt = (1.0 - t.array().square()) * k * (1.0 + 3.0 * c * xa.square());
        const Matrix local = (0.5 * (1.0 + t.array()) + 0.5 * xa * dt).matrix();
        g.accum(a, g.node(v).grad.cwiseProduct(local));
      });
    }
    return v;
  }

  /// Row-wise layer normalization with learned gain and bias (1 x n each).
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5) {
    const Matrix& x = value(a);
    const Eigen::Index n = x.cols();
    Matrix xhat(x.rows(), n);
    RowVector inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mu = x.row(r).mean();
      const double var = (x.row(r).array() - mu).square().mean();
      inv_std(r) = 1.0 / std::sqrt(var + eps);
      xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
    }
    Matrix out = xhat;
    out.array().rowwise() *= value(gain).row(0).array();
    out.rowwise() += value(bias).row(0);
    Var v = push(std::move(out), any(a, gain, bias));
    if (tracking(v)) {
      set_backward(v, [v, a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g) {
        const Matrix& d = g.node(v).grad;
        if (g.tracking(gain)) g.accum(gain, d.cwiseProduct(xhat).colwise().sum());
        if (g.tracking(bias)) g.accum(bias, d.colwise().sum());
        if (g.tracking(a)) {
          Matrix dxhat = d;
          dxhat.array().rowwise() *= g.value(gain).row(0).array();
          Matrix dx(dxhat.rows(), dxhat.cols());
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const double m1 = dxhat.row(r).mean();
            const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
          }
          g.accum(a, dx);
        }
      });
    }
    return v;
  }

  /// Softmax over each row restricted to columns <= row (square input).
  Var causal_softmax(Var a) {
    const Matrix& x = value(a);
    if (x.rows() != x.cols()) throw InvalidArgument("causal_softmax: square input required");
    Matrix p = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mx = x.row(r).head(r + 1).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index c = 0; c <= r; ++c) {
        p(r, c) = std::exp(x(r, c) - mx);
        sum += p(r, c);
      }
      p.row(r).head(r + 1) /= sum;
    }
    Var v = push(std::move(p), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a](Graph& g) {
        const Matrix& d = g.node(v).grad;
        const Matrix& pv = g.value(v);
        Matrix dx(d.rows(), d.cols());
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
          const double dot = d.row(r).dot(pv.row(r));
          dx.row(r) = pv.row(r).array() * (d.row(r).array() - dot);
        }
        g.accum(a, dx);
      });
    }
    return v;
  }

  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    Var v = push(value(a).middleCols(start, count), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a, start, count](Graph& g) {
        Matrix full = Matrix::Zero(g.value(a).rows(), g.value(a).cols());
        full.middleCols(start, count) = g.node(v).grad;
        g.accum(a, full);
      });
    }
    return v;
  }

  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    Var v = push(value(a).middleRows(start, count), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a, start, count](Graph& g) {
        Matrix full = Matrix::Zero(g.value(a).rows(), g.value(a).cols());
        full.middleRows(start, count) = g.node(v).grad;
        g.accum(a, full);
      });
    }
    return v;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    bool req = false;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw InvalidArgument("concat_cols: row mismatch");
      cols += value(p).cols();
      req = req || tracking(p);
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    Var v = push(std::move(out), req);
    if (tracking(v)) {
      set_backward(v, [v, parts](Graph& g) {
        Eigen::Index off = 0;
        for (Var p : parts) {
          const Eigen::Index w = g.value(p).cols();
          if (g.tracking(p)) g.accum(p, g.node(v).grad.middleCols(off, w));
          off += w;
        }
      });
    }
    return v;
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    bool req = false;
    for (Var p : parts) {
      if (value(p).cols() != cols) throw InvalidArgument("concat_rows: column mismatch");
      rows += value(p).rows();
      req = req || tracking(p);
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
    }
    Var v = push(std::move(out), req);
    if (tracking(v)) {
      set_backward(v, [v, parts](Graph& g) {
        Eigen::Index off = 0;
        for (Var p : parts) {
          const Eigen::Index h = g.value(p).rows();
          if (g.tracking(p)) g.accum(p, g.node(v).grad.middleRows(off, h));
          off += h;
        }
      });
    }
    return v;
  }

  /// 1 x n mean of the rows.
  Var mean_rows(Var a) {
    const double n = static_cast<double>(value(a).rows());
    Var v = push(value(a).colwise().mean(), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a, n](Graph& g) {
        Matrix d = g.node(v).grad.replicate(g.value(a).rows(), 1) / n;
        g.accum(a, d);
      });
    }
    return v;
  }

  /// Sum of 1 x 1 nodes.
  Var sum(const std::vector<Var>& parts) {
    double total = 0.0;
    bool req = false;
    for (Var p : parts) {
      total += scalar(p);
      req = req || tracking(p);
    }
    Var v = push(Matrix::Constant(1, 1, total), req);
    if (tracking(v)) {
      set_backward(v, [v, parts](Graph& g) {
        for (Var p : parts) {
          if (g.tracking(p)) g.accum(p, g.node(v).grad);
        }
      });
    }
    return v;
  }

  /// Mean over `targets` of -log softmax(logits.row(row))[token].
  Var nll(Var logits, const std::vector<std::pair<int, int>>& targets) {
    if (targets.empty()) throw InvalidArgument("nll: no targets");
    const Matrix& z = value(logits);
    double total = 0.0;
    Matrix probs(static_cast<Eigen::Index>(targets.size()), z.cols());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto [row, token] = targets[k];
      if (row < 0 || row >= z.rows() || token < 0 || token >= z.cols()) {
        throw InvalidArgument("nll: target out of range");
      }
      const double mx = z.row(row).maxCoeff();
      const RowVector e = (z.row(row).array() - mx).exp().matrix();
      const double s = e.sum();
      if (!std::isfinite(s) || !std::isfinite(mx)) throw NumericError("non-finite logits");
      probs.row(static_cast<Eigen::Index>(k)) = e / s;
      total += -(z(row, token) - mx - std::log(s));
    }
    const double count = static_cast<double>(targets.size());
    Var v = push(Matrix::Constant(1, 1, total / count), any(logits));
    if (tracking(v)) {
      set_backward(v, [v, logits, targets, probs = std::move(probs), count](Graph& g) {
        const double d = g.node(v).grad(0, 0);
        Matrix dz = Matrix::Zero(g.value(logits).rows(), g.value(logits).cols());
        for (std::size_t k = 0; k < targets.size(); ++k) {
          const auto [row, token] = targets[k];
          dz.row(row) += probs.row(static_cast<Eigen::Index>(k)) * (d / count);
          dz(row, token) -= d / count;
        }
        g.accum(logits, dz);
      });
    }
    return v;
  }

  /// 1 x 1 node with a precomputed value and local gradient w.r.t. `a`.
  Var scalar_op(Var a, double val, Matrix local_grad) {
    Var v = push(Matrix::Constant(1, 1, val), any(a));
    if (tracking(v)) {
      set_backward(v, [v, a, lg = std::move(local_grad)](Graph& g) {
        g.accum(a, lg * g.node(v).grad(0, 0));
      });
    }
    return v;
  }

  /// Runs reverse accumulation from a 1 x 1 node and flushes parameter
  /// gradients.
  void backward(Var target) {
    if (value(target).size() != 1) throw InvalidArgument("backward: scalar target required");
    if (!tracking(target)) return;
    node(target).grad = Matrix::Ones(1, 1);
    for (int i = target.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.back) n.back(*this);
      if (n.param) {
        if (n.param->grad.rows() != n.param->value.rows()) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool tracks_gradients() const { return track_; }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(Graph&)> back;
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }

  bool tracking(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

  template <typename... V>
  bool any(V... vs) const {
    return track_ && (tracking(vs) || ...);
  }

  Var push(Matrix m, bool requires_grad) {
    Node n;
    n.value = std::move(m);
    n.requires_grad = requires_grad && track_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  void set_backward(Var v, std::function<void(Graph&)> f) { node(v).back = std::move(f); }

  void accum(Var v, const Matrix& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void check_same(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw InvalidArgument(std::string(op) + ": shape mismatch");
    }
  }

  bool track_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Var> param_nodes_;
};

}  // namespace aspex
