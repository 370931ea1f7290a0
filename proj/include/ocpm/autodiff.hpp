// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
// Every model tensor is 2-D; sequences are handled as one matrix per step.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ocpm/error.hpp"

namespace ocpm::ag {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor. Gradients accumulate across backward passes until zeroed.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename T>
class Tape;

/// Handle to a node recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  std::size_t id() const { return id_; }
  Tape<T>& tape() const { return *tape_; }
  const Matrix<T>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix<T>& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> value) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    return {this, nodes_.size() - 1};
  }

  /// Records a parameter leaf. The value is referenced, not copied, so the
  /// parameter must outlive the tape and stay unmodified until backward().
  Var<T> parameter(Parameter<T>& p) {
    Node& n = nodes_.emplace_back();
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = true;
    return {this, nodes_.size() - 1};
  }

  /// Records an operation result. `backward` receives the upstream gradient
  /// and is only stored when some input requires a gradient.
  Var<T> record(Matrix<T> value, bool requires_grad, Backward backward) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    return {this, nodes_.size() - 1};
  }

  const Matrix<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds `delta` into the gradient slot of node `id`, if it takes gradients.
  template <typename Expr>
  void accumulate(std::size_t id, const Expr& delta) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  /// Gradient-slot access for sparse updates; allocates zeros on first use.
  Matrix<T>& grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(value(id).rows(), value(id).cols());
    return n.grad;
  }

  /// Propagates d(loss)/d(node) from a 1x1 loss and adds parameter gradients
  /// into their Parameter::grad.
  void backward(const Var<T>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw Error(ErrorKind::ShapeMismatch, "backward() needs a scalar loss");
    nodes_[loss.id()].grad = Matrix<T>::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) {
        // Moving the gradient out keeps it valid while the closure appends into other nodes.
        Matrix<T> g = std::move(n.grad);
        n.backward(*this, g);
        n.grad = std::move(g);
      }
      if (n.param) {
        if (n.param->grad.size() == 0) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    const Matrix<T>* external = nullptr;
    Matrix<T> grad;
    Backward backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
};

namespace detail {

inline void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::ShapeMismatch, what);
}

}  // namespace detail

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::check(a.cols() == b.rows(), "matmul: inner dimensions differ");
  auto& tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  Matrix<T> out = a.value() * b.value();
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                       if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                     });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes differ");
  auto& tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  Matrix<T> out = a.value() + b.value();
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape<T>& t, const Matrix<T>& g) {
                       t.accumulate(ia, g);
                       t.accumulate(ib, g);
                     });
}

/// Adds a 1 x n row to every row of `a`.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  detail::check(row.rows() == 1 && row.cols() == a.cols(), "add_row: bias shape");
  auto& tape = a.tape();
  const auto ia = a.id(), ir = row.id();
  Matrix<T> out = a.value().rowwise() + row.value().row(0);
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ir),
                     [ia, ir](Tape<T>& t, const Matrix<T>& g) {
                       t.accumulate(ia, g);
                       if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
                     });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shapes differ");
  auto& tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                       if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                     });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = a.value() * factor;
  return tape.record(std::move(out), tape.requires_grad(ia),
                     [ia, factor](Tape<T>& t, const Matrix<T>& g) { t.accumulate(ia, g * factor); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = a.value().unaryExpr([](T x) { return T(1) / (T(1) + std::exp(-x)); });
  const auto io = tape.size();
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, io](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(io);
    t.accumulate(ia, g.cwiseProduct(y.cwiseProduct((T(1) - y.array()).matrix())));
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = a.value().array().tanh().matrix();
  const auto io = tape.size();
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, io](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(io);
    t.accumulate(ia, g.cwiseProduct((T(1) - y.array().square()).matrix()));
  });
}

template <typename T>
Var<T> elu(const Var<T>& a) {
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = a.value().unaryExpr([](T x) { return x > T(0) ? x : std::expm1(x); });
  return tape.record(std::move(out), tape.requires_grad(ia), [ia](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T> d = t.value(ia).unaryExpr([](T x) { return x > T(0) ? T(1) : std::exp(x); });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = a.value().unaryExpr([slope](T x) { return x > T(0) ? x : slope * x; });
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, slope](Tape<T>& t, const Matrix<T>& g) {
    const Matrix<T> d = t.value(ia).unaryExpr([slope](T x) { return x > T(0) ? T(1) : slope; });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Eigen::Index start, Eigen::Index count) {
  detail::check(start >= 0 && start + count <= a.cols(), "slice_cols: range");
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = a.value().middleCols(start, count);
  return tape.record(std::move(out), tape.requires_grad(ia), [ia, start, count](Tape<T>& t, const Matrix<T>& g) {
    t.grad_slot(ia).middleCols(start, count) += g;
  });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  detail::check(!parts.empty(), "concat_cols: nothing to concatenate");
  auto& tape = parts[0].tape();
  Eigen::Index cols = 0;
  bool needs = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    detail::check(p.rows() == parts[0].rows(), "concat_cols: row counts differ");
    cols += p.cols();
    needs = needs || tape.requires_grad(p.id());
    ids.push_back(p.id());
  }
  Matrix<T> out(parts[0].rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return tape.record(std::move(out), needs, [ids](Tape<T>& t, const Matrix<T>& g) {
    Eigen::Index offset = 0;
    for (auto id : ids) {
      const auto width = t.value(id).cols();
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(offset, width));
      offset += width;
    }
  });
}

/// Row lookup; a negative index yields a zero row that receives no gradient.
template <typename T>
Var<T> gather_rows(const Var<T>& a, std::vector<int> index) {
  auto& tape = a.tape();
  const auto ia = a.id();
  const auto& src = a.value();
  Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(index.size()), src.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    if (index[i] >= src.rows()) throw Error(ErrorKind::IndexOutOfRange, "gather_rows: index " + std::to_string(index[i]));
    out.row(static_cast<Eigen::Index>(i)) = src.row(index[i]);
  }
  return tape.record(std::move(out), tape.requires_grad(ia),
                     [ia, index = std::move(index)](Tape<T>& t, const Matrix<T>& g) {
                       auto& slot = t.grad_slot(ia);
                       for (std::size_t i = 0; i < index.size(); ++i) {
                         if (index[i] >= 0) slot.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
                       }
                     });
}

/// out.row(index[i]) += a.row(i); output has `rows` rows.
template <typename T>
Var<T> scatter_add_rows(const Var<T>& a, std::vector<int> index, Eigen::Index rows) {
  detail::check(static_cast<Eigen::Index>(index.size()) == a.rows(), "scatter_add_rows: index length");
  auto& tape = a.tape();
  const auto ia = a.id();
  Matrix<T> out = Matrix<T>::Zero(rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  return tape.record(std::move(out), tape.requires_grad(ia),
                     [ia, index = std::move(index)](Tape<T>& t, const Matrix<T>& g) {
                       Matrix<T> d(static_cast<Eigen::Index>(index.size()), g.cols());
                       for (std::size_t i = 0; i < index.size(); ++i) d.row(static_cast<Eigen::Index>(i)) = g.row(index[i]);
                       t.accumulate(ia, d);
                     });
}

/// Softmax of an E x 1 column within groups sharing the same segment id.
template <typename T>
Var<T> segment_softmax(const Var<T>& logits, std::vector<int> segment, Eigen::Index segments) {
  detail::check(logits.cols() == 1 && static_cast<Eigen::Index>(segment.size()) == logits.rows(),
                "segment_softmax: expects E x 1 logits and E segment ids");
  auto& tape = logits.tape();
  const auto il = logits.id();
  const auto& z = logits.value();
  std::vector<T> peak(static_cast<std::size_t>(segments), -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    peak[segment[i]] = std::max(peak[segment[i]], z(static_cast<Eigen::Index>(i), 0));
  }
  Matrix<T> out(z.rows(), 1);
  std::vector<T> total(static_cast<std::size_t>(segments), T(0));
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const T e = std::exp(z(static_cast<Eigen::Index>(i), 0) - peak[segment[i]]);
    out(static_cast<Eigen::Index>(i), 0) = e;
    total[segment[i]] += e;
  }
  for (std::size_t i = 0; i < segment.size(); ++i) out(static_cast<Eigen::Index>(i), 0) /= total[segment[i]];
  const auto io = tape.size();
  return tape.record(std::move(out), tape.requires_grad(il),
                     [il, io, segments, segment = std::move(segment)](Tape<T>& t, const Matrix<T>& g) {
                       const auto& y = t.value(io);
                       std::vector<T> dot(static_cast<std::size_t>(segments), T(0));
                       for (std::size_t i = 0; i < segment.size(); ++i) {
                         dot[segment[i]] += y(static_cast<Eigen::Index>(i), 0) * g(static_cast<Eigen::Index>(i), 0);
                       }
                       Matrix<T> d(y.rows(), 1);
                       for (std::size_t i = 0; i < segment.size(); ++i) {
                         const auto r = static_cast<Eigen::Index>(i);
                         d(r, 0) = y(r, 0) * (g(r, 0) - dot[segment[i]]);
                       }
                       t.accumulate(il, d);
                     });
}

/// Multiplies row i of `a` by the scalar w(i, 0).
template <typename T>
Var<T> scale_rows(const Var<T>& a, const Var<T>& w) {
  detail::check(w.cols() == 1 && w.rows() == a.rows(), "scale_rows: weight shape");
  auto& tape = a.tape();
  const auto ia = a.id(), iw = w.id();
  Matrix<T> out = a.value().array().colwise() * w.value().col(0).array();
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(iw),
                     [ia, iw](Tape<T>& t, const Matrix<T>& g) {
                       if (t.requires_grad(ia)) {
                         t.accumulate(ia, (g.array().colwise() * t.value(iw).col(0).array()).matrix());
                       }
                       if (t.requires_grad(iw)) t.accumulate(iw, g.cwiseProduct(t.value(ia)).rowwise().sum());
                     });
}

/// Row-wise choice: mask[i] != 0 takes a.row(i), otherwise b.row(i). Exact, no arithmetic.
template <typename T>
Var<T> select_rows(std::vector<std::uint8_t> mask, const Var<T>& a, const Var<T>& b) {
  detail::check(a.rows() == b.rows() && a.cols() == b.cols() && static_cast<Eigen::Index>(mask.size()) == a.rows(),
                "select_rows: shapes");
  auto& tape = a.tape();
  const auto ia = a.id(), ib = b.id();
  Matrix<T> out = b.value();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.row(static_cast<Eigen::Index>(i)) = a.value().row(static_cast<Eigen::Index>(i));
  }
  return tape.record(std::move(out), tape.requires_grad(ia) || tape.requires_grad(ib),
                     [ia, ib, mask = std::move(mask)](Tape<T>& t, const Matrix<T>& g) {
                       Matrix<T> ga = g, gb = g;
                       for (std::size_t i = 0; i < mask.size(); ++i) {
                         (mask[i] ? gb : ga).row(static_cast<Eigen::Index>(i)).setZero();
                       }
                       t.accumulate(ia, ga);
                       t.accumulate(ib, gb);
                     });
}

/// Row-wise softmax of a plain matrix, max-shifted.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T peak = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Mean over rows of -log softmax(logits)[target].
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::vector<int> targets) {
  detail::check(static_cast<Eigen::Index>(targets.size()) == logits.rows() && logits.rows() > 0,
                "softmax_cross_entropy: one target per row");
  auto& tape = logits.tape();
  const auto il = logits.id();
  const auto& z = logits.value();
  T total = T(0);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int k = targets[static_cast<std::size_t>(r)];
    if (k < 0 || k >= z.cols()) throw Error(ErrorKind::IndexOutOfRange, "cross entropy target " + std::to_string(k));
    const T peak = z.row(r).maxCoeff();
    const T lse = peak + std::log((z.row(r).array() - peak).exp().sum());
    total += lse - z(r, k);
  }
  Matrix<T> out(1, 1);
  out(0, 0) = total / static_cast<T>(z.rows());
  return tape.record(std::move(out), tape.requires_grad(il),
                     [il, targets = std::move(targets)](Tape<T>& t, const Matrix<T>& g) {
                       Matrix<T> d = softmax_rows<T>(t.value(il));
                       for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, targets[static_cast<std::size_t>(r)]) -= T(1);
                       t.accumulate(il, d * (g(0, 0) / static_cast<T>(d.rows())));
                     });
}

/// Mean of |pred - target| over an n x 1 column. The subgradient at zero is 0.
template <typename T>
Var<T> mean_absolute_error(const Var<T>& pred, std::vector<T> target) {
  detail::check(pred.cols() == 1 && static_cast<Eigen::Index>(target.size()) == pred.rows() && pred.rows() > 0,
                "mean_absolute_error: n x 1 prediction and n targets");
  auto& tape = pred.tape();
  const auto ip = pred.id();
  T total = T(0);
  for (Eigen::Index r = 0; r < pred.rows(); ++r) total += std::abs(pred.value()(r, 0) - target[static_cast<std::size_t>(r)]);
  Matrix<T> out(1, 1);
  out(0, 0) = total / static_cast<T>(pred.rows());
  return tape.record(std::move(out), tape.requires_grad(ip),
                     [ip, target = std::move(target)](Tape<T>& t, const Matrix<T>& g) {
                       const auto& p = t.value(ip);
                       Matrix<T> d(p.rows(), 1);
                       const T step = g(0, 0) / static_cast<T>(p.rows());
                       for (Eigen::Index r = 0; r < p.rows(); ++r) {
                         const T diff = p(r, 0) - target[static_cast<std::size_t>(r)];
                         d(r, 0) = diff > T(0) ? step : (diff < T(0) ? -step : T(0));
                       }
                       t.accumulate(ip, d);
                     });
}

}  // namespace ocpm::ag
