#pragma once

// Define-by-run reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every primitive in creation order, which is already a
// topological order, so backward() is a single reverse sweep. Rows are batch
// samples throughout. Leaves are either constants (no gradient) or segments of
// the one watched ParameterVector; backward() returns d(output)/d(watched) in
// the watched layout.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/numeric/parameter_vector.hpp"

namespace nct {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Row-major view of one parameter segment as a matrix (vectors become 1 x n).
inline ConstMatrixMap segment_matrix(const ParameterVector& p, std::size_t seg) {
  const auto& s = p.layout().at(seg);
  return ConstMatrixMap(p.segment(seg).data(), static_cast<Eigen::Index>(s.rows()),
                        static_cast<Eigen::Index>(s.cols()));
}

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  /// `watched` must outlive the tape.
  explicit Tape(const ParameterVector& watched) : watched_(&watched) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  bool watching() const { return watched_ != nullptr; }

  Var constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, -1, nullptr});
    return Var(this, nodes_.size() - 1);
  }

  /// Leaf bound to segment `seg` of the watched parameter vector.
  Var parameter(std::size_t seg) {
    if (!watched_) throw UsageError("tape has no watched parameter vector");
    Matrix value = segment_matrix(*watched_, seg);
    nodes_.push_back(Node{std::move(value), {}, true, false,
                          static_cast<long>(seg), nullptr});
    return Var(this, nodes_.size() - 1);
  }

  /// Stop-gradient: same value, no path back to the input.
  Var detach(Var v) {
    check_owned(v);
    return constant(node(v).value);
  }

  Var record(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
    bool req = false;
    for (const Var& in : inputs) {
      check_owned(in);
      req = req || node(in).requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, req, false, -1,
                          req ? std::move(fn) : Backward{}});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(Var v) const { return node(v).value; }
  /// Id the next recorded node will get. Ops whose backward needs their own
  /// output capture it and read the value back with value_at().
  std::size_t next_id() const { return nodes_.size(); }
  const Matrix& value_at(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  void accumulate(Var v, const Matrix& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep seeded with `output_grad`. May be called repeatedly for
  /// different outputs of the same tape; gradients are reset each call.
  ParameterVector backward(Var output, const Matrix& output_grad) {
    if (nodes_.empty() || !output.valid() || output.tape() != this ||
        output.id() >= nodes_.size()) {
      throw UsageError("backward called before a forward pass was recorded");
    }
    if (!watched_) throw UsageError("tape has no watched parameter vector");
    const Node& out = node(output);
    if (out.value.rows() != output_grad.rows() ||
        out.value.cols() != output_grad.cols()) {
      throw UsageError("output gradient shape does not match output value");
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
    ParameterVector grads = watched_->zeros_like();
    accumulate(output, output_grad);
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) {
        n.backward(*this, n.grad);
      } else if (n.param_segment >= 0) {
        auto seg = grads.segment(static_cast<std::size_t>(n.param_segment));
        const double* g = n.grad.data();
        for (std::size_t k = 0; k < seg.size(); ++k) seg[k] += g[k];
      }
    }
    return grads;
  }

  ParameterVector backward(Var scalar) {
    if (scalar.valid() && scalar.tape() == this && scalar.id() < nodes_.size() &&
        node(scalar).value.size() != 1) {
      throw UsageError("backward(Var) needs a scalar output");
    }
    return backward(scalar, Matrix::Ones(1, 1));
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    bool has_grad;
    long param_segment;
    Backward backward;
  };

  void check_owned(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
      throw UsageError("variable does not belong to this tape");
    }
  }
  Node& node(Var v) { return nodes_[v.id()]; }
  const Node& node(Var v) const { return nodes_[v.id()]; }

  std::deque<Node> nodes_;
  const ParameterVector* watched_ = nullptr;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

namespace ad {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch (" +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()) + ")");
  }
}

/// x * W^T + b with x: B x in, W: out x in, b: 1 x out.
template <typename X, typename W, typename B>
Matrix affine_value(const X& x, const W& w, const B& b) {
  Matrix out = x * w.transpose();
  out.rowwise() += b.row(0);
  return out;
}

inline Var affine(Var x, Var w, Var b) {
  if (x.cols() != w.cols() || b.cols() != w.rows() || b.rows() != 1) {
    throw ConfigError("affine: dimension mismatch");
  }
  Tape& t = *x.tape();
  return t.record(affine_value(x.value(), w.value(), b.value()), {x, w, b},
                  [x, w, b](Tape& t, const Matrix& g) {
                    if (t.requires_grad(x)) t.accumulate(x, g * t.value(w));
                    if (t.requires_grad(w)) t.accumulate(w, g.transpose() * t.value(x));
                    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
                  });
}

inline Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g) {
                            t.accumulate(a, g);
                            t.accumulate(b, g);
                          });
}

inline Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b},
                          [a, b](Tape& t, const Matrix& g) {
                            t.accumulate(a, g);
                            if (t.requires_grad(b)) t.accumulate(b, -g);
                          });
}

inline Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape& t, const Matrix& g) {
                            if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
                            if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
                          });
}

inline Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a},
                          [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

inline Var add_scalar(Var a, double s) {
  return a.tape()->record((a.value().array() + s).matrix(), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

inline Var square(Var a) {
  return a.tape()->record(a.value().cwiseAbs2(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, 2.0 * g.cwiseProduct(t.value(a)));
  });
}

inline Var tanh(Var a) {
  Tape& tp = *a.tape();
  const std::size_t self = tp.next_id();
  return tp.record(a.value().array().tanh().matrix(), {a},
                   [a, self](Tape& t, const Matrix& g) {
                     const Matrix& y = t.value_at(self);
                     t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
                   });
}

/// log(1 + e^x), evaluated without overflow.
inline double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Vectorized softplus; the plain and taped forward passes both use it so
/// their outputs agree bitwise.
inline Matrix softplus_matrix(const Matrix& x) {
  return (x.array().max(0.0) + (1.0 + (-x.array().abs()).exp()).log()).matrix();
}

inline Var softplus(Var a) {
  Tape& tp = *a.tape();
  const std::size_t self = tp.next_id();
  return tp.record(softplus_matrix(a.value()), {a}, [a, self](Tape& t, const Matrix& g) {
    // sigmoid(x) = exp(x - softplus(x))
    t.accumulate(a, (g.array() * (t.value(a).array() - t.value_at(self).array()).exp()).matrix());
  });
}

inline Var exp(Var a) {
  Tape& tp = *a.tape();
  const std::size_t self = tp.next_id();
  return tp.record(a.value().array().exp().matrix(), {a},
                   [a, self](Tape& t, const Matrix& g) {
                     t.accumulate(a, g.cwiseProduct(t.value_at(self)));
                   });
}

inline Var sqrt(Var a) {
  Tape& tp = *a.tape();
  const std::size_t self = tp.next_id();
  return tp.record(a.value().cwiseSqrt(), {a}, [a, self](Tape& t, const Matrix& g) {
    t.accumulate(a, (0.5 * g.array() / t.value_at(self).array()).matrix());
  });
}

/// Per-row sum: B x d -> B x 1.
inline Var row_sum(Var a) {
  return a.tape()->record(a.value().rowwise().sum(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.replicate(1, t.value(a).cols()));
  });
}

inline Var sum(Var a) {
  Matrix s(1, 1);
  s(0, 0) = a.value().sum();
  return a.tape()->record(std::move(s), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix& v = t.value(a);
    t.accumulate(a, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ConfigError("mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

/// [a | b] along columns; row counts must agree.
inline Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ConfigError("concat_cols: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(ca));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(cb));
  });
}

/// Row r of the result is row idx[r] of `a`; backward scatter-adds.
inline Var gather_rows(Var a, std::vector<Eigen::Index> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= a.rows()) throw IndexError("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  }
  return a.tape()->record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    t.accumulate(a, ga);
  });
}

/// Squared Euclidean distances between every row of a (R x d) and b (S x d).
inline Var pairwise_sqdist(Var a, Var b) {
  if (a.cols() != b.cols()) throw ConfigError("pairwise_sqdist: dimension mismatch");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix d(av.rows(), bv.rows());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    for (Eigen::Index j = 0; j < bv.rows(); ++j) {
      d(i, j) = (av.row(i) - bv.row(j)).squaredNorm();
    }
  }
  return a.tape()->record(std::move(d), {a, b}, [a, b](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    // sum_j g_ij * 2 (a_i - b_j) = 2 (rowsum(g)_i a_i - (g b)_i)
    if (t.requires_grad(a)) {
      Matrix ga = 2.0 * (g.rowwise().sum().asDiagonal() * av - g * bv);
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      Matrix gb = 2.0 * (g.colwise().sum().transpose().asDiagonal() * bv - g.transpose() * av);
      t.accumulate(b, gb);
    }
  });
}

}  // namespace ad
}  // namespace nct
