#pragma once

#include <Eigen/Dense>
#include <ceres/jet.h>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace so3vae::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of array-valued operations. Node ids follow creation order,
/// which is a topological order; backward visits them in reverse, once each.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::string op;
    std::function<void(Tape&)> backward;
  };

  Var variable(Matrix value) { return push(std::move(value), true, "leaf", {}); }
  Var constant(Matrix value) { return push(std::move(value), false, "const", {}); }

  Var push(Matrix value, bool requires_grad, std::string op, std::function<void(Tape&)> backward) {
    nodes_.push_back({std::move(value), Matrix(), requires_grad, std::move(op), std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  Node& node(std::size_t id) { return nodes_.at(id); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  /// Adds `g` into the gradient accumulator of `v` if it is tracked.
  void accumulate(const Var& v, const Matrix& g) {
    Node& n = nodes_.at(v.id());
    if (!n.requires_grad) return;
    n.grad += g;
  }

  /// Reverse sweep from a 1x1 output. Every tracked node ends with a gradient
  /// (zero when it does not influence the output).
  void backward(const Var& out) {
    if (out.tape() != this) throw std::invalid_argument("backward: variable from another tape");
    const Node& o = nodes_.at(out.id());
    if (o.value.rows() != 1 || o.value.cols() != 1) {
      throw std::invalid_argument("backward: output must be a scalar");
    }
    for (auto& n : nodes_) {
      if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    if (!o.requires_grad) return;
    nodes_[out.id()].grad(0, 0) = 1.0;
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      if (nodes_[i].requires_grad && nodes_[i].backward) nodes_[i].backward(*this);
    }
  }

 private:
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->node(id_).value; }
inline const Matrix& Var::grad() const { return tape_->node(id_).grad; }

/// Runs the reverse sweep and returns the gradients of `leaves`.
inline std::vector<Matrix> grad(Tape& tape, const Var& out, const std::vector<Var>& leaves) {
  tape.backward(out);
  std::vector<Matrix> g;
  g.reserve(leaves.size());
  for (const auto& l : leaves) {
    g.push_back(tape.requires_grad(l) ? l.grad() : Matrix::Zero(l.rows(), l.cols()));
  }
  return g;
}

namespace detail {

inline void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

inline bool any_grad(std::initializer_list<Var> vs) {
  for (const auto& v : vs)
    if (v.tape()->requires_grad(v)) return true;
  return false;
}

// Elementwise unary op given value and derivative functors.
template <typename F, typename DF>
Var unary(const Var& a, const char* op, F f, DF df) {
  Tape& t = *a.tape();
  Matrix y = a.value().unaryExpr(f);
  const bool rg = t.requires_grad(a);
  Var out = t.push(std::move(y), rg, op, {});
  if (rg) {
    t.node(out.id()).backward = [a, out, df](Tape& tp) {
      const Matrix d = a.value().binaryExpr(out.value(), df);
      tp.accumulate(a, out.grad().cwiseProduct(d));
    };
  }
  return out;
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  detail::same_shape(a, b, "add");
  Tape& t = *a.tape();
  Var out = t.push(a.value() + b.value(), detail::any_grad({a, b}), "add", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    tp.accumulate(a, out.grad());
    tp.accumulate(b, out.grad());
  };
  return out;
}

inline Var sub(const Var& a, const Var& b) {
  detail::same_shape(a, b, "sub");
  Tape& t = *a.tape();
  Var out = t.push(a.value() - b.value(), detail::any_grad({a, b}), "sub", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    tp.accumulate(a, out.grad());
    tp.accumulate(b, -out.grad());
  };
  return out;
}

/// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
  detail::same_shape(a, b, "mul");
  Tape& t = *a.tape();
  Var out = t.push(a.value().cwiseProduct(b.value()), detail::any_grad({a, b}), "mul", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    tp.accumulate(a, out.grad().cwiseProduct(b.value()));
    tp.accumulate(b, out.grad().cwiseProduct(a.value()));
  };
  return out;
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  Var out = t.push(s * a.value(), t.requires_grad(a), "scale", {});
  t.node(out.id()).backward = [a, out, s](Tape& tp) { tp.accumulate(a, s * out.grad()); };
  return out;
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

inline Var add_scalar(const Var& a, double s) {
  Tape& t = *a.tape();
  Var out = t.push((a.value().array() + s).matrix(), t.requires_grad(a), "add_scalar", {});
  t.node(out.id()).backward = [a, out](Tape& tp) { tp.accumulate(a, out.grad()); };
  return out;
}

/// a (n x m) + b (1 x m) broadcast over rows.
inline Var add_rowwise(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw std::invalid_argument("add_rowwise: shape mismatch");
  Tape& t = *a.tape();
  Matrix y = a.value().rowwise() + b.value().row(0);
  Var out = t.push(std::move(y), detail::any_grad({a, b}), "add_rowwise", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    tp.accumulate(a, out.grad());
    tp.accumulate(b, out.grad().colwise().sum());
  };
  return out;
}

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Tape& t = *a.tape();
  Var out = t.push(a.value() * b.value(), detail::any_grad({a, b}), "matmul", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    if (tp.requires_grad(a)) tp.accumulate(a, out.grad() * b.value().transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, a.value().transpose() * out.grad());
  };
  return out;
}

/// Matrix (n x m) times column vector (m x 1).
inline Var matvec(const Var& a, const Var& x) {
  if (x.cols() != 1) throw std::invalid_argument("matvec: second argument must be a column vector");
  return matmul(a, x);
}

inline Var sum(const Var& a) {
  Tape& t = *a.tape();
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  Var out = t.push(std::move(y), t.requires_grad(a), "sum", {});
  t.node(out.id()).backward = [a, out](Tape& tp) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), out.grad()(0, 0)));
  };
  return out;
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Per-row sums, n x 1.
inline Var row_sum(const Var& a) {
  Tape& t = *a.tape();
  Var out = t.push(a.value().rowwise().sum(), t.requires_grad(a), "row_sum", {});
  t.node(out.id()).backward = [a, out](Tape& tp) {
    tp.accumulate(a, out.grad() * Matrix::Ones(1, a.cols()));
  };
  return out;
}

inline Var exp(const Var& a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(const Var& a) {
  return detail::unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var sin(const Var& a) {
  return detail::unary(a, "sin", [](double x) { return std::sin(x); },
                       [](double x, double) { return std::cos(x); });
}

inline Var cos(const Var& a) {
  return detail::unary(a, "cos", [](double x) { return std::cos(x); },
                       [](double x, double) { return -std::sin(x); });
}

inline Var sqrt(const Var& a) {
  return detail::unary(a, "sqrt", [](double x) { return std::sqrt(x); },
                       [](double, double y) { return 0.5 / y; });
}

inline Var square(const Var& a) {
  return detail::unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var tanh(const Var& a) {
  return detail::unary(a, "tanh", [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

/// log(1 + e^x), evaluated without overflow.
inline Var softplus(const Var& a) {
  return detail::unary(
      a, "softplus", [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

/// Clamp into [lo, hi]; gradient passes inside the interval, zero outside.
inline Var clamp(const Var& a, double lo, double hi) {
  return detail::unary(
      a, "clamp", [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

/// Row-wise dot product, n x 1.
inline Var dot(const Var& a, const Var& b) {
  detail::same_shape(a, b, "dot");
  Tape& t = *a.tape();
  Var out = t.push(a.value().cwiseProduct(b.value()).rowwise().sum(), detail::any_grad({a, b}), "dot", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    const Matrix g = out.grad() * Matrix::Ones(1, a.cols());
    tp.accumulate(a, g.cwiseProduct(b.value()));
    tp.accumulate(b, g.cwiseProduct(a.value()));
  };
  return out;
}

/// Row-wise Euclidean norm, n x 1.
inline Var norm(const Var& a) {
  Tape& t = *a.tape();
  Var out = t.push(a.value().rowwise().norm(), t.requires_grad(a), "norm", {});
  t.node(out.id()).backward = [a, out](Tape& tp) {
    Matrix g = a.value();
    for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) *= out.grad()(i, 0) / out.value()(i, 0);
    tp.accumulate(a, g);
  };
  return out;
}

/// Row-wise x / |x|.
inline Var normalize(const Var& a) {
  Tape& t = *a.tape();
  Matrix y = a.value().rowwise().normalized();
  Var out = t.push(std::move(y), t.requires_grad(a), "normalize", {});
  t.node(out.id()).backward = [a, out](Tape& tp) {
    const Matrix& y = out.value();
    const Matrix& gy = out.grad();
    Matrix g(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double n = a.value().row(i).norm();
      g.row(i) = (gy.row(i) - gy.row(i).dot(y.row(i)) * y.row(i)) / n;
    }
    tp.accumulate(a, g);
  };
  return out;
}

/// Row-wise cross product of n x 3 arrays.
inline Var cross(const Var& a, const Var& b) {
  detail::same_shape(a, b, "cross");
  if (a.cols() != 3) throw std::invalid_argument("cross: expected 3 columns");
  Tape& t = *a.tape();
  Matrix y(a.rows(), 3);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const Eigen::Vector3d u = a.value().row(i).transpose();
    const Eigen::Vector3d v = b.value().row(i).transpose();
    y.row(i) = u.cross(v).transpose();
  }
  Var out = t.push(std::move(y), detail::any_grad({a, b}), "cross", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    Matrix ga(a.rows(), 3), gb(a.rows(), 3);
    for (Eigen::Index i = 0; i < ga.rows(); ++i) {
      const Eigen::Vector3d u = a.value().row(i).transpose();
      const Eigen::Vector3d v = b.value().row(i).transpose();
      const Eigen::Vector3d g = out.grad().row(i).transpose();
      // d(u x v) = du x v + u x dv  =>  grad_u = v x g, grad_v = g x u
      ga.row(i) = v.cross(g).transpose();
      gb.row(i) = g.cross(u).transpose();
    }
    tp.accumulate(a, ga);
    tp.accumulate(b, gb);
  };
  return out;
}

/// Row-wise log(sum(exp(x))), n x 1; shifted by the row max.
inline Var logsumexp(const Var& a) {
  Tape& t = *a.tape();
  Matrix y(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    y(i, 0) = m + std::log((a.value().row(i).array() - m).exp().sum());
  }
  Var out = t.push(std::move(y), t.requires_grad(a), "logsumexp", {});
  t.node(out.id()).backward = [a, out](Tape& tp) {
    Matrix g(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      g.row(i) = (a.value().row(i).array() - out.value()(i, 0)).exp().matrix() * out.grad()(i, 0);
    }
    tp.accumulate(a, g);
  };
  return out;
}

/// Mean over all entries of (a - b)^2.
inline Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

inline Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Tape& t = *a.tape();
  Matrix y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  Var out = t.push(std::move(y), detail::any_grad({a, b}), "concat_cols", {});
  t.node(out.id()).backward = [a, b, out](Tape& tp) {
    tp.accumulate(a, out.grad().leftCols(a.cols()));
    tp.accumulate(b, out.grad().rightCols(b.cols()));
  };
  return out;
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  Tape& t = *a.tape();
  Var out = t.push(a.value().middleCols(start, count), t.requires_grad(a), "slice_cols", {});
  t.node(out.id()).backward = [a, out, start, count](Tape& tp) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    g.middleCols(start, count) = out.grad();
    tp.accumulate(a, g);
  };
  return out;
}

template <int N>
using Jet = ceres::Jet<double, N>;

/// Applies a fixed-size function to every row of `x` (n x In -> n x Out).
/// The local Jacobian of each row is obtained by forward-mode evaluation
/// with dual numbers, so `f` must be generic over its scalar type.
template <int In, int Out, typename F>
Var rowwise(const Var& x, F f, const char* op = "rowwise") {
  if (x.cols() != In) throw std::invalid_argument(std::string(op) + ": column count mismatch");
  Tape& t = *x.tape();
  using J = Jet<In>;
  const Eigen::Index n = x.rows();
  Matrix y(n, Out);
  auto jac = std::make_shared<std::vector<Eigen::Matrix<double, Out, In>>>(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Matrix<J, In, 1> in;
    for (int k = 0; k < In; ++k) in(k) = J(x.value()(i, k), k);
    const Eigen::Matrix<J, Out, 1> o = f(in);
    for (int r = 0; r < Out; ++r) {
      y(i, r) = o(r).a;
      (*jac)[static_cast<std::size_t>(i)].row(r) = o(r).v.transpose();
    }
  }
  Var out = t.push(std::move(y), t.requires_grad(x), op, {});
  t.node(out.id()).backward = [x, out, jac](Tape& tp) {
    Matrix g(x.rows(), In);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      g.row(i) = out.grad().row(i) * (*jac)[static_cast<std::size_t>(i)];
    }
    tp.accumulate(x, g);
  };
  return out;
}

/// Adam optimizer state, one moment pair per parameter array.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected adaptive-moment update, in place.
inline void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads, AdamState& state,
                      const AdamOptions& opt = {}) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params/grads size mismatch");
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * grads[i];
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * grads[i].cwiseAbs2();
    const Matrix mhat = state.m[i] / c1;
    const Matrix vhat = state.v[i] / c2;
    *params[i] -= (opt.lr * mhat.array() / (vhat.array().sqrt() + opt.eps)).matrix();
  }
}

}  // namespace so3vae::ad
