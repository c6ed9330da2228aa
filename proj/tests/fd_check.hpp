#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "so3vae/autodiff.hpp"
#include "so3vae/experiment.hpp"
#include "so3vae/rng.hpp"
#include "so3vae/so3.hpp"

namespace fdcheck {

namespace ad = so3vae::ad;
using ad::Matrix;
using ad::Tape;
using ad::Var;

// Builds a scalar from leaf variables on a fresh tape.
using Graph = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double evaluate(const Graph& f, const std::vector<Matrix>& xs) {
  Tape t;
  std::vector<Var> vs;
  for (const auto& x : xs) vs.push_back(t.variable(x));
  return f(t, vs).scalar();
}

struct Result {
  double rel_error = 0.0;
  double max_abs = 0.0;
};

// Relative error ||g - g_fd|| / max(||g_fd||, floor) between the tape gradient
// and the central difference with step h, over all entries of all inputs.
inline Result check(const Graph& f, std::vector<Matrix> xs, double h = 1e-5, double floor = 1e-8) {
  Tape t;
  std::vector<Var> vs;
  for (const auto& x : xs) vs.push_back(t.variable(x));
  const auto g = ad::grad(t, f(t, vs), vs);

  double num = 0.0, den = 0.0, mx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    for (Eigen::Index i = 0; i < xs[k].size(); ++i) {
      const double x0 = xs[k].data()[i];
      xs[k].data()[i] = x0 + h;
      const double fp = evaluate(f, xs);
      xs[k].data()[i] = x0 - h;
      const double fm = evaluate(f, xs);
      xs[k].data()[i] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double d = g[k].data()[i] - fd;
      num += d * d;
      den += fd * fd;
      mx = std::max(mx, std::abs(d));
    }
  }
  return {std::sqrt(num) / std::max(std::sqrt(den), floor), mx};
}

using so3vae::Rng;

inline Matrix randm(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Contract a matrix-valued op with fixed random weights to get a scalar.
inline Var contract(Tape& t, const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(y, t.constant(randm(rng, y.rows(), y.cols()))));
}

struct Case {
  const char* name;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  double lo, hi;
  Graph f;
};

inline std::vector<Case> primitive_cases() {
  using G = Graph;
  auto c1 = [](auto op) -> G { return [op](Tape& t, const std::vector<Var>& v) { return contract(t, op(v[0]), 1); }; };
  auto c2 = [](auto op) -> G {
    return [op](Tape& t, const std::vector<Var>& v) { return contract(t, op(v[0], v[1]), 2); };
  };
  return {
      {"add", {{4, 3}, {4, 3}}, -1, 1, c2([](Var a, Var b) { return ad::add(a, b); })},
      {"sub", {{4, 3}, {4, 3}}, -1, 1, c2([](Var a, Var b) { return ad::sub(a, b); })},
      {"mul", {{4, 3}, {4, 3}}, -1, 1, c2([](Var a, Var b) { return ad::mul(a, b); })},
      {"matmul", {{4, 3}, {3, 5}}, -1, 1, c2([](Var a, Var b) { return ad::matmul(a, b); })},
      {"matvec", {{4, 3}, {3, 1}}, -1, 1, c2([](Var a, Var b) { return ad::matvec(a, b); })},
      {"add_rowwise", {{4, 3}, {1, 3}}, -1, 1, c2([](Var a, Var b) { return ad::add_rowwise(a, b); })},
      {"dot", {{4, 3}, {4, 3}}, -1, 1, c2([](Var a, Var b) { return ad::dot(a, b); })},
      {"cross", {{4, 3}, {4, 3}}, -1, 1, c2([](Var a, Var b) { return ad::cross(a, b); })},
      {"concat_cols", {{4, 3}, {4, 2}}, -1, 1, c2([](Var a, Var b) { return ad::concat_cols(a, b); })},
      {"mse", {{4, 3}, {4, 3}}, -1, 1,
       [](Tape&, const std::vector<Var>& v) { return ad::mse(v[0], v[1]); }},
      {"scale", {{4, 3}}, -1, 1, c1([](Var a) { return ad::scale(a, -2.5); })},
      {"neg", {{4, 3}}, -1, 1, c1([](Var a) { return ad::neg(a); })},
      {"add_scalar", {{4, 3}}, -1, 1, c1([](Var a) { return ad::add_scalar(a, 0.7); })},
      {"sum", {{4, 3}}, -1, 1, [](Tape&, const std::vector<Var>& v) { return ad::scale(ad::sum(v[0]), 1.3); }},
      {"mean", {{4, 3}}, -1, 1, [](Tape&, const std::vector<Var>& v) { return ad::mean(ad::square(v[0])); }},
      {"row_sum", {{4, 3}}, -1, 1, c1([](Var a) { return ad::row_sum(a); })},
      {"exp", {{4, 3}}, -1, 1, c1([](Var a) { return ad::exp(a); })},
      {"log", {{4, 3}}, 0.2, 3, c1([](Var a) { return ad::log(a); })},
      {"sin", {{4, 3}}, -3, 3, c1([](Var a) { return ad::sin(a); })},
      {"cos", {{4, 3}}, -3, 3, c1([](Var a) { return ad::cos(a); })},
      {"sqrt", {{4, 3}}, 0.2, 3, c1([](Var a) { return ad::sqrt(a); })},
      {"square", {{4, 3}}, -2, 2, c1([](Var a) { return ad::square(a); })},
      {"tanh", {{4, 3}}, -2, 2, c1([](Var a) { return ad::tanh(a); })},
      {"softplus", {{4, 3}}, -4, 4, c1([](Var a) { return ad::softplus(a); })},
      {"clamp", {{4, 3}}, -2, 2, c1([](Var a) { return ad::clamp(a, -0.999, 0.999); })},
      {"norm", {{4, 3}}, -1, 1, c1([](Var a) { return ad::norm(a); })},
      {"normalize", {{4, 3}}, -1, 1, c1([](Var a) { return ad::normalize(a); })},
      {"logsumexp", {{4, 5}}, -3, 3, c1([](Var a) { return ad::logsumexp(a); })},
      {"slice_cols", {{4, 5}}, -1, 1, c1([](Var a) { return ad::slice_cols(a, 1, 3); })},
      {"rowwise_exp_map", {{4, 3}}, -2, 2, c1([](Var a) {
         return ad::rowwise<3, 9>(a, [](const auto& v) {
           using T = typename std::decay_t<decltype(v)>::Scalar;
           const so3vae::Mat3<T> r = so3vae::exp_map<T>(so3vae::Vec3<T>(v(0), v(1), v(2)));
           return Eigen::Matrix<T, 9, 1>(Eigen::Map<const Eigen::Matrix<T, 9, 1>>(r.data()));
         });
       })},
  };
}

inline std::vector<so3vae::DataPoint> data_for_probe(const so3vae::ExperimentConfig& cfg) {
  Rng rng(3);
  return so3vae::make_toy_dataset(cfg.rep_spec(), cfg.content_seed, 6, rng);
}

inline Matrix stack_x(const std::vector<so3vae::DataPoint>& d) {
  Matrix x(static_cast<Eigen::Index>(d.size()), d.front().x.size());
  for (std::size_t i = 0; i < d.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = d[i].x.transpose();
  return x;
}

inline Matrix normals(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Gradient of the batch loss w.r.t. every parameter vs central differences at
// randomly chosen coordinates.
inline double probe_loss_gradient(const so3vae::ExperimentConfig& cfg, int n_probes, std::uint64_t seed) {
  so3vae::Model m = so3vae::init_model(cfg);
  const auto data = data_for_probe(cfg);
  const Matrix x = stack_x(data);
  Rng rng(seed);
  const Matrix eps = normals(rng, x.rows(), 3);
  const so3vae::HarmonicRepresentation harm(cfg.rep_max_degree);

  auto loss_at = [&](const so3vae::Model& mm) {
    Tape t;
    const so3vae::ModelVars mv = so3vae::place(t, mm);
    return so3vae::batch_loss(mm, mv, x, eps, harm).loss.scalar();
  };
  Tape t;
  const so3vae::ModelVars mv = so3vae::place(t, m);
  const auto g = ad::grad(t, so3vae::batch_loss(m, mv, x, eps, harm).loss, mv.all());

  auto params = m.parameters();
  double num = 0.0, den = 0.0;
  const double h = 1e-5;
  for (int p = 0; p < n_probes; ++p) {
    const auto k = static_cast<std::size_t>(rng.engine()() % params.size());
    const auto i = static_cast<Eigen::Index>(rng.engine()() % static_cast<std::uint64_t>(params[k]->size()));
    const double x0 = params[k]->data()[i];
    params[k]->data()[i] = x0 + h;
    const double fp = loss_at(m);
    params[k]->data()[i] = x0 - h;
    const double fm = loss_at(m);
    params[k]->data()[i] = x0;
    const double fd = (fp - fm) / (2 * h);
    num += std::pow(g[k].data()[i] - fd, 2);
    den += fd * fd;
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

}  // namespace fdcheck
