#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "so3vae/autodiff.hpp"
#include "so3vae/config.hpp"
#include "so3vae/contmetric.hpp"
#include "so3vae/mean_maps.hpp"
#include "so3vae/so3.hpp"
#include "so3vae/so3_gauss.hpp"
#include "so3vae/wigner.hpp"

namespace so3vae {

inline constexpr double kSigmaFloor = 1e-4;
/// Posterior scale produced by a freshly initialized encoder.
inline constexpr double kSigmaInit = 0.01;

/// Trainable state: MLP encoder weights and the decoder's content vector.
struct Model {
  ExperimentConfig cfg;
  std::vector<ad::Matrix> weights;  // in x out
  std::vector<ad::Matrix> biases;   // 1 x out
  ad::Matrix content;               // 1 x total_dim

  int out_dim() const { return cfg.head_dim() + (cfg.variational() ? 3 : 0); }

  std::vector<ad::Matrix*> parameters() {
    std::vector<ad::Matrix*> p;
    for (auto& w : weights) p.push_back(&w);
    for (auto& b : biases) p.push_back(&b);
    p.push_back(&content);
    return p;
  }
};

inline Model init_model(const ExperimentConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  Rng rng(cfg.seed);
  const int in_dim = cfg.rep_spec().total_dim();
  std::vector<int> dims{in_dim};
  for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.hidden_width);
  dims.push_back(m.out_dim());
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    ad::Matrix w(dims[i], dims[i + 1]);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = scale * rng.normal();
    m.weights.push_back(std::move(w));
    m.biases.push_back(ad::Matrix::Zero(1, dims[i + 1]));
  }
  if (cfg.variational()) {
    m.biases.back().rightCols(3).setConstant(std::log(std::expm1(kSigmaInit - kSigmaFloor)));
  }
  m.content.resize(1, in_dim);
  for (Eigen::Index k = 0; k < m.content.size(); ++k) m.content.data()[k] = rng.normal();
  return m;
}

inline nlohmann::json model_to_json(const Model& m) {
  auto mat = [](const ad::Matrix& a) {
    nlohmann::json j = {{"rows", a.rows()}, {"cols", a.cols()}, {"data", nlohmann::json::array()}};
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) j["data"].push_back(a(r, c));
    return j;
  };
  nlohmann::json j;
  j["config"] = to_json(m.cfg);
  j["config"].erase("out_dir");  // where a model lives is not part of it
  for (const auto& w : m.weights) j["weights"].push_back(mat(w));
  for (const auto& b : m.biases) j["biases"].push_back(mat(b));
  j["content"] = mat(m.content);
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  auto mat = [](const nlohmann::json& x) {
    ad::Matrix a(x.at("rows").get<Eigen::Index>(), x.at("cols").get<Eigen::Index>());
    const auto& d = x.at("data");
    if (static_cast<Eigen::Index>(d.size()) != a.size()) throw std::runtime_error("model file: matrix size mismatch");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = d[k++].get<double>();
    return a;
  };
  Model m;
  m.cfg = config_from_json(j.at("config"));
  for (const auto& w : j.at("weights")) m.weights.push_back(mat(w));
  for (const auto& b : j.at("biases")) m.biases.push_back(mat(b));
  m.content = mat(j.at("content"));
  return m;
}

namespace detail {

template <typename T>
Eigen::Matrix<T, 9, 1> flat9(const Mat3<T>& r) {
  Eigen::Matrix<T, 9, 1> o;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) o(3 * i + j) = r(i, j);
  return o;
}

template <typename T>
Mat3<T> mat9(const T* p) {
  Mat3<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = p[3 * i + j];
  return r;
}

template <int D>
ad::Var head_rows(const ad::Var& raw, HeadKind kind) {
  return ad::rowwise<D, 9>(
      raw,
      [kind](const auto& x) {
        using T = typename std::decay_t<decltype(x)>::Scalar;
        return flat9<T>(apply_head<T>(kind, std::span<const T>(x.data(), D)));
      },
      "mean_head");
}

}  // namespace detail

/// Mean head on the tape: n x head_dim -> n x 9 (row-major rotations).
inline ad::Var mean_head(const ad::Var& raw, HeadKind kind) {
  switch (kind) {
    case HeadKind::Algebra: return detail::head_rows<3>(raw, kind);
    case HeadKind::Quaternion: return detail::head_rows<4>(raw, kind);
    case HeadKind::S2S1: return detail::head_rows<5>(raw, kind);
    case HeadKind::S2S2: return detail::head_rows<6>(raw, kind);
  }
  throw std::logic_error("mean_head: unreachable");
}

/// ZYZ Euler angles on the tape: n x 3 -> n x 9.
inline ad::Var euler_rows(const ad::Var& angles) {
  return ad::rowwise<3, 9>(
      angles,
      [](const auto& z) {
        using T = typename std::decay_t<decltype(z)>::Scalar;
        return detail::flat9<T>(euler_zyz_matrix<T>(z(0), z(1), z(2)));
      },
      "euler_zyz");
}

/// R_mu exp(v) on the tape: (n x 9, n x 3) -> n x 9.
inline ad::Var shifted_exp_rows(const ad::Var& r_mu, const ad::Var& v) {
  return ad::rowwise<12, 9>(
      ad::concat_cols(r_mu, v),
      [](const auto& in) {
        using T = typename std::decay_t<decltype(in)>::Scalar;
        const Mat3<T> mu = detail::mat9<T>(in.data());
        const Vec3<T> w(in(9), in(10), in(11));
        return detail::flat9<T>(Mat3<T>(mu * exp_map<T>(w)));
      },
      "shifted_exp");
}

/// Per-row log qhat(exp(v) | sigma) from (n x 3, n x 3) -> n x 1.
inline ad::Var log_density_rows(const ad::Var& v, const ad::Var& sigma, int k_max) {
  return ad::rowwise<6, 1>(
      ad::concat_cols(v, sigma),
      [k_max](const auto& in) {
        using T = typename std::decay_t<decltype(in)>::Scalar;
        Eigen::Matrix<T, 1, 1> o;
        o(0) = log_pushforward_density<T>(Vec3<T>(in(0), in(1), in(2)), Vec3<T>(in(3), in(4), in(5)), k_max);
        return o;
      },
      "log_density");
}

/// Per-row KL(N(mu, diag sigma^2) || N(0, I)) from (n x 3, n x 3) -> n x 1.
inline ad::Var gaussian_kl_rows(const ad::Var& mu, const ad::Var& sigma) {
  return ad::rowwise<6, 1>(
      ad::concat_cols(mu, sigma),
      [](const auto& in) {
        using T = typename std::decay_t<decltype(in)>::Scalar;
        using std::log;
        T acc(0);
        for (int i = 0; i < 3; ++i) {
          const T s = in(3 + i);
          acc += T(0.5) * (s * s + in(i) * in(i) - T(1)) - log(s);
        }
        Eigen::Matrix<T, 1, 1> o;
        o(0) = acc;
        return o;
      },
      "gaussian_kl");
}

/// Group-action decoder on the tape: rows of R (n x 9) act on the shared
/// content (1 x D), giving n x D. Gradients flow to both.
inline ad::Var group_action(const ad::Var& rots, const ad::Var& content, const RepSpec& spec,
                            const HarmonicRepresentation& harm) {
  using J = ad::Jet<9>;
  if (rots.cols() != 9) throw std::invalid_argument("group_action: rotations must be n x 9");
  const int dim = spec.total_dim();
  if (content.rows() != 1 || content.cols() != dim) throw std::invalid_argument("group_action: content shape");
  ad::Tape& t = *rots.tape();
  const Eigen::Index n = rots.rows();
  ad::Matrix y(n, dim);
  auto jac = std::make_shared<std::vector<ad::Matrix>>(static_cast<std::size_t>(n));   // dim x 9
  auto reps = std::make_shared<std::vector<ad::Matrix>>(static_cast<std::size_t>(n));  // dim x dim
  Eigen::Matrix<J, Eigen::Dynamic, 1> f(dim);
  for (int k = 0; k < dim; ++k) f(k) = J(content.value()(0, k));
  for (Eigen::Index i = 0; i < n; ++i) {
    Mat3<J> r;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r(a, b) = J(rots.value()(i, 3 * a + b), 3 * a + b);
    const auto blocks = harm.blocks<J>(r);
    ad::Matrix w = ad::Matrix::Zero(dim, dim);
    ad::Matrix jr(dim, 9);
    int off = 0;
    for (const auto& b : spec.blocks) {
      const int nb = 2 * b.degree + 1;
      const auto& d = blocks[b.degree];
      for (int c = 0; c < b.multiplicity; ++c) {
        const Eigen::Matrix<J, Eigen::Dynamic, 1> o = d * f.segment(off, nb);
        for (int r_ = 0; r_ < nb; ++r_) {
          y(i, off + r_) = o(r_).a;
          jr.row(off + r_) = o(r_).v.transpose();
          for (int c_ = 0; c_ < nb; ++c_) w(off + r_, off + c_) = d(r_, c_).a;
        }
        off += nb;
      }
    }
    (*jac)[static_cast<std::size_t>(i)] = std::move(jr);
    (*reps)[static_cast<std::size_t>(i)] = std::move(w);
  }
  ad::Var out = t.push(std::move(y), t.requires_grad(rots) || t.requires_grad(content), "group_action", {});
  t.node(out.id()).backward = [rots, content, out, jac, reps](ad::Tape& tp) {
    const ad::Matrix& g = out.grad();
    if (tp.requires_grad(rots)) {
      ad::Matrix gr(g.rows(), 9);
      for (Eigen::Index i = 0; i < g.rows(); ++i) gr.row(i) = g.row(i) * (*jac)[static_cast<std::size_t>(i)];
      tp.accumulate(rots, gr);
    }
    if (tp.requires_grad(content)) {
      ad::Matrix gc = ad::Matrix::Zero(1, g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) gc += g.row(i) * (*reps)[static_cast<std::size_t>(i)];
      tp.accumulate(content, gc);
    }
  };
  return out;
}

/// Parameters of a model placed on a tape as differentiable leaves.
struct ModelVars {
  std::vector<ad::Var> weights, biases;
  ad::Var content;

  std::vector<ad::Var> all() const {
    std::vector<ad::Var> v = weights;
    v.insert(v.end(), biases.begin(), biases.end());
    v.push_back(content);
    return v;
  }
};

inline ModelVars place(ad::Tape& t, const Model& m) {
  ModelVars v;
  for (const auto& w : m.weights) v.weights.push_back(t.variable(w));
  for (const auto& b : m.biases) v.biases.push_back(t.variable(b));
  v.content = t.variable(m.content);
  return v;
}

/// Encoder outputs on the tape.
struct EncodedVars {
  ad::Var raw_mean;   // n x head_dim
  ad::Var r_mu;       // n x 9 (mean rotation; for the baseline, Euler map of the mean)
  ad::Var sigma;      // n x 3, only for VAE
};

inline EncodedVars encode(const Model& m, const ModelVars& mv, const ad::Var& x) {
  ad::Var h = x;
  const std::size_t n_layers = mv.weights.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    h = ad::add_rowwise(ad::matmul(h, mv.weights[i]), mv.biases[i]);
    if (i + 1 < n_layers) h = ad::tanh(h);
  }
  EncodedVars e;
  const int hd = m.cfg.head_dim();
  e.raw_mean = ad::slice_cols(h, 0, hd);
  e.r_mu = m.cfg.is_baseline() ? euler_rows(e.raw_mean) : mean_head(e.raw_mean, m.cfg.head_kind());
  if (m.cfg.variational()) {
    e.sigma = ad::add_scalar(ad::softplus(ad::slice_cols(h, hd, 3)), kSigmaFloor);
  }
  return e;
}

/// Loss terms of one batch.
struct BatchLoss {
  ad::Var loss;   // scalar to minimize
  double recon;   // AE: mean SSE; VAE: mean 0.5 * SSE
  double kl;      // VAE only
};

/// Builds the training objective for a batch. `eps` holds the n x 3 standard
/// normal draws used by the reparameterized sample (ignored for AE).
inline BatchLoss batch_loss(const Model& m, const ModelVars& mv, const ad::Matrix& x, const ad::Matrix& eps,
                            const HarmonicRepresentation& harm) {
  ad::Tape& t = *mv.content.tape();
  const RepSpec spec = m.cfg.rep_spec();
  const ad::Var xv = t.constant(x);
  const EncodedVars e = encode(m, mv, xv);
  const double n = static_cast<double>(x.rows());

  BatchLoss out;
  if (!m.cfg.variational()) {
    const ad::Var xhat = group_action(e.r_mu, mv.content, spec, harm);
    const ad::Var sse = ad::sum(ad::square(ad::sub(xhat, xv)));
    out.loss = ad::scale(sse, 1.0 / n);
    out.recon = out.loss.scalar();
    out.kl = 0.0;
    return out;
  }

  const ad::Var noise = t.constant(eps);
  const ad::Var v = ad::mul(e.sigma, noise);
  ad::Var r_z, kl;
  if (m.cfg.is_baseline()) {
    r_z = euler_rows(ad::add(e.raw_mean, v));
    kl = gaussian_kl_rows(e.raw_mean, e.sigma);
  } else {
    r_z = shifted_exp_rows(e.r_mu, v);
    // single-sample KL to the uniform prior: log qhat(v) - log 1
    kl = log_density_rows(v, e.sigma, m.cfg.k_max);
  }
  const ad::Var xhat = group_action(r_z, mv.content, spec, harm);
  const ad::Var recon = ad::scale(ad::sum(ad::square(ad::sub(xhat, xv))), 0.5 / n);
  const ad::Var kl_mean = ad::scale(ad::sum(kl), 1.0 / n);
  out.loss = ad::add(recon, kl_mean);
  out.recon = recon.scalar();
  out.kl = kl_mean.scalar();
  return out;
}

// ---------------------------------------------------------------------------
// Plain (off-tape) evaluation

struct Encoded {
  Rotation r_mu;
  Eigen::Vector3d raw_mean3 = Eigen::Vector3d::Zero();  // baseline Euler mean
  Eigen::Vector3d sigma = Eigen::Vector3d::Ones();
};

inline Eigen::VectorXd mlp_forward(const Model& m, const Eigen::VectorXd& x) {
  Eigen::RowVectorXd h = x.transpose();
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    h = h * m.weights[i] + m.biases[i];
    if (i + 1 < m.weights.size()) h = h.array().tanh().matrix();
  }
  return h.transpose();
}

inline Encoded encode_one(const Model& m, const Eigen::VectorXd& x) {
  const Eigen::VectorXd h = mlp_forward(m, x);
  const int hd = m.cfg.head_dim();
  Encoded e;
  if (m.cfg.is_baseline()) {
    e.raw_mean3 = h.head(3);
    e.r_mu = euler_zyz_matrix(h(0), h(1), h(2));
  } else {
    e.r_mu = apply_head<double>(m.cfg.head_kind(), std::span<const double>(h.data(), hd));
  }
  if (m.cfg.variational()) {
    for (int k = 0; k < 3; ++k) {
      const double s = h(hd + k);
      e.sigma(k) = (s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s))) + kSigmaFloor;
    }
  }
  return e;
}

inline Eigen::VectorXd decode(const Model& m, const Rotation& r, const HarmonicRepresentation& harm) {
  const Eigen::VectorXd v = m.content.row(0).transpose();
  return harm.act<double>(m.cfg.rep_spec(), r, v);
}

/// Encoder x -> R_mu as a continuity-metric encoder.
inline Encoder mean_encoder(const Model& m) {
  return [&m](const Eigen::VectorXd& x) -> EncoderOutput { return encode_one(m, x).r_mu; };
}

/// Encoder x -> phi(f(x)): the network output mapped into the head's domain
/// (Euler angles for the baseline). The head's domain is where a continuous
/// lift of a full-turn loop fails to exist for alg/q/s2s1, so forced branch
/// switches show up here as steep transitions; in rotation space part of a
/// switch is folded away by the head itself.
inline Encoder head_domain_encoder(const Model& m) {
  return [&m](const Eigen::VectorXd& x) -> EncoderOutput {
    const Eigen::VectorXd raw = mlp_forward(m, x).head(m.cfg.head_dim());
    if (m.cfg.is_baseline()) return raw;
    return head_normalize(m.cfg.head_kind(), raw);
  };
}

struct ImportanceResult {
  double nll = 0.0;       // -mean_x log (1/k sum_j w_j)
  double nll_stderr = 0.0;
  double neg_elbo = 0.0;  // -mean_x mean_j log w_j on the same draws
  double neg_elbo_stderr = 0.0;
  double recon = 0.0;     // mean 0.5 * SSE over draws
};

namespace detail {

struct Welford {
  long n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double stderr_() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0; }
};

inline double log_normal3(const Eigen::Vector3d& z, const Eigen::Vector3d& mu, const Eigen::Vector3d& sigma) {
  return log_normal_diag<double>(Eigen::Vector3d(z - mu), sigma);
}

}  // namespace detail

/// Importance-weighted NLL bound with k posterior draws per example. Weights
/// are log p(x|R) + log p(R) - log q(R|x) with log p(x|R) = -0.5 |x - xhat|^2
/// (Gaussian normalizer dropped) and the uniform prior at density 1 under
/// normalized Haar. Draws that land on the singular identity coset are redrawn.
inline ImportanceResult eval_nll_importance(const Model& m, const std::vector<DataPoint>& data, int k, Rng& rng) {
  if (!m.cfg.variational()) throw std::invalid_argument("eval_nll_importance: model is not variational");
  if (k < 1) throw std::invalid_argument("eval_nll_importance: k must be >= 1");
  const HarmonicRepresentation harm(m.cfg.rep_max_degree);
  const DensityTruncation trunc{m.cfg.k_max};
  detail::Welford nll, elbo, recon;
  std::vector<double> logw(static_cast<std::size_t>(k));
  for (const auto& d : data) {
    const Encoded e = encode_one(m, d.x);
    for (int j = 0; j < k; ++j) {
      double lw = 0.0;
      for (;;) {
        Eigen::Vector3d eps(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d v = e.sigma.cwiseProduct(eps);
        Rotation r;
        double log_prior = 0.0, log_q = 0.0;
        if (m.cfg.is_baseline()) {
          const Eigen::Vector3d z = e.raw_mean3 + v;
          r = euler_zyz_matrix(z(0), z(1), z(2));
          log_prior = detail::log_normal3(z, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
          log_q = detail::log_normal3(z, e.raw_mean3, e.sigma);
        } else {
          r = e.r_mu * exp_map<double>(v);
          const auto lq = log_density(So3Gaussian{e.r_mu, e.sigma}, r, trunc);
          if (!lq) continue;
          log_q = *lq;
        }
        const double half_sse = 0.5 * (d.x - decode(m, r, harm)).squaredNorm();
        recon.add(half_sse);
        lw = -half_sse + log_prior - log_q;
        break;
      }
      logw[static_cast<std::size_t>(j)] = lw;
    }
    double mx = -std::numeric_limits<double>::infinity(), mean_lw = 0.0;
    for (double x : logw) {
      mx = std::max(mx, x);
      mean_lw += x / k;
    }
    double acc = 0.0;
    for (double x : logw) acc += std::exp(x - mx);
    nll.add(-(mx + std::log(acc) - std::log(static_cast<double>(k))));
    elbo.add(-mean_lw);
  }
  return {nll.mean, nll.stderr_(), elbo.mean, elbo.stderr_(), recon.mean};
}

struct ResultRow {
  std::string label;
  std::string model;
  double nll = std::numeric_limits<double>::quiet_NaN();
  double elbo = std::numeric_limits<double>::quiet_NaN();
  double recon = std::numeric_limits<double>::quiet_NaN();
  double kl = std::numeric_limits<double>::quiet_NaN();
  double disc = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> loss, recon, kl;
};

/// Minimizes the AE or VAE objective with Adam. Throws on a non-finite loss.
inline TrainLog train(Model& m, const std::vector<DataPoint>& data, long log_every = 0) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const ExperimentConfig& cfg = m.cfg;
  const HarmonicRepresentation harm(cfg.rep_max_degree);
  const int dim = cfg.rep_spec().total_dim();
  if (data.front().x.size() != dim) throw std::invalid_argument("train: dataset dimension does not match rep spec");
  Rng rng(cfg.seed ^ 0x5eed5eedULL);
  ad::AdamState state;
  ad::AdamOptions opt;
  opt.lr = cfg.lr;
  TrainLog log;
  const int bs = cfg.batch_size;
  ad::Matrix x(bs, dim), eps(bs, 3);
  for (long step = 0; step < cfg.steps; ++step) {
    for (int i = 0; i < bs; ++i) {
      const auto idx = static_cast<std::size_t>(rng.engine()() % data.size());
      x.row(i) = data[idx].x.transpose();
      for (int k = 0; k < 3; ++k) eps(i, k) = rng.normal();
    }
    ad::Tape tape;
    const ModelVars mv = place(tape, m);
    const BatchLoss bl = batch_loss(m, mv, x, eps, harm);
    const double lv = bl.loss.scalar();
    if (!std::isfinite(lv)) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) + " (" + cfg.label() +
                               "): loss=" + std::to_string(lv) + " recon=" + std::to_string(bl.recon) +
                               " kl=" + std::to_string(bl.kl));
    }
    const auto grads = ad::grad(tape, bl.loss, mv.all());
    ad::adam_step(m.parameters(), grads, state, opt);
    if (log_every > 0 && (step % log_every == 0 || step + 1 == cfg.steps)) {
      log.loss.push_back(lv);
      log.recon.push_back(bl.recon);
      log.kl.push_back(bl.kl);
    }
  }
  return log;
}

/// KL(q(.|x) || prior) averaged over `data`, each term from `n_samples` draws.
inline double eval_kl(const Model& m, const std::vector<DataPoint>& data, long n_samples, Rng& rng) {
  const DensityTruncation trunc{m.cfg.k_max};
  double acc = 0.0;
  for (const auto& d : data) {
    const Encoded e = encode_one(m, d.x);
    if (m.cfg.is_baseline()) {
      double kl = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double s = e.sigma(i), mu = e.raw_mean3(i);
        kl += 0.5 * (s * s + mu * mu - 1.0) - std::log(s);
      }
      acc += kl;
    } else {
      acc += kl_to_uniform(So3Gaussian{e.r_mu, e.sigma}, n_samples, trunc, rng, m.cfg.haar).value;
    }
  }
  return acc / static_cast<double>(data.size());
}

/// Discontinuity fraction of the head-domain encoder over S^1 loops in data space.
inline ContinuityReport eval_continuity(const Model& m, Rng& rng) {
  const RepSpec spec = m.cfg.rep_spec();
  const auto source = s1_data_paths(spec, make_content(spec, m.cfg.content_seed), m.cfg.path_steps);
  return disc_fraction(head_domain_encoder(m), source, m.cfg.n_paths, rng, m.cfg.gamma, m.cfg.alpha);
}

/// Held-out metrics for a trained model.
inline ResultRow evaluate(const Model& m, const std::vector<DataPoint>& test, std::uint64_t eval_seed) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultRow row;
  row.label = m.cfg.label();
  row.model = m.cfg.variational() ? "vae" : "ae";
  row.seed = m.cfg.seed;
  Rng rng(eval_seed);
  if (m.cfg.variational()) {
    const ImportanceResult ir = eval_nll_importance(m, test, m.cfg.importance_samples, rng);
    row.nll = ir.nll;
    row.elbo = -ir.neg_elbo;
    row.recon = ir.recon;
    row.kl = eval_kl(m, test, m.cfg.eval_entropy_samples, rng);
  } else {
    const HarmonicRepresentation harm(m.cfg.rep_max_degree);
    double sse = 0.0;
    for (const auto& d : test) sse += (d.x - decode(m, encode_one(m, d.x).r_mu, harm)).squaredNorm();
    row.recon = sse / static_cast<double>(test.size());
  }
  row.disc = eval_continuity(m, rng).disc_fraction;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

struct TrajectoryDump {
  std::vector<Rotation> encoded;
  std::vector<Eigen::VectorXd> reconstructions;
  std::vector<double> jumps;  // |f(x_{i+1}) - f(x_i)|^2, Frobenius
};

/// Encodes (mean) and reconstructs every point of a trajectory.
inline TrajectoryDump reconstruct_trajectory(const Model& m, const std::vector<DataPoint>& traj) {
  const HarmonicRepresentation harm(m.cfg.rep_max_degree);
  TrajectoryDump out;
  for (const auto& d : traj) {
    const Rotation r = encode_one(m, d.x).r_mu;
    out.encoded.push_back(r);
    out.reconstructions.push_back(decode(m, r, harm));
  }
  for (std::size_t i = 0; i + 1 < out.encoded.size(); ++i) {
    out.jumps.push_back((out.encoded[i + 1] - out.encoded[i]).squaredNorm());
  }
  return out;
}

/// Squared jumps of an arbitrary encoder output sequence (for reference encoders).
inline std::vector<double> squared_jumps(const std::vector<EncoderOutput>& images) {
  std::vector<double> j;
  for (std::size_t i = 0; i + 1 < images.size(); ++i) {
    const double d = output_distance(images[i + 1], images[i]);
    j.push_back(d * d);
  }
  return j;
}

}  // namespace so3vae
