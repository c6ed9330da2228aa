#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "so3vae/mean_maps.hpp"
#include "so3vae/rng.hpp"
#include "so3vae/so3.hpp"
#include "so3vae/wigner.hpp"

namespace so3vae {

/// Encoder image: rotations are compared with the Frobenius metric, vectors
/// with the Euclidean one.
using EncoderOutput = std::variant<Rotation, Eigen::VectorXd>;
using Encoder = std::function<EncoderOutput(const Eigen::VectorXd&)>;
/// Produces the input points of one continuous path.
using PathSource = std::function<std::vector<Eigen::VectorXd>(Rng&)>;

inline constexpr int kMinPathPoints = 9;

struct PathSample {
  std::vector<Eigen::VectorXd> points;
  std::vector<EncoderOutput> images;

  void validate() const {
    if (points.size() != images.size()) throw std::invalid_argument("PathSample: points/images size mismatch");
    if (static_cast<int>(points.size()) < kMinPathPoints) {
      throw std::invalid_argument("PathSample: need at least 9 points");
    }
  }
};

inline double output_distance(const EncoderOutput& a, const EncoderOutput& b) {
  if (a.index() != b.index()) throw std::invalid_argument("output_distance: mixed output kinds");
  if (const auto* ra = std::get_if<Rotation>(&a)) return frobenius_distance(*ra, std::get<Rotation>(b));
  return (std::get<Eigen::VectorXd>(a) - std::get<Eigen::VectorXd>(b)).norm();
}

/// L_i = d_out(f(x_{i+1}), f(x_i)) / d_in(x_{i+1}, x_i).
inline std::vector<double> lipschitz_ratios(const PathSample& p) {
  p.validate();
  std::vector<double> out;
  out.reserve(p.points.size() - 1);
  for (std::size_t i = 0; i + 1 < p.points.size(); ++i) {
    const double din = (p.points[i + 1] - p.points[i]).norm();
    if (!(din > 0.0)) throw std::invalid_argument("lipschitz_ratios: zero input step");
    out.push_back(output_distance(p.images[i + 1], p.images[i]) / din);
  }
  return out;
}

/// alpha-th percentile, linear interpolation between adjacent order statistics.
inline double percentile(std::vector<double> values, double alpha) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = alpha / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct PathVerdict {
  double max_ratio = 0.0;
  double p_alpha = 0.0;
  bool flagged = false;
};

/// Discontinuous when max L_i > gamma * P_alpha.
inline PathVerdict classify_path(std::span<const double> ratios, double gamma = 10.0, double alpha = 90.0) {
  if (ratios.size() < 8) throw std::invalid_argument("classify_path: need at least 8 ratios");
  PathVerdict v;
  v.max_ratio = *std::max_element(ratios.begin(), ratios.end());
  v.p_alpha = percentile(std::vector<double>(ratios.begin(), ratios.end()), alpha);
  v.flagged = v.max_ratio > gamma * v.p_alpha;
  return v;
}

struct ContinuityReport {
  int n_paths = 0;
  double gamma = 10.0;
  double alpha = 90.0;
  double disc_fraction = 0.0;
  std::vector<PathVerdict> per_path;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n_paths"] = n_paths;
    j["gamma"] = gamma;
    j["alpha"] = alpha;
    j["disc_fraction"] = disc_fraction;
    j["per_path"] = nlohmann::json::array();
    for (const auto& p : per_path) {
      j["per_path"].push_back({{"M", p.max_ratio}, {"P_alpha", p.p_alpha}, {"flagged", p.flagged}});
    }
    return j;
  }
};

/// Fraction of paths from `source` along which `encoder` is flagged.
inline ContinuityReport disc_fraction(const Encoder& encoder, const PathSource& source, int n_paths, Rng& rng,
                                      double gamma = 10.0, double alpha = 90.0) {
  if (n_paths < 1) throw std::invalid_argument("disc_fraction: n_paths must be >= 1");
  ContinuityReport rep;
  rep.n_paths = n_paths;
  rep.gamma = gamma;
  rep.alpha = alpha;
  int flagged = 0;
  for (int i = 0; i < n_paths; ++i) {
    PathSample p;
    p.points = source(rng);
    p.images.reserve(p.points.size());
    for (const auto& x : p.points) p.images.push_back(encoder(x));
    const auto ratios = lipschitz_ratios(p);
    const PathVerdict v = classify_path(ratios, gamma, alpha);
    flagged += v.flagged ? 1 : 0;
    rep.per_path.push_back(v);
  }
  rep.disc_fraction = static_cast<double>(flagged) / n_paths;
  return rep;
}

inline Eigen::Vector3d random_unit_axis(Rng& rng) {
  for (;;) {
    const Eigen::Vector3d a(rng.normal(), rng.normal(), rng.normal());
    const double n = a.norm();
    if (n > 1e-12) return a / n;
  }
}

inline Eigen::VectorXd flatten(const Rotation& r) {
  Eigen::VectorXd out(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(3 * i + j) = r(i, j);
  return out;
}

inline Rotation unflatten(const Eigen::VectorXd& x) {
  if (x.size() != 9) throw std::invalid_argument("unflatten: expected 9 entries");
  Rotation r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = x(3 * i + j);
  return r;
}

/// Full-turn loops exp(t a), a Haar-random axis, in data space W(R) v.
inline PathSource s1_data_paths(RepSpec spec, Eigen::VectorXd content, int n_steps = 100) {
  return [spec = std::move(spec), content = std::move(content), n_steps](Rng& rng) {
    const auto traj = make_s1_trajectory(spec, content, random_unit_axis(rng), n_steps);
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(traj.size());
    for (const auto& d : traj) pts.push_back(d.x);
    return pts;
  };
}

/// Full-turn loops given directly as flattened rotation matrices.
inline PathSource s1_rotation_paths(int n_steps = 100) {
  return [n_steps](Rng& rng) {
    const Eigen::Vector3d axis = random_unit_axis(rng);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i <= n_steps; ++i) pts.push_back(flatten(exp_map<double>(axis * (kTwoPi * i / n_steps))));
    return pts;
  };
}

/// Reference encoder on flattened rotations: the head preimage map. Only the
/// s2s2 embedding is continuous.
inline Encoder reference_encoder(HeadKind kind) {
  return [kind](const Eigen::VectorXd& x) -> EncoderOutput { return head_preimage(kind, unflatten(x)); };
}

}  // namespace so3vae
