#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "so3vae/config.hpp"
#include "so3vae/experiment.hpp"
#include "so3vae/wigner.hpp"

namespace so3vae {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kResultsHeader = "label,model,nll,elbo,recon,kl,disc,seconds,seed";

/// 17 significant digits; round-trips every double.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// One record per line: the data vector, then the 9 rotation entries (row-major).
inline void write_dataset(const std::string& path, const std::vector<DataPoint>& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (const auto& d : data) {
    std::string line;
    for (Eigen::Index i = 0; i < d.x.size(); ++i) line += fmt17(d.x(i)) + ",";
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) line += fmt17(d.r_true(i, j)) + (i == 2 && j == 2 ? "" : ",");
    out << line << '\n';
  }
}

inline std::vector<DataPoint> read_dataset(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset: " + path);
  std::vector<DataPoint> data;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != dim + 9) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim + 9) +
                               " fields, got " + std::to_string(vals.size()));
    }
    DataPoint d;
    d.x = Eigen::Map<const Eigen::VectorXd>(vals.data(), dim);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) d.r_true(i, j) = vals[static_cast<std::size_t>(dim + 3 * i + j)];
    data.push_back(std::move(d));
  }
  return data;
}

inline nlohmann::json rep_spec_json(const RepSpec& spec) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : spec.blocks) blocks.push_back({{"degree", b.degree}, {"multiplicity", b.multiplicity}});
  return {{"blocks", blocks}, {"total_dim", spec.total_dim()}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(2) << '\n';
}

inline std::string csv_field(double x) { return fmt17(x); }

inline std::string result_line(const ResultRow& r) {
  std::ostringstream os;
  os << r.label << ',' << r.model << ',' << csv_field(r.nll) << ',' << csv_field(r.elbo) << ','
     << csv_field(r.recon) << ',' << csv_field(r.kl) << ',' << csv_field(r.disc) << ',' << csv_field(r.seconds)
     << ',' << r.seed;
  return os.str();
}

/// Appends a row, writing the header first when the file is new or empty.
inline void append_result(const std::string& path, const ResultRow& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append results: " + path);
  if (fresh) out << kResultsHeader << '\n';
  out << result_line(r) << '\n';
}

/// step, r00..r22, xhat_0..xhat_{D-1}, jump (squared distance to the next step).
inline void write_trajectory(const std::string& path, const TrajectoryDump& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  out << "step";
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out << ",r" << i << j;
  const Eigen::Index dim = t.reconstructions.empty() ? 0 : t.reconstructions.front().size();
  for (Eigen::Index k = 0; k < dim; ++k) out << ",xhat_" << k;
  out << ",jump\n";
  for (std::size_t s = 0; s < t.encoded.size(); ++s) {
    out << s;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out << ',' << fmt17(t.encoded[s](i, j));
    for (Eigen::Index k = 0; k < dim; ++k) out << ',' << fmt17(t.reconstructions[s](k));
    out << ',' << (s < t.jumps.size() ? fmt17(t.jumps[s]) : std::string());
    out << '\n';
  }
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

/// Run metadata; `timestamp` is the only field that varies between identical runs.
inline nlohmann::json run_metadata(const std::string& command, const ExperimentConfig& cfg) {
  return {
      {"command", command},
      {"version", kVersion},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"config_hash", config_hash(cfg)},
      {"seeds", {{"model", cfg.seed}, {"data", cfg.data_seed}, {"content", cfg.content_seed}}},
      {"likelihood", "unit-variance Gaussian, normalizer dropped"},
      {"haar", to_string(cfg.haar)},
      {"config", to_json(cfg)},
      {"timestamp", utc_timestamp()},
  };
}

}  // namespace so3vae
