#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "so3vae/config.hpp"
#include "so3vae/contmetric.hpp"
#include "so3vae/experiment.hpp"
#include "so3vae/io.hpp"
#include "so3vae/so3_gauss.hpp"

namespace so3vae::cli {

namespace detail {

/// Usage error (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in --") + what + ": '" + tok + "'");
    }
  }
  return out;
}

inline Eigen::Vector3d parse_vec3(const std::string& s, const char* what) {
  const auto v = parse_list(s, what);
  if (v.size() != 3) throw UsageError(std::string("--") + what + " expects 3 comma-separated numbers");
  return {v[0], v[1], v[2]};
}

/// "0.3" -> isotropic; "a,b,c" -> per-axis.
inline Eigen::Vector3d parse_sigma(const std::string& s) {
  const auto v = parse_list(s, "sigma");
  if (v.size() == 1) return Eigen::Vector3d::Constant(v[0]);
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw UsageError("--sigma expects 1 or 3 comma-separated numbers");
}

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

inline ExperimentConfig resolve_config(const Globals& g) {
  nlohmann::json doc = g.config_path.empty() ? nlohmann::json::object() : load_json_file(g.config_path);
  for (const auto& o : g.overrides) apply_override(doc, o);
  ExperimentConfig cfg = config_from_json(doc);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  return cfg;
}

inline std::filesystem::path out_path(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return std::filesystem::path(cfg.out_dir) / name;
}

inline std::string model_file(const ExperimentConfig& cfg) {
  return cfg.label() + "-seed" + std::to_string(cfg.seed) + ".model.json";
}

inline void write_metadata(const ExperimentConfig& cfg, const std::string& command) {
  write_json(out_path(cfg, "metadata-" + command + ".json").string(), run_metadata(command, cfg));
}

inline Model load_model(const ExperimentConfig& cfg, const std::string& explicit_path) {
  const std::string path =
      explicit_path.empty() ? (std::filesystem::path(cfg.out_dir) / model_file(cfg)).string() : explicit_path;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path + " (run `train` first)");
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Exit codes: 0 success,
/// 1 runtime failure, 2 usage or configuration error.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using detail::Globals;
  CLI::App app{"Reparameterizable distributions on SO(3) and the toy auto-encoder experiment", "so3vae"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set train.steps=500")->take_all();
  app.add_option("--seed", g.seed, "Model/sampler seed (overrides config `seed`)");
  app.add_option("--out-dir", g.out_dir, "Output directory (overrides config `out_dir`)");

  auto* gen = app.add_subcommand("gen-data", "Generate the toy train/test sets");
  auto* train_cmd = app.add_subcommand("train", "Train an AE or VAE on the generated data");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model and append a results row");
  auto* sample_cmd = app.add_subcommand("sample", "Draw rotations from the concentrated distribution");
  auto* density_cmd = app.add_subcommand("density", "Log density of a rotation");
  auto* entropy_cmd = app.add_subcommand("entropy", "Monte Carlo entropy and KL to the uniform prior");
  auto* cont_cmd = app.add_subcommand("continuity", "Discontinuity fraction of an encoder");
  auto* traj_cmd = app.add_subcommand("trajectory", "Encode and reconstruct an S^1 trajectory");

  std::string model_path;
  for (auto* c : {eval_cmd, cont_cmd, traj_cmd}) c->add_option("--model", model_path, "Model file");

  std::string sigma_s = "0.3", mu_s = "0,0,0", v_s, rot_s;
  long n = 10;
  sample_cmd->add_option("--sigma", sigma_s, "Scale: one value or three comma-separated");
  sample_cmd->add_option("--mu", mu_s, "Location as an algebra vector (R_mu = exp(mu))");
  sample_cmd->add_option("--n", n, "Number of samples")->check(CLI::PositiveNumber);

  density_cmd->add_option("--sigma", sigma_s, "Scale: one value or three comma-separated");
  density_cmd->add_option("--mu", mu_s, "Location as an algebra vector");
  auto* v_opt = density_cmd->add_option("--v", v_s, "Evaluate at R = exp(v)");
  density_cmd->add_option("--rotation", rot_s, "Evaluate at a row-major 3x3 rotation")->excludes(v_opt);

  entropy_cmd->add_option("--sigma", sigma_s, "Scale: one value or three comma-separated");
  entropy_cmd->add_option("--n", n, "Number of Monte Carlo samples")->check(CLI::PositiveNumber);

  std::string head_s = "s2s2";
  std::optional<int> paths, steps;
  cont_cmd->add_option("--head", head_s, "Reference encoder: alg | q | s2s1 | s2s2");
  cont_cmd->add_option("--paths", paths, "Number of paths")->check(CLI::PositiveNumber);
  cont_cmd->add_option("--steps", steps, "Steps per S^1 loop")->check(CLI::Range(8, 1000000));

  std::string axis_s = "0,0,1";
  int traj_steps = 100;
  traj_cmd->add_option("--axis", axis_s, "Rotation axis of the loop");
  traj_cmd->add_option("--steps", traj_steps, "Steps per loop")->check(CLI::Range(8, 1000000));

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    ExperimentConfig cfg = detail::resolve_config(g);

    if (gen->parsed()) {
      const RepSpec spec = cfg.rep_spec();
      Rng rng(cfg.data_seed);
      const auto train_set = make_toy_dataset(spec, cfg.content_seed, cfg.n_train, rng);
      const auto test_set = make_toy_dataset(spec, cfg.content_seed, cfg.n_test, rng);
      write_dataset(detail::out_path(cfg, "train.csv").string(), train_set);
      write_dataset(detail::out_path(cfg, "test.csv").string(), test_set);
      write_json(detail::out_path(cfg, "dataset.json").string(),
                 {{"rep", rep_spec_json(spec)},
                  {"content_seed", cfg.content_seed},
                  {"data_seed", cfg.data_seed},
                  {"n_train", cfg.n_train},
                  {"n_test", cfg.n_test},
                  {"files", {"train.csv", "test.csv"}}});
      detail::write_metadata(cfg, "gen-data");
      out << "wrote " << cfg.n_train << " train and " << cfg.n_test << " test points to " << cfg.out_dir << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto data = read_dataset((std::filesystem::path(cfg.out_dir) / "train.csv").string(),
                                     cfg.rep_spec().total_dim());
      Model m = init_model(cfg);
      const auto t0 = std::chrono::steady_clock::now();
      const TrainLog log = train(m, data, std::max<long>(1, cfg.steps / 20));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_json(detail::out_path(cfg, detail::model_file(cfg)).string(), model_to_json(m));
      nlohmann::json meta = run_metadata("train", cfg);
      meta["train_seconds"] = secs;
      meta["loss_trace"] = log.loss;
      write_json(detail::out_path(cfg, "metadata-train.json").string(), meta);
      out << cfg.label() << ": final loss " << fmt17(log.loss.back()) << " after " << cfg.steps << " steps\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const Model m = detail::load_model(cfg, model_path);
      const auto test = read_dataset((std::filesystem::path(cfg.out_dir) / "test.csv").string(),
                                     m.cfg.rep_spec().total_dim());
      const ResultRow row = evaluate(m, test, cfg.seed + 1);
      append_result(detail::out_path(cfg, "results.csv").string(), row);
      detail::write_metadata(cfg, "eval");
      out << kResultsHeader << "\n" << result_line(row) << "\n";
      return 0;
    }

    if (sample_cmd->parsed()) {
      So3Gaussian d{exp_map<double>(detail::parse_vec3(mu_s, "mu")), detail::parse_sigma(sigma_s)};
      d.validate();
      Rng rng(cfg.seed);
      out << "r00,r01,r02,r10,r11,r12,r20,r21,r22,v0,v1,v2\n";
      for (long i = 0; i < n; ++i) {
        const auto [r, v] = sample(d, rng);
        std::string line;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) line += fmt17(r(a, b)) + ",";
        line += fmt17(v(0)) + "," + fmt17(v(1)) + "," + fmt17(v(2));
        out << line << "\n";
      }
      detail::write_metadata(cfg, "sample");
      return 0;
    }

    if (density_cmd->parsed()) {
      So3Gaussian d{exp_map<double>(detail::parse_vec3(mu_s, "mu")), detail::parse_sigma(sigma_s)};
      d.validate();
      Rotation r;
      if (!rot_s.empty()) {
        const auto vals = detail::parse_list(rot_s, "rotation");
        if (vals.size() != 9) throw detail::UsageError("--rotation expects 9 numbers");
        r = unflatten(Eigen::Map<const Eigen::VectorXd>(vals.data(), 9));
        if (!is_rotation(r)) throw detail::UsageError("--rotation is not a rotation matrix");
      } else if (!v_s.empty()) {
        r = exp_map<double>(detail::parse_vec3(v_s, "v"));
      } else {
        throw detail::UsageError("density needs --v or --rotation");
      }
      const auto lq = log_density(d, r, DensityTruncation{cfg.k_max});
      if (!lq) {
        err << "error: density is singular at the location (rotation equals r_mu)\n";
        return 1;
      }
      const double shift = cfg.haar == HaarConvention::Euler8Pi2 ? kLogHaarVolume : 0.0;
      out << "log_density=" << fmt17(*lq - shift) << " convention=" << to_string(cfg.haar) << "\n";
      detail::write_metadata(cfg, "density");
      return 0;
    }

    if (entropy_cmd->parsed()) {
      So3Gaussian d;
      d.sigma = detail::parse_sigma(sigma_s);
      d.validate();
      Rng rng(cfg.seed);
      const McEstimate h = entropy_mc(d, n, DensityTruncation{cfg.k_max}, rng, cfg.haar);
      out << "entropy=" << fmt17(h.value) << " stderr=" << fmt17(h.stderr_)
          << " kl_to_uniform=" << fmt17(cross_entropy_uniform(cfg.haar) - h.value)
          << " convention=" << to_string(cfg.haar) << "\n";
      detail::write_metadata(cfg, "entropy");
      return 0;
    }

    if (cont_cmd->parsed()) {
      if (paths) cfg.n_paths = *paths;
      if (steps) cfg.path_steps = *steps;
      Rng rng(cfg.seed);
      ContinuityReport rep;
      std::string tag;
      if (!model_path.empty()) {
        Model m = detail::load_model(cfg, model_path);
        m.cfg.n_paths = cfg.n_paths;
        m.cfg.path_steps = cfg.path_steps;
        rep = eval_continuity(m, rng);
        tag = m.cfg.label();
      } else {
        HeadKind kind;
        try {
          kind = parse_head_kind(head_s);
        } catch (const std::invalid_argument& e) {
          throw detail::UsageError(e.what());
        }
        rep = disc_fraction(reference_encoder(kind), s1_rotation_paths(cfg.path_steps), cfg.n_paths, rng, cfg.gamma,
                            cfg.alpha);
        tag = "reference-" + head_s;
      }
      write_json(detail::out_path(cfg, "continuity-" + tag + ".json").string(), rep.to_json());
      detail::write_metadata(cfg, "continuity");
      out << "disc_fraction=" << fmt17(rep.disc_fraction) << " paths=" << rep.n_paths << "\n";
      return 0;
    }

    if (traj_cmd->parsed()) {
      const Model m = detail::load_model(cfg, model_path);
      Eigen::Vector3d axis = detail::parse_vec3(axis_s, "axis");
      if (axis.norm() < 1e-12) throw detail::UsageError("--axis must be non-zero");
      axis.normalize();
      const RepSpec spec = m.cfg.rep_spec();
      const auto traj = make_s1_trajectory(spec, make_content(spec, m.cfg.content_seed), axis, traj_steps);
      const TrajectoryDump dump = reconstruct_trajectory(m, traj);
      const auto path = detail::out_path(cfg, m.cfg.label() + "-seed" + std::to_string(m.cfg.seed) + ".trajectory.csv");
      write_trajectory(path.string(), dump);
      detail::write_metadata(cfg, "trajectory");
      out << "wrote " << dump.encoded.size() << " steps to " << path.string() << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace so3vae::cli
