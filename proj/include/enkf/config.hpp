#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enkf/experiments.hpp"

namespace enkf {

// Parsed command line (the subcommand plus shared flags).
struct CliConfig {
  std::string command;  // simulate | filter | sweep-j | sweep-eps | verify | plot
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 0;  // override of the config seed when has_seed
  std::string out_dir = ".";
  bool assert_bands = false;
  int threads = 0;              // 0 keeps the OpenMP default
  int dump_density_every = 0;   // 0 disables density dumps
  std::string trajectory_path;  // filter: precomputed trajectory CSV
  std::string results_path;     // plot: existing results.csv
  bool full_verify = false;     // verify: include the acceptance criteria
};

// Typed view of the JSON config file. Matrices are nested arrays, vectors
// flat arrays; perturbation maps are referenced by registered name
// (zero | sin | tanh). Unknown keys anywhere are rejected.
struct AppConfig {
  PerturbedAffineFamily family;  // epsilon from the perturbation block
  std::string psi_pert_name = "zero";
  std::string h_pert_name = "zero";

  Vec init_mean;
  Mat init_cov;

  int n_steps = 10;
  std::uint64_t seed = 1;

  int grid_cells = 2000;
  int joint_y_cells = 512;
  double grid_padding = 8.0;
  bool has_extent = false;
  double extent_lo = 0.0;
  double extent_hi = 0.0;

  std::string filter_name;  // grid | kalman | enkf | mean-field | pf
  Eigen::Index ensemble_size = 1000;
  Eigen::Index pf_particles = 100000;
  Eigen::Index mean_field_min_j = 10000;
  double resample_threshold = 0.5;

  std::vector<Eigen::Index> j_values = {16, 64, 256, 1024, 4096};
  std::vector<double> epsilon_values = {0.02, 0.05, 0.1, 0.2, 0.4};
  int n_replicates = 100;
  std::vector<std::string> test_functions = {"mean", "tanh",
                                             "clipped_square"};
  double j_slope_lo = -0.65;
  double j_slope_hi = -0.35;
  double eps_slope_lo = 0.8;
  double eps_slope_hi = 1.2;

  // Canonical (key-sorted) serialization of the parsed file, the input of
  // the config hash recorded in report.json and manifest.json.
  std::string canonical;
};

// Parses a config from JSON text / from a file. Throws ConfigError with
// the offending path on unknown keys, wrong types, or bad shapes.
AppConfig parse_config(const std::string& json_text);
AppConfig load_config_file(const std::string& path);

// Registered perturbation maps by name; in_dim -> out_dim.
MapFn make_perturbation(const std::string& name, int in_dim, int out_dim);

SweepConfig to_sweep_config(const AppConfig& config);

}  // namespace enkf
