#include <doctest.h>

#include <cmath>
#include <string>

#include "enkf/config.hpp"
#include "enkf/errors.hpp"

using namespace enkf;

namespace {

const char* kFullConfig = R"({
  "model": {
    "dim_d": 1, "dim_k": 1,
    "a_matrix": [[0.9]], "b_vector": [0.0],
    "h_matrix": [[1.0]], "h_offset": [0.0],
    "sigma": [[0.5]], "gamma": [[0.5]],
    "perturbation": {"epsilon": 0.2, "psi": "sin", "h": "tanh"}
  },
  "init": {"mean": [0.0], "cov": [[1.0]]},
  "trajectory": {"n_steps": 10, "seed": 42},
  "grid": {"cells": 1000, "joint_y_cells": 256, "padding_sigmas": 6.0,
           "extent": [-9.0, 9.0]},
  "filter": {"name": "enkf", "ensemble_size": 64, "pf_particles": 5000,
             "mean_field_min_j": 5000, "resample_threshold": 0.6},
  "sweep": {"j_values": [16, 64, 256], "epsilon_values": [0.05, 0.1],
            "n_replicates": 20, "test_functions": ["mean", "tanh"],
            "j_slope_band": [-0.7, -0.3], "eps_slope_band": [0.7, 1.3]}
})";

bool throws_mentioning(const std::string& text, const std::string& needle) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("full config parses into typed fields") {
  const AppConfig cfg = parse_config(kFullConfig);
  CHECK(cfg.family.dim_d() == 1);
  CHECK(cfg.family.dim_k() == 1);
  CHECK(cfg.family.a_matrix(0, 0) == 0.9);
  CHECK(cfg.family.epsilon == 0.2);
  CHECK(cfg.psi_pert_name == "sin");
  CHECK(cfg.h_pert_name == "tanh");
  CHECK(cfg.init_cov(0, 0) == 1.0);
  CHECK(cfg.n_steps == 10);
  CHECK(cfg.seed == 42);
  CHECK(cfg.grid_cells == 1000);
  CHECK(cfg.joint_y_cells == 256);
  CHECK(cfg.grid_padding == 6.0);
  CHECK(cfg.has_extent);
  CHECK(cfg.extent_lo == -9.0);
  CHECK(cfg.extent_hi == 9.0);
  CHECK(cfg.filter_name == "enkf");
  CHECK(cfg.ensemble_size == 64);
  CHECK(cfg.pf_particles == 5000);
  CHECK(cfg.resample_threshold == 0.6);
  CHECK(cfg.j_values == std::vector<Eigen::Index>{16, 64, 256});
  CHECK(cfg.epsilon_values == std::vector<double>{0.05, 0.1});
  CHECK(cfg.n_replicates == 20);
  CHECK(cfg.test_functions == std::vector<std::string>{"mean", "tanh"});
  CHECK(cfg.j_slope_lo == -0.7);
  CHECK(cfg.j_slope_hi == -0.3);
  CHECK(cfg.eps_slope_lo == 0.7);
  CHECK(cfg.eps_slope_hi == 1.3);

  // The realized perturbations are wired by name.
  const Vec probe = Vec::Constant(1, 2.0);
  CHECK(cfg.family.psi_perturbation(probe)[0] ==
        doctest::Approx(std::sin(2.0)).epsilon(1e-14));
  CHECK(std::abs(cfg.family.h_perturbation(probe)[0]) <= 1.0);
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK(throws_mentioning(R"({"bogus": 1})", "bogus"));
  const std::string inner = R"({
    "model": {"dim_d": 1, "dim_k": 1, "a_matrix": [[1.0]], "b_vector": [0.0],
              "h_matrix": [[1.0]], "h_offset": [0.0], "sigma": [[1.0]],
              "gamma": [[1.0]], "typo_key": 3},
    "init": {"mean": [0.0], "cov": [[1.0]]},
    "trajectory": {"n_steps": 5}
  })";
  CHECK(throws_mentioning(inner, "typo_key"));
}

TEST_CASE("missing and malformed blocks are rejected") {
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
  CHECK(throws_mentioning(R"({"model": {"dim_d": 1}})", "dim_k"));

  // init missing entirely.
  const std::string no_init = R"({
    "model": {"dim_d": 1, "dim_k": 1, "a_matrix": [[1.0]], "b_vector": [0.0],
              "h_matrix": [[1.0]], "h_offset": [0.0], "sigma": [[1.0]],
              "gamma": [[1.0]]},
    "trajectory": {"n_steps": 5}
  })";
  CHECK(throws_mentioning(no_init, "init"));

  // Ragged matrix row.
  const std::string ragged = R"({
    "model": {"dim_d": 2, "dim_k": 1, "a_matrix": [[1.0, 0.0], [0.0]],
              "b_vector": [0.0, 0.0], "h_matrix": [[1.0, 0.0]],
              "h_offset": [0.0], "sigma": [[1.0, 0.0], [0.0, 1.0]],
              "gamma": [[1.0]]},
    "init": {"mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]},
    "trajectory": {"n_steps": 5}
  })";
  CHECK(throws_mentioning(ragged, "ragged"));

  // Shape mismatch against the declared dims.
  const std::string bad_shape = R"({
    "model": {"dim_d": 2, "dim_k": 1, "a_matrix": [[1.0]],
              "b_vector": [0.0, 0.0], "h_matrix": [[1.0, 0.0]],
              "h_offset": [0.0], "sigma": [[1.0, 0.0], [0.0, 1.0]],
              "gamma": [[1.0]]},
    "init": {"mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]},
    "trajectory": {"n_steps": 5}
  })";
  CHECK(throws_mentioning(bad_shape, "shapes"));
}

TEST_CASE("perturbation and filter names are validated") {
  const auto swap = [&](const std::string& from, const std::string& to) {
    std::string copy(kFullConfig);
    copy.replace(copy.find(from), from.size(), to);
    return copy;
  };
  CHECK_THROWS_AS(parse_config(swap("\"sin\"", "\"wavelet\"")), ConfigError);
  CHECK_THROWS_AS(parse_config(swap("\"enkf\"", "\"ukf\"")), ConfigError);
  CHECK_THROWS_AS(parse_config(swap("\"epsilon\": 0.2", "\"epsilon\": 1.5")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(swap("[-9.0, 9.0]", "[9.0, -9.0]")),
                  ConfigError);
}

TEST_CASE("sin perturbation requires matching dimensions") {
  CHECK_THROWS_AS(make_perturbation("sin", 2, 1), ConfigError);
  CHECK_THROWS_AS(make_perturbation("fourier", 1, 1), ConfigError);
  const MapFn zero = make_perturbation("zero", 2, 3);
  CHECK(zero(Vec::Constant(2, 4.0)).norm() == 0.0);
  const MapFn t = make_perturbation("tanh", 2, 2);
  CHECK(t(Vec::Constant(2, 100.0)).norm() <= 1.0 + 1e-12);
}

TEST_CASE("canonical form is stable under key order and whitespace") {
  const char* permuted = R"({
    "trajectory": {"seed": 42, "n_steps": 10},
    "init": {"cov": [[1.0]], "mean": [0.0]},
    "sweep": {"test_functions": ["mean", "tanh"], "n_replicates": 20,
              "j_values": [16, 64, 256], "epsilon_values": [0.05, 0.1],
              "eps_slope_band": [0.7, 1.3], "j_slope_band": [-0.7, -0.3]},
    "filter": {"resample_threshold": 0.6, "name": "enkf",
               "pf_particles": 5000, "mean_field_min_j": 5000,
               "ensemble_size": 64},
    "grid": {"extent": [-9.0, 9.0], "padding_sigmas": 6.0,
             "joint_y_cells": 256, "cells": 1000},
    "model": {"perturbation": {"h": "tanh", "psi": "sin", "epsilon": 0.2},
              "gamma": [[0.5]], "sigma": [[0.5]], "h_offset": [0.0],
              "h_matrix": [[1.0]], "b_vector": [0.0], "a_matrix": [[0.9]],
              "dim_k": 1, "dim_d": 1}
  })";
  const AppConfig a = parse_config(kFullConfig);
  const AppConfig b = parse_config(permuted);
  CHECK(a.canonical == b.canonical);

  std::string changed(kFullConfig);
  changed.replace(changed.find("0.9"), 3, "0.8");
  CHECK(parse_config(changed).canonical != a.canonical);
}

TEST_CASE("sweep view carries the tuning fields") {
  const AppConfig cfg = parse_config(kFullConfig);
  const SweepConfig sc = to_sweep_config(cfg);
  CHECK(sc.base_seed == 42);
  CHECK(sc.n_steps == 10);
  CHECK(sc.j_values == cfg.j_values);
  CHECK(sc.epsilon_values == cfg.epsilon_values);
  CHECK(sc.n_replicates == 20);
  CHECK(sc.test_functions == cfg.test_functions);
  CHECK(sc.grid_cells == 1000);
  CHECK(sc.joint_y_cells == 256);
  CHECK(sc.grid_padding == 6.0);
  CHECK(sc.extent_lo == -9.0);
  CHECK(sc.extent_hi == 9.0);
  CHECK(sc.j_slope_lo == -0.7);
  CHECK(sc.j_slope_hi == -0.3);
  CHECK(sc.eps_slope_lo == 0.7);
  CHECK(sc.eps_slope_hi == 1.3);
  CHECK(sc.init_mean == cfg.init_mean);
  CHECK(sc.init_cov == cfg.init_cov);
}
