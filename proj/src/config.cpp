#include "enkf/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace enkf {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key '" + item.key() + "' in " +
                        where);
    }
  }
}

const json& need(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("config: missing key '" + std::string(key) + "' in " +
                      where);
  }
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError("config: " + where + " must be a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) {
    throw ConfigError("config: " + where + " must be an integer");
  }
  return v.get<std::int64_t>();
}

Vec parse_vec(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError("config: " + where + " must be a non-empty array");
  }
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] =
        as_number(v[i], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

Mat parse_mat(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
    throw ConfigError("config: " + where +
                      " must be a non-empty array of rows");
  }
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].size();
  Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_where = where + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) {
      throw ConfigError("config: " + row_where + " has ragged length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_number(v[r][c], row_where + "[" + std::to_string(c) + "]");
    }
  }
  return out;
}

void parse_model(const json& m, AppConfig& out) {
  require_keys(m, "model",
               {"dim_d", "dim_k", "a_matrix", "b_vector", "h_matrix",
                "h_offset", "sigma", "gamma", "perturbation"});
  const int d = static_cast<int>(as_integer(need(m, "dim_d", "model"),
                                            "model.dim_d"));
  const int k = static_cast<int>(as_integer(need(m, "dim_k", "model"),
                                            "model.dim_k"));
  if (d < 1 || k < 1) throw ConfigError("config: model dims must be >= 1");
  out.family.a_matrix = parse_mat(need(m, "a_matrix", "model"),
                                  "model.a_matrix");
  out.family.b_vector = parse_vec(need(m, "b_vector", "model"),
                                  "model.b_vector");
  out.family.h_matrix = parse_mat(need(m, "h_matrix", "model"),
                                  "model.h_matrix");
  out.family.h_offset = parse_vec(need(m, "h_offset", "model"),
                                  "model.h_offset");
  out.family.sigma = parse_mat(need(m, "sigma", "model"), "model.sigma");
  out.family.gamma = parse_mat(need(m, "gamma", "model"), "model.gamma");
  if (out.family.a_matrix.rows() != d || out.family.a_matrix.cols() != d ||
      out.family.b_vector.size() != d || out.family.h_matrix.rows() != k ||
      out.family.h_matrix.cols() != d || out.family.h_offset.size() != k ||
      out.family.sigma.rows() != d || out.family.sigma.cols() != d ||
      out.family.gamma.rows() != k || out.family.gamma.cols() != k) {
    throw ConfigError("config: model block shapes do not match dim_d/dim_k");
  }
  out.family.epsilon = 0.0;
  if (m.contains("perturbation")) {
    const json& p = m["perturbation"];
    require_keys(p, "model.perturbation", {"epsilon", "psi", "h"});
    if (p.contains("epsilon")) {
      out.family.epsilon =
          as_number(p["epsilon"], "model.perturbation.epsilon");
      if (!(out.family.epsilon >= 0.0 && out.family.epsilon <= 1.0)) {
        throw ConfigError(
            "config: model.perturbation.epsilon must lie in [0, 1]");
      }
    }
    if (p.contains("psi")) {
      if (!p["psi"].is_string()) {
        throw ConfigError("config: model.perturbation.psi must be a string");
      }
      out.psi_pert_name = p["psi"].get<std::string>();
    }
    if (p.contains("h")) {
      if (!p["h"].is_string()) {
        throw ConfigError("config: model.perturbation.h must be a string");
      }
      out.h_pert_name = p["h"].get<std::string>();
    }
  }
  out.family.psi_perturbation = make_perturbation(out.psi_pert_name, d, d);
  out.family.h_perturbation = make_perturbation(out.h_pert_name, d, k);
}

void parse_init(const json& b, AppConfig& out) {
  require_keys(b, "init", {"mean", "cov"});
  out.init_mean = parse_vec(need(b, "mean", "init"), "init.mean");
  out.init_cov = parse_mat(need(b, "cov", "init"), "init.cov");
  if (out.init_mean.size() != out.family.dim_d() ||
      out.init_cov.rows() != out.family.dim_d() ||
      out.init_cov.cols() != out.family.dim_d()) {
    throw ConfigError("config: init shapes do not match model.dim_d");
  }
}

void parse_trajectory(const json& b, AppConfig& out) {
  require_keys(b, "trajectory", {"n_steps", "seed"});
  out.n_steps = static_cast<int>(
      as_integer(need(b, "n_steps", "trajectory"), "trajectory.n_steps"));
  if (out.n_steps < 1) throw ConfigError("config: trajectory.n_steps >= 1");
  if (b.contains("seed")) {
    const std::int64_t s = as_integer(b["seed"], "trajectory.seed");
    if (s < 0) throw ConfigError("config: trajectory.seed must be >= 0");
    out.seed = static_cast<std::uint64_t>(s);
  }
}

void parse_grid(const json& b, AppConfig& out) {
  require_keys(b, "grid",
               {"cells", "joint_y_cells", "padding_sigmas", "extent"});
  if (b.contains("cells")) {
    out.grid_cells =
        static_cast<int>(as_integer(b["cells"], "grid.cells"));
  }
  if (b.contains("joint_y_cells")) {
    out.joint_y_cells = static_cast<int>(
        as_integer(b["joint_y_cells"], "grid.joint_y_cells"));
  }
  if (b.contains("padding_sigmas")) {
    out.grid_padding = as_number(b["padding_sigmas"], "grid.padding_sigmas");
  }
  if (b.contains("extent")) {
    const Vec e = parse_vec(b["extent"], "grid.extent");
    if (e.size() != 2 || !(e[0] < e[1])) {
      throw ConfigError("config: grid.extent must be [lo, hi] with lo < hi");
    }
    out.has_extent = true;
    out.extent_lo = e[0];
    out.extent_hi = e[1];
  }
}

void parse_filter(const json& b, AppConfig& out) {
  require_keys(b, "filter",
               {"name", "ensemble_size", "pf_particles", "mean_field_min_j",
                "resample_threshold"});
  const json& name = need(b, "name", "filter");
  if (!name.is_string()) {
    throw ConfigError("config: filter.name must be a string");
  }
  out.filter_name = name.get<std::string>();
  if (out.filter_name != "grid" && out.filter_name != "kalman" &&
      out.filter_name != "enkf" && out.filter_name != "mean-field" &&
      out.filter_name != "pf") {
    throw ConfigError(
        "config: filter.name must be grid | kalman | enkf | mean-field | pf");
  }
  if (b.contains("ensemble_size")) {
    out.ensemble_size = as_integer(b["ensemble_size"], "filter.ensemble_size");
    if (out.ensemble_size < 2) {
      throw ConfigError("config: filter.ensemble_size >= 2");
    }
  }
  if (b.contains("pf_particles")) {
    out.pf_particles = as_integer(b["pf_particles"], "filter.pf_particles");
    if (out.pf_particles < 2) {
      throw ConfigError("config: filter.pf_particles >= 2");
    }
  }
  if (b.contains("mean_field_min_j")) {
    out.mean_field_min_j =
        as_integer(b["mean_field_min_j"], "filter.mean_field_min_j");
  }
  if (b.contains("resample_threshold")) {
    out.resample_threshold =
        as_number(b["resample_threshold"], "filter.resample_threshold");
    if (!(out.resample_threshold >= 0.0 && out.resample_threshold <= 1.0)) {
      throw ConfigError("config: filter.resample_threshold in [0, 1]");
    }
  }
}

void parse_sweep(const json& b, AppConfig& out) {
  require_keys(b, "sweep",
               {"j_values", "epsilon_values", "n_replicates",
                "test_functions", "j_slope_band", "eps_slope_band"});
  if (b.contains("j_values")) {
    out.j_values.clear();
    for (std::size_t i = 0; i < b["j_values"].size(); ++i) {
      out.j_values.push_back(as_integer(
          b["j_values"][i], "sweep.j_values[" + std::to_string(i) + "]"));
    }
  }
  if (b.contains("epsilon_values")) {
    const Vec e = parse_vec(b["epsilon_values"], "sweep.epsilon_values");
    out.epsilon_values.assign(e.data(), e.data() + e.size());
  }
  if (b.contains("n_replicates")) {
    out.n_replicates =
        static_cast<int>(as_integer(b["n_replicates"], "sweep.n_replicates"));
  }
  if (b.contains("test_functions")) {
    if (!b["test_functions"].is_array() || b["test_functions"].empty()) {
      throw ConfigError(
          "config: sweep.test_functions must be a non-empty array");
    }
    out.test_functions.clear();
    for (const auto& t : b["test_functions"]) {
      if (!t.is_string()) {
        throw ConfigError("config: sweep.test_functions entries are strings");
      }
      out.test_functions.push_back(t.get<std::string>());
    }
  }
  const auto parse_band = [&](const char* key, double& lo, double& hi) {
    if (!b.contains(key)) return;
    const Vec band = parse_vec(b[key], std::string("sweep.") + key);
    if (band.size() != 2 || !(band[0] < band[1])) {
      throw ConfigError(std::string("config: sweep.") + key +
                        " must be [lo, hi] with lo < hi");
    }
    lo = band[0];
    hi = band[1];
  };
  parse_band("j_slope_band", out.j_slope_lo, out.j_slope_hi);
  parse_band("eps_slope_band", out.eps_slope_lo, out.eps_slope_hi);
}

}  // namespace

AppConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: root must be an object");
  require_keys(root, "root",
               {"model", "init", "trajectory", "grid", "filter", "sweep"});
  AppConfig out;
  parse_model(need(root, "model", "root"), out);
  parse_init(need(root, "init", "root"), out);
  parse_trajectory(need(root, "trajectory", "root"), out);
  if (root.contains("grid")) parse_grid(root["grid"], out);
  if (root.contains("filter")) parse_filter(root["filter"], out);
  if (root.contains("sweep")) parse_sweep(root["sweep"], out);
  out.canonical = root.dump();  // nlohmann::json orders keys, so this is
                                // a canonical form suitable for hashing
  return out;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

MapFn make_perturbation(const std::string& name, int in_dim, int out_dim) {
  if (name == "zero") return zero_map(out_dim);
  if (name == "sin") {
    if (in_dim != out_dim) {
      throw ConfigError(
          "config: sin perturbation needs matching in/out dimensions");
    }
    return sin_perturbation(out_dim);
  }
  if (name == "tanh") return tanh_perturbation(in_dim, out_dim);
  throw ConfigError("config: unknown perturbation '" + name +
                    "' (expected zero | sin | tanh)");
}

SweepConfig to_sweep_config(const AppConfig& config) {
  SweepConfig sweep;
  sweep.family = config.family;
  sweep.init_mean = config.init_mean;
  sweep.init_cov = config.init_cov;
  sweep.n_steps = config.n_steps;
  sweep.j_values = config.j_values;
  sweep.epsilon_values = config.epsilon_values;
  sweep.n_replicates = config.n_replicates;
  sweep.test_functions = config.test_functions;
  sweep.base_seed = config.seed;
  sweep.grid_cells = config.grid_cells;
  sweep.joint_y_cells = config.joint_y_cells;
  sweep.grid_padding = config.grid_padding;
  if (config.has_extent) {
    sweep.extent_lo = config.extent_lo;
    sweep.extent_hi = config.extent_hi;
  }
  sweep.j_slope_lo = config.j_slope_lo;
  sweep.j_slope_hi = config.j_slope_hi;
  sweep.eps_slope_lo = config.eps_slope_lo;
  sweep.eps_slope_hi = config.eps_slope_hi;
  return sweep;
}

}  // namespace enkf
