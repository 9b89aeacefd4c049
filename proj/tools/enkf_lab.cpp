#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enkf/config.hpp"
#include "enkf/kernels.hpp"
#include "enkf/report.hpp"
#include "enkf/rng.hpp"
#include "enkf/verify.hpp"

namespace {

using namespace enkf;

AppConfig load_with_override(const CliConfig& cli) {
  AppConfig cfg = load_config_file(cli.config_path);
  if (cli.has_seed) cfg.seed = cli.seed;
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

// State grid for single-run grid filters: the configured extent, or the
// closed-form envelope widened by the perturbation's horizon reach.
GridSpec filter_grid(const AppConfig& cfg, const GaussianMoments& init,
                     const Trajectory& traj) {
  if (cfg.has_extent) {
    return {GridAxis{cfg.extent_lo, cfg.extent_hi, cfg.grid_cells}};
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const KalmanState& s :
       run_kalman(affine_base(cfg.family), init, traj)) {
    const double sd = std::sqrt(s.moments.cov(0, 0));
    lo = std::min(lo, s.moments.mean[0] - cfg.grid_padding * sd);
    hi = std::max(hi, s.moments.mean[0] + cfg.grid_padding * sd);
  }
  if (cfg.family.epsilon > 0.0) {
    const double a = cfg.family.a_matrix.norm();
    double reach = 0.0;
    double pw = 1.0;
    for (int n = 0; n < traj.n_steps(); ++n) {
      reach += pw;
      pw *= a;
    }
    lo -= cfg.family.epsilon * reach;
    hi += cfg.family.epsilon * reach;
  }
  return {GridAxis{lo, hi, cfg.grid_cells}};
}

Trajectory load_or_simulate(const CliConfig& cli, const AppConfig& cfg) {
  if (!cli.trajectory_path.empty()) {
    return read_trajectory_csv(cli.trajectory_path);
  }
  auto [state, obs] = realize_perturbed(cfg.family);
  return simulate_trajectory(state, obs, cfg.init_mean, cfg.init_cov,
                             cfg.n_steps, cfg.seed);
}

int cmd_simulate(const CliConfig& cli) {
  const AppConfig cfg = load_with_override(cli);
  auto [state, obs] = realize_perturbed(cfg.family);
  const Trajectory traj = simulate_trajectory(
      state, obs, cfg.init_mean, cfg.init_cov, cfg.n_steps, cfg.seed);
  ensure_dir(cli.out_dir);
  const std::string path = cli.out_dir + "/trajectory.csv";
  write_trajectory_csv(traj, path);
  write_manifest(cli.out_dir, fnv1a64(cfg.canonical), cfg.seed, {path});
  std::cout << "wrote " << path << " (" << traj.n_steps() << " steps, seed "
            << cfg.seed << ")\n";
  return 0;
}

int cmd_filter(const CliConfig& cli) {
  const AppConfig cfg = load_with_override(cli);
  if (cfg.filter_name.empty()) {
    throw ConfigError("config: the filter subcommand needs a filter block");
  }
  auto [state, obs] = realize_perturbed(cfg.family);
  const GaussianMoments init{cfg.init_mean, cfg.init_cov};
  const Trajectory traj = load_or_simulate(cli, cfg);
  ensure_dir(cli.out_dir);

  std::vector<GaussianMoments> posteriors;
  std::vector<GridDensity> densities;
  const bool wants_grid =
      cfg.filter_name == "grid" || cfg.filter_name == "mean-field";
  if (wants_grid) {
    if (cfg.family.dim_d() != 1 || cfg.family.dim_k() != 1) {
      throw ConfigError("config: grid filters support dim_d = dim_k = 1");
    }
    GridRunOptions opts;
    opts.state_grid = filter_grid(cfg, init, traj);
    opts.y_axis = auto_y_axis(opts.state_grid, obs, cfg.joint_y_cells);
    opts.keep_densities = cli.dump_density_every > 0;
    const GridRunResult run =
        cfg.filter_name == "grid"
            ? run_grid_filter(state, obs, init, traj, opts)
            : run_mean_field_grid(state, obs, init, traj, opts);
    posteriors = run.posteriors;
    densities = run.densities;
  } else if (cfg.filter_name == "kalman") {
    const std::vector<KalmanState> states =
        run_kalman(affine_base(cfg.family), init, traj);
    for (std::size_t n = 1; n < states.size(); ++n) {
      posteriors.push_back(states[n].moments);
    }
  } else if (cfg.filter_name == "enkf") {
    posteriors = run_enkf(state, obs, init, traj, cfg.ensemble_size, cfg.seed)
                     .posteriors;
  } else if (cfg.filter_name == "pf") {
    posteriors = run_pf(state, obs, init, traj, cfg.pf_particles,
                        cfg.resample_threshold, cfg.seed)
                     .posteriors;
  } else {
    throw ConfigError("config: unknown filter '" + cfg.filter_name + "'");
  }

  std::vector<std::string> artifacts;
  const std::string post_path = cli.out_dir + "/posteriors.csv";
  write_posterior_csv(posteriors, post_path);
  artifacts.push_back(post_path);
  if (cli.dump_density_every > 0) {
    for (std::size_t i = 0; i < densities.size(); ++i) {
      const int step = static_cast<int>(i) + 1;
      if (step % cli.dump_density_every != 0) continue;
      const std::string path =
          cli.out_dir + "/density_step_" + std::to_string(step) + ".csv";
      write_density_csv(densities[i], path);
      artifacts.push_back(path);
    }
  }
  write_manifest(cli.out_dir, fnv1a64(cfg.canonical), cfg.seed, artifacts);
  std::cout << "filter " << cfg.filter_name << ": wrote " << post_path
            << " (" << posteriors.size() << " steps)\n";
  return 0;
}

int cmd_sweep(const CliConfig& cli, bool epsilon_sweep) {
  const AppConfig cfg = load_with_override(cli);
  const SweepConfig sweep = to_sweep_config(cfg);
  const SweepReport report =
      epsilon_sweep ? run_sweep_epsilon(sweep) : run_sweep_j(sweep);
  const ArtifactPaths arts = emit_report(report, cli.out_dir);
  write_manifest(cli.out_dir, fnv1a64(cfg.canonical), cfg.seed, arts.paths);

  for (std::size_t i = 0; i < report.rate_fits.size(); ++i) {
    std::cout << report.rate_labels[i] << ": slope "
              << report.rate_fits[i].slope << " (se "
              << report.rate_fits[i].slope_stderr << ")\n";
  }
  if (epsilon_sweep) {
    std::cout << "zero-epsilon d_g " << report.epsilon_zero_dg
              << ", discretization floor " << report.epsilon_floor
              << ", refinement delta " << report.refinement_delta << "\n";
  }
  std::cout << "wrote " << arts.paths.size() << " artifacts under "
            << cli.out_dir << "\n";

  if (!cli.assert_bands) return 0;
  bool ok = true;
  if (epsilon_sweep) {
    const double lo = sweep.eps_slope_lo;
    const double hi = sweep.eps_slope_hi;
    bool found = false;
    for (std::size_t i = 0; i < report.rate_labels.size(); ++i) {
      if (report.rate_labels[i].find("eps-rate") == std::string::npos) {
        continue;
      }
      found = true;
      const double s = report.rate_fits[i].slope;
      if (s < lo || s > hi) {
        std::cout << "[FAIL] " << report.rate_labels[i] << " slope " << s
                  << " outside [" << lo << ", " << hi << "]\n";
        ok = false;
      }
    }
    if (!found) {
      std::cout << "[FAIL] no epsilon rate fit (need >= 3 positive "
                   "epsilon values)\n";
      ok = false;
    }
  } else {
    const double lo = sweep.j_slope_lo;
    const double hi = sweep.j_slope_hi;
    bool found = false;
    for (std::size_t i = 0; i < report.rate_labels.size(); ++i) {
      if (report.rate_labels[i].rfind("J-rate", 0) != 0) continue;
      found = true;
      const double s = report.rate_fits[i].slope;
      if (s < lo || s > hi) {
        std::cout << "[FAIL] " << report.rate_labels[i] << " slope " << s
                  << " outside [" << lo << ", " << hi << "]\n";
        ok = false;
      }
    }
    if (!found) {
      std::cout << "[FAIL] no ensemble-size rate fit (need >= 3 J values)\n";
      ok = false;
    }
  }
  if (ok) std::cout << "[PASS] all slope bands hold\n";
  return ok ? 0 : 1;
}

int cmd_verify(const CliConfig& cli) {
  const std::uint64_t seed = cli.has_seed ? cli.seed : 1;
  const std::vector<CheckResult> results =
      cli.full_verify ? run_acceptance_criteria(seed, true)
                      : run_quick_checks(seed, true);
  print_check_table(results, std::cout);
  ensure_dir(cli.out_dir);
  write_manifest(cli.out_dir,
                 fnv1a64(cli.full_verify ? "verify --full" : "verify"), seed,
                 {});
  return all_pass(results) ? 0 : 1;
}

int cmd_plot(const CliConfig& cli) {
  const std::vector<ResultsRow> rows = parse_results_csv(cli.results_path);
  ensure_dir(cli.out_dir);
  const std::string path = cli.out_dir + "/rates.svg";
  write_rates_svg(rows, path);
  write_manifest(cli.out_dir, file_checksum(cli.results_path),
                 cli.has_seed ? cli.seed : 0, {path});
  std::cout << "wrote " << path << " (" << rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "enkf_lab: exact, ensemble and mean-field Bayesian filtering with "
      "grid-verified error metrics"};
  app.require_subcommand(1);

  CliConfig cli;
  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", cli.config_path, "JSON config file")
          ->required()
          ->check(CLI::ExistingFile);
    }
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&cli](std::uint64_t s) {
          cli.has_seed = true;
          cli.seed = s;
        },
        "override the config seed");
    cmd->add_option("--out", cli.out_dir, "output directory (default .)");
    cmd->add_option("--threads", cli.threads,
                    "worker thread cap (fallback: ENKF_LAB_THREADS)");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "draw one state/data trajectory and write it as CSV");
  add_common(sim, true);

  CLI::App* filter = app.add_subcommand(
      "filter", "run one filter over a trajectory, write per-step posteriors");
  add_common(filter, true);
  filter->add_option("--trajectory", cli.trajectory_path,
                     "precomputed trajectory CSV (default: simulate)")
      ->check(CLI::ExistingFile);
  filter
      ->add_option("--dump-density", cli.dump_density_every,
                   "write the grid density every k steps")
      ->check(CLI::PositiveNumber);

  CLI::App* sweep_j = app.add_subcommand(
      "sweep-j", "ensemble-size convergence sweep with rate fits");
  add_common(sweep_j, true);
  sweep_j->add_flag("--assert", cli.assert_bands,
                    "exit 1 when a slope band fails");

  CLI::App* sweep_eps = app.add_subcommand(
      "sweep-eps", "perturbation-size sweep of the mean-field error");
  add_common(sweep_eps, true);
  sweep_eps->add_flag("--assert", cli.assert_bands,
                      "exit 1 when a slope band fails");

  CLI::App* verify = app.add_subcommand(
      "verify", "run the invariant checks and print a pass/fail table");
  add_common(verify, false);
  verify->add_flag("--full", cli.full_verify,
                   "also run the full acceptance battery (minutes)");

  CLI::App* plot =
      app.add_subcommand("plot", "regenerate rates.svg from a results.csv");
  add_common(plot, false);
  plot->add_option("--results", cli.results_path, "existing results.csv")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  int threads = cli.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("ENKF_LAB_THREADS")) {
      threads = std::atoi(env);
    }
  }
  if (threads > 0) enkf::kernels::set_threads(threads);

  try {
    if (app.got_subcommand(sim)) return cmd_simulate(cli);
    if (app.got_subcommand(filter)) return cmd_filter(cli);
    if (app.got_subcommand(sweep_j)) return cmd_sweep(cli, false);
    if (app.got_subcommand(sweep_eps)) return cmd_sweep(cli, true);
    if (app.got_subcommand(verify)) return cmd_verify(cli);
    if (app.got_subcommand(plot)) return cmd_plot(cli);
  } catch (const enkf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;  // unreachable with require_subcommand(1)
}
