#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "enkf/filters.hpp"

namespace enkf {

// ---------------------------------------------------------------------------
// Test functions

// Registered test functions for the convergence studies, all dominated by
// the metric weight g(v) = 1 + |v|^2:
//   mean            phi(v) = v            (error = Euclidean norm of gap)
//   tanh            phi(v) = tanh(v_1)
//   clipped_square  phi(v) = min(|v|^2, 100)
enum class PhiKind { kMean, kTanh, kClippedSquare };

PhiKind parse_phi(const std::string& name);
std::string phi_name(PhiKind kind);

// ---------------------------------------------------------------------------
// Sweep configuration

struct SweepConfig {
  PerturbedAffineFamily family;  // epsilon field ignored; sweeps set it
  Vec init_mean;
  Mat init_cov;
  int n_steps = 10;
  std::vector<Eigen::Index> j_values;
  std::vector<double> epsilon_values;
  int n_replicates = 100;
  std::vector<std::string> test_functions = {"mean", "tanh",
                                             "clipped_square"};
  std::uint64_t base_seed = 0;

  // Grid resolution and extent (grid-referenced runs, d = K = 1).
  int grid_cells = 2000;
  int joint_y_cells = 512;
  double grid_padding = 8.0;     // sigmas beyond the Kalman envelope
  double extent_lo = 0.0;        // manual extent override when lo < hi
  double extent_hi = 0.0;

  // Pre-registered slope acceptance bands.
  double j_slope_lo = -0.65;
  double j_slope_hi = -0.35;
  double eps_slope_lo = 0.8;
  double eps_slope_hi = 1.2;

  bool parallel = true;
};

// Checks the declared invariants (j_values strictly increasing,
// epsilon_values within [0, 1], n_replicates >= 10, consistent shapes).
// Throws ConfigError.
void validate(const SweepConfig& config);

// ---------------------------------------------------------------------------
// Records and aggregates

// Per-run error trajectories against the run's reference filter.
struct RunRecord {
  int replicate = 0;
  Eigen::Index j = 0;
  double epsilon = 0.0;
  std::vector<double> mean_errors;              // per step
  std::vector<double> cov_errors;               // per step, Frobenius
  std::vector<std::vector<double>> phi_errors;  // [phi][step]
  std::vector<double> dg_values;                // per step (grid runs only)
  std::vector<double> gaps;                     // per step (grid runs only)
};

// Throws DomainError when any stored error is negative or non-finite.
void validate(const RunRecord& record);

// Aggregate over the replicates of one (J, epsilon) cell, final step.
struct CellAggregate {
  Eigen::Index j = 0;
  double epsilon = 0.0;
  std::vector<double> rms;         // [phi]
  std::vector<double> rms_stderr;  // [phi]
  double dg = 0.0;                 // d_g at final step (grid sweeps)
  double max_gap = 0.0;            // max_n Gaussianity gap (grid sweeps)
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

struct SweepReport {
  std::string kind;  // "sweep-j" | "sweep-eps"
  SweepConfig config;
  std::vector<RunRecord> records;
  std::vector<CellAggregate> cells;
  std::vector<RateFit> rate_fits;
  std::vector<std::string> rate_labels;  // parallel to rate_fits
  double epsilon_floor = 0.0;    // sweep-eps: d_g shift of the eps=0 run
                                 // under 2x resolution (measured floor)
  double epsilon_zero_dg = 0.0;  // sweep-eps: d_g of the eps=0 control run
  double refinement_delta = 0.0;  // sweep-eps: d_g change under 2x cells
                                  // at the largest epsilon
};

// ---------------------------------------------------------------------------
// Sweeps

// Ensemble-size sweep: for every (epsilon, J, replicate), run the EnKF on
// the replicate's own data realization and record per-step errors against
// that realization's reference filter (Kalman when epsilon = 0; grid true
// filter when epsilon > 0, which requires d = K = 1). The cell RMS
// therefore averages over data and ensemble noise together. Replicate
// trajectories reuse the same keys across epsilons and ensemble sizes, so
// cells differ only in what the bound says they differ in. Fits log RMS
// against log J per (phi, epsilon).
SweepReport run_sweep_j(const SweepConfig& config);

// Perturbation sweep (d = K = 1): for every epsilon, run the grid
// mean-field recursion and the grid true filter on the shared data
// realization; record d_g(mu^EK_n, mu_n) per step and the Gaussianity gap
// of the predicted joint per step. Fits log d_g(final) against log
// epsilon over the positive epsilons, measures the epsilon = 0
// discretization floor by rerunning the zero leg at doubled resolution,
// and reruns the largest epsilon at doubled resolution for a refinement
// delta.
SweepReport run_sweep_epsilon(const SweepConfig& config);

// ---------------------------------------------------------------------------
// Fitting and quadrature

// Ordinary least squares of log y on log x. Requires >= 3 points, all
// coordinates positive; throws InsufficientDataError / DomainError.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

// Midpoint-rule expectation of f under N(mean, var) over +/- 10 sigma.
double gaussian_expectation(double mean, double var,
                            const std::function<double(double)>& f,
                            int n_points = 4001);

// RMS of a sample of scalar errors plus the delta-method standard error
// of the RMS estimate.
void rms_with_stderr(const std::vector<double>& errors, double& rms,
                     double& stderr_out);

}  // namespace enkf
