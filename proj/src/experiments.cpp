#include "enkf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "enkf/linalg.hpp"
#include "enkf/rng.hpp"

namespace enkf {

namespace {

std::vector<PhiKind> parse_phi_list(const std::vector<std::string>& names) {
  if (names.empty()) {
    throw ConfigError("test_functions must name at least one function");
  }
  std::vector<PhiKind> kinds;
  kinds.reserve(names.size());
  for (const auto& n : names) kinds.push_back(parse_phi(n));
  return kinds;
}

double clipped_square(const Vec& v) {
  return std::min(v.squaredNorm(), 100.0);
}

double phi_scalar(const Vec& v, PhiKind kind) {
  switch (kind) {
    case PhiKind::kTanh:
      return std::tanh(v[0]);
    case PhiKind::kClippedSquare:
      return clipped_square(v);
    case PhiKind::kMean:
      break;
  }
  throw DomainError("phi_scalar: mean is vector-valued");
}

double ensemble_phi_average(const Mat& particles, PhiKind kind) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < particles.cols(); ++j) {
    acc += phi_scalar(particles.col(j), kind);
  }
  return acc / static_cast<double>(particles.cols());
}

// Per-step reference moments and test-function expectations.
struct ReferenceValues {
  std::vector<Vec> means;
  std::vector<Mat> covs;
  std::vector<std::vector<double>> phi;  // [step][phi]; 0 for the mean slot
};

ReferenceValues kalman_reference(const AffineModel& base,
                                 const GaussianMoments& init,
                                 const Trajectory& traj,
                                 const std::vector<PhiKind>& kinds) {
  ReferenceValues ref;
  const std::vector<KalmanState> states = run_kalman(base, init, traj);
  for (std::size_t n = 1; n < states.size(); ++n) {
    const GaussianMoments& m = states[n].moments;
    ref.means.push_back(m.mean);
    ref.covs.push_back(m.cov);
    std::vector<double> vals;
    for (PhiKind kind : kinds) {
      switch (kind) {
        case PhiKind::kMean:
          vals.push_back(0.0);
          break;
        case PhiKind::kTanh:
          vals.push_back(gaussian_expectation(
              m.mean[0], m.cov(0, 0),
              [](double x) { return std::tanh(x); }));
          break;
        case PhiKind::kClippedSquare:
          // Closed quadrature only for the scalar marginal = whole state.
          if (m.dim() != 1) {
            throw ConfigError(
                "clipped_square reference requires a 1-d state");
          }
          vals.push_back(gaussian_expectation(
              m.mean[0], m.cov(0, 0),
              [](double x) { return std::min(x * x, 100.0); }));
          break;
      }
    }
    ref.phi.push_back(std::move(vals));
  }
  return ref;
}

ReferenceValues grid_reference(const GridRunResult& run,
                               const std::vector<PhiKind>& kinds) {
  ReferenceValues ref;
  for (std::size_t n = 0; n < run.posteriors.size(); ++n) {
    ref.means.push_back(run.posteriors[n].mean);
    ref.covs.push_back(run.posteriors[n].cov);
    std::vector<double> vals;
    for (PhiKind kind : kinds) {
      if (kind == PhiKind::kMean) {
        vals.push_back(0.0);
      } else {
        vals.push_back(grid_expectation(
            run.densities[n], [kind](const Vec& v) {
              return phi_scalar(v, kind);
            }));
      }
    }
    ref.phi.push_back(std::move(vals));
  }
  return ref;
}

// One EnKF run against a precomputed reference trajectory of values.
RunRecord enkf_error_run(const StateModel& model, const ObservationModel& obs,
                         const SweepConfig& config, const Trajectory& traj,
                         const ReferenceValues& ref,
                         const std::vector<PhiKind>& kinds, Eigen::Index j,
                         double epsilon, int replicate, std::uint64_t run_key,
                         bool parallel) {
  RunRecord rec;
  rec.replicate = replicate;
  rec.j = j;
  rec.epsilon = epsilon;
  rec.phi_errors.resize(kinds.size());
  EnkfState state{
      sample_ensemble(config.init_mean, config.init_cov, j, run_key, parallel),
      0,
      {run_key}};
  for (int n = 0; n < traj.n_steps(); ++n) {
    state = enkf_step(state, traj.observations[n], model, obs, parallel);
    const GaussianMoments emp = empirical_moments(state.ensemble, parallel);
    const std::size_t sn = static_cast<std::size_t>(n);
    rec.mean_errors.push_back((emp.mean - ref.means[sn]).norm());
    rec.cov_errors.push_back((emp.cov - ref.covs[sn]).norm());
    for (std::size_t p = 0; p < kinds.size(); ++p) {
      if (kinds[p] == PhiKind::kMean) {
        rec.phi_errors[p].push_back(rec.mean_errors.back());
      } else {
        const double avg =
            ensemble_phi_average(state.ensemble.particles, kinds[p]);
        rec.phi_errors[p].push_back(std::abs(avg - ref.phi[sn][p]));
      }
    }
  }
  return rec;
}

// State-grid extent for the d = 1 grid-referenced runs: union of the
// Kalman envelopes (affine base) over the given trajectories, padded, plus
// a drift margin for the size-epsilon perturbation compounded over N steps.
GridSpec reference_grid(const SweepConfig& config, const AffineModel& base,
                        const std::vector<Trajectory>& trajectories,
                        double eps_max, int cells) {
  if (config.extent_lo < config.extent_hi) {
    return {{config.extent_lo, config.extent_hi, cells}};
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const GaussianMoments init{config.init_mean, config.init_cov};
  for (const Trajectory& traj : trajectories) {
    for (const KalmanState& s : run_kalman(base, init, traj)) {
      const double sd = std::sqrt(s.moments.cov(0, 0));
      lo = std::min(lo, s.moments.mean[0] - config.grid_padding * sd);
      hi = std::max(hi, s.moments.mean[0] + config.grid_padding * sd);
    }
  }
  const double a_norm = base.a.norm();
  double margin = 0.0;
  double a_pow = 1.0;
  for (int k = 0; k < config.n_steps; ++k) {
    margin += a_pow;
    a_pow *= a_norm;
  }
  margin *= eps_max;
  return {{lo - margin, hi + margin, cells}};
}

CellAggregate aggregate_cell(const std::vector<RunRecord>& records,
                             std::size_t n_phi) {
  CellAggregate cell;
  cell.j = records.front().j;
  cell.epsilon = records.front().epsilon;
  for (std::size_t p = 0; p < n_phi; ++p) {
    std::vector<double> finals;
    finals.reserve(records.size());
    for (const RunRecord& r : records) finals.push_back(r.phi_errors[p].back());
    double rms = 0.0;
    double se = 0.0;
    rms_with_stderr(finals, rms, se);
    cell.rms.push_back(rms);
    cell.rms_stderr.push_back(se);
  }
  return cell;
}

}  // namespace

PhiKind parse_phi(const std::string& name) {
  if (name == "mean") return PhiKind::kMean;
  if (name == "tanh") return PhiKind::kTanh;
  if (name == "clipped_square") return PhiKind::kClippedSquare;
  throw ConfigError("unknown test function '" + name +
                    "' (expected mean | tanh | clipped_square)");
}

std::string phi_name(PhiKind kind) {
  switch (kind) {
    case PhiKind::kMean:
      return "mean";
    case PhiKind::kTanh:
      return "tanh";
    case PhiKind::kClippedSquare:
      return "clipped_square";
  }
  return "unknown";
}

void validate(const SweepConfig& config) {
  const int d = config.family.dim_d();
  if (d < 1 || config.family.dim_k() < 1) {
    throw ConfigError("sweep config: model dimensions must be positive");
  }
  if (config.init_mean.size() != d || config.init_cov.rows() != d ||
      config.init_cov.cols() != d) {
    throw ConfigError("sweep config: init moments do not match state dim");
  }
  if (config.n_steps < 1) throw ConfigError("sweep config: n_steps >= 1");
  if (config.n_replicates < 10) {
    throw ConfigError("sweep config: n_replicates must be >= 10");
  }
  for (std::size_t i = 0; i < config.j_values.size(); ++i) {
    if (config.j_values[i] < 2) {
      throw ConfigError("sweep config: ensemble sizes must be >= 2");
    }
    if (i > 0 && config.j_values[i] <= config.j_values[i - 1]) {
      throw ConfigError("sweep config: j_values must be strictly increasing");
    }
  }
  for (double e : config.epsilon_values) {
    if (!(e >= 0.0 && e <= 1.0)) {
      throw ConfigError("sweep config: epsilon values must lie in [0, 1]");
    }
  }
  parse_phi_list(config.test_functions);
  if (config.grid_cells < 16 || config.joint_y_cells < 16) {
    throw ConfigError("sweep config: grid resolutions must be >= 16 cells");
  }
  if (!(config.grid_padding > 0.0)) {
    throw ConfigError("sweep config: grid_padding must be positive");
  }
}

void validate(const RunRecord& record) {
  auto check = [](const std::vector<double>& xs, const char* what) {
    for (double x : xs) {
      if (!std::isfinite(x) || x < 0.0) {
        throw DomainError(std::string("run record: ") + what +
                          " contains a negative or non-finite value");
      }
    }
  };
  check(record.mean_errors, "mean errors");
  check(record.cov_errors, "cov errors");
  for (const auto& pe : record.phi_errors) check(pe, "test-function errors");
  check(record.dg_values, "d_g values");
  check(record.gaps, "Gaussianity gaps");
}

SweepReport run_sweep_j(const SweepConfig& config) {
  validate(config);
  if (config.j_values.empty()) {
    throw ConfigError("run_sweep_j: j_values must not be empty");
  }
  const std::vector<PhiKind> kinds = parse_phi_list(config.test_functions);
  const std::vector<double> eps_list = config.epsilon_values.empty()
                                           ? std::vector<double>{0.0}
                                           : config.epsilon_values;
  SweepReport report;
  report.kind = "sweep-j";
  report.config = config;
  const GaussianMoments init{config.init_mean, config.init_cov};

  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    const double eps = eps_list[ei];
    PerturbedAffineFamily family = config.family;
    family.epsilon = eps;
    const auto [model, obs] = realize_perturbed(family);

    // Every replicate filters its own data realization, so the cell RMS
    // averages over data as well as ensemble noise. Trajectory keys do not
    // involve ei or ji: ensemble sizes are compared on the same data, and
    // the model varies smoothly in epsilon on shared noise draws.
    const std::size_t n_reps = static_cast<std::size_t>(config.n_replicates);
    std::vector<Trajectory> trajs(n_reps);
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
      const std::uint64_t traj_seed = derive_key(
          config.base_seed,
          {stream::kTrajectory, static_cast<std::uint64_t>(rep)});
      trajs[rep] =
          simulate_trajectory(model, obs, config.init_mean, config.init_cov,
                              config.n_steps, traj_seed);
    }

    std::vector<ReferenceValues> refs(n_reps);
    if (eps == 0.0) {
      for (std::size_t rep = 0; rep < n_reps; ++rep) {
        refs[rep] = kalman_reference(affine_base(family), init, trajs[rep],
                                     kinds);
      }
    } else {
      if (config.family.dim_d() != 1 || config.family.dim_k() != 1) {
        throw ConfigError(
            "run_sweep_j: epsilon > 0 needs the d = K = 1 grid reference");
      }
      GridRunOptions opts;
      opts.state_grid = reference_grid(config, affine_base(family), trajs,
                                       eps, config.grid_cells);
      opts.keep_densities = true;
      opts.parallel = false;
      const GridPredictOperator op(opts.state_grid, model, config.parallel);
      opts.predict_op = &op;
#pragma omp parallel for schedule(static) if (config.parallel)
      for (int rep = 0; rep < config.n_replicates; ++rep) {
        const std::size_t r = static_cast<std::size_t>(rep);
        refs[r] = grid_reference(run_grid_filter(model, obs, init, trajs[r],
                                                 opts),
                                 kinds);
      }
    }

    for (std::size_t ji = 0; ji < config.j_values.size(); ++ji) {
      const Eigen::Index j = config.j_values[ji];
      std::vector<RunRecord> cell_records(
          static_cast<std::size_t>(config.n_replicates));
#pragma omp parallel for schedule(static) if (config.parallel)
      for (int rep = 0; rep < config.n_replicates; ++rep) {
        const std::uint64_t run_key =
            derive_key(config.base_seed,
                       {stream::kSweepJ, static_cast<std::uint64_t>(ei),
                        static_cast<std::uint64_t>(ji),
                        static_cast<std::uint64_t>(rep)});
        // Replicates own the parallelism; the filter runs serially inside
        // so results do not depend on the thread count.
        const std::size_t r = static_cast<std::size_t>(rep);
        cell_records[r] =
            enkf_error_run(model, obs, config, trajs[r], refs[r], kinds, j,
                           eps, rep, run_key, false);
      }
      report.cells.push_back(aggregate_cell(cell_records, kinds.size()));
      for (RunRecord& r : cell_records) {
        validate(r);
        report.records.push_back(std::move(r));
      }
    }

    if (config.j_values.size() >= 3) {
      for (std::size_t p = 0; p < kinds.size(); ++p) {
        std::vector<std::pair<double, double>> points;
        for (const CellAggregate& cell : report.cells) {
          if (cell.epsilon == eps) {
            points.emplace_back(static_cast<double>(cell.j), cell.rms[p]);
          }
        }
        report.rate_fits.push_back(fit_rate(points));
        report.rate_labels.push_back("J-rate phi=" + phi_name(kinds[p]) +
                                     " eps=" + std::to_string(eps));
      }
    }
  }
  return report;
}

namespace {

// One epsilon leg of the perturbation sweep: grid true filter (with gap
// tracking) and grid mean-field run on the shared data realization.
struct EpsilonLeg {
  RunRecord record;
  GridRunResult true_run;
  GridRunResult mf_run;
};

EpsilonLeg run_epsilon_leg(const SweepConfig& config, double eps,
                           const GridSpec& grid,
                           const std::vector<PhiKind>& kinds,
                           int joint_y_cells) {
  PerturbedAffineFamily family = config.family;
  family.epsilon = eps;
  const auto [model, obs] = realize_perturbed(family);
  const Trajectory traj =
      simulate_trajectory(model, obs, config.init_mean, config.init_cov,
                          config.n_steps, config.base_seed);
  const GaussianMoments init{config.init_mean, config.init_cov};

  GridRunOptions opts;
  opts.state_grid = grid;
  opts.y_axis = auto_y_axis(grid, obs, joint_y_cells);
  opts.track_gap = true;
  opts.keep_densities = true;
  opts.parallel = config.parallel;

  EpsilonLeg leg;
  leg.true_run = run_grid_filter(model, obs, init, traj, opts);
  GridRunOptions mf_opts = opts;
  mf_opts.track_gap = false;
  leg.mf_run = run_mean_field_grid(model, obs, init, traj, mf_opts);

  RunRecord& rec = leg.record;
  rec.replicate = 0;
  rec.j = 0;
  rec.epsilon = eps;
  rec.phi_errors.resize(kinds.size());
  rec.gaps = leg.true_run.gaps;
  for (int n = 0; n < traj.n_steps(); ++n) {
    const std::size_t sn = static_cast<std::size_t>(n);
    const GridDensity& mf = leg.mf_run.densities[sn];
    const GridDensity& tr = leg.true_run.densities[sn];
    rec.dg_values.push_back(weighted_tv(mf, tr, config.parallel));
    rec.mean_errors.push_back((leg.mf_run.posteriors[sn].mean -
                               leg.true_run.posteriors[sn].mean)
                                  .norm());
    rec.cov_errors.push_back(
        (leg.mf_run.posteriors[sn].cov - leg.true_run.posteriors[sn].cov)
            .norm());
    for (std::size_t p = 0; p < kinds.size(); ++p) {
      if (kinds[p] == PhiKind::kMean) {
        rec.phi_errors[p].push_back(rec.mean_errors.back());
      } else {
        const PhiKind kind = kinds[p];
        auto phi = [kind](const Vec& v) { return phi_scalar(v, kind); };
        rec.phi_errors[p].push_back(
            std::abs(grid_expectation(mf, phi) - grid_expectation(tr, phi)));
      }
    }
  }
  validate(rec);
  return leg;
}

}  // namespace

SweepReport run_sweep_epsilon(const SweepConfig& config) {
  validate(config);
  if (config.family.dim_d() != 1 || config.family.dim_k() != 1) {
    throw ConfigError("run_sweep_epsilon: requires d = K = 1");
  }
  if (config.epsilon_values.empty()) {
    throw ConfigError("run_sweep_epsilon: epsilon_values must not be empty");
  }
  const std::vector<PhiKind> kinds = parse_phi_list(config.test_functions);
  SweepReport report;
  report.kind = "sweep-eps";
  report.config = config;

  // Shared state grid: Kalman envelopes of every leg's trajectory (all
  // legs share the trajectory seed, so data varies smoothly in epsilon).
  double eps_max = 0.0;
  std::vector<Trajectory> trajectories;
  for (double eps : config.epsilon_values) {
    eps_max = std::max(eps_max, eps);
    PerturbedAffineFamily family = config.family;
    family.epsilon = eps;
    const auto [model, obs] = realize_perturbed(family);
    trajectories.push_back(
        simulate_trajectory(model, obs, config.init_mean, config.init_cov,
                            config.n_steps, config.base_seed));
  }
  const AffineModel base = affine_base(config.family);
  const GridSpec grid = reference_grid(config, base, trajectories, eps_max,
                                       config.grid_cells);

  // Epsilon = 0 control leg. With no perturbation the transport step is
  // exact in the continuum, so any reported d_g is resolution error. The
  // floor is measured, not assumed: rerun the leg at doubled resolution
  // and take the d_g shift. A discretization error of order >= 1 moves by
  // at least half its size under refinement, so a zero-epsilon value
  // within twice the shift is resolution-limited rather than a real
  // mean-field discrepancy (which would be resolution-independent and
  // barely move).
  {
    const EpsilonLeg zero =
        run_epsilon_leg(config, 0.0, grid, kinds, config.joint_y_cells);
    report.epsilon_zero_dg = zero.record.dg_values.back();
    GridSpec fine_grid = grid;
    fine_grid[0].cells = static_cast<int>(
        std::min<Eigen::Index>(2 * config.grid_cells, kMaxDenseCells));
    const EpsilonLeg fine_zero = run_epsilon_leg(
        config, 0.0, fine_grid, kinds, 2 * config.joint_y_cells);
    report.epsilon_floor = std::abs(report.epsilon_zero_dg -
                                    fine_zero.record.dg_values.back());
  }

  double dg_at_max = 0.0;
  for (double eps : config.epsilon_values) {
    const EpsilonLeg leg =
        run_epsilon_leg(config, eps, grid, kinds, config.joint_y_cells);
    CellAggregate cell;
    cell.j = 0;
    cell.epsilon = eps;
    for (std::size_t p = 0; p < kinds.size(); ++p) {
      cell.rms.push_back(leg.record.phi_errors[p].back());
      cell.rms_stderr.push_back(0.0);
    }
    cell.dg = leg.record.dg_values.back();
    cell.max_gap =
        *std::max_element(leg.record.gaps.begin(), leg.record.gaps.end());
    if (eps == eps_max) dg_at_max = cell.dg;
    report.cells.push_back(cell);
    report.records.push_back(leg.record);
  }

  std::vector<std::pair<double, double>> points;
  for (const CellAggregate& cell : report.cells) {
    if (cell.epsilon > 0.0) points.emplace_back(cell.epsilon, cell.dg);
  }
  if (points.size() >= 3) {
    report.rate_fits.push_back(fit_rate(points));
    report.rate_labels.push_back("eps-rate dg");
  }

  // Refinement control at the largest epsilon: double both resolutions
  // (capped by the dense-operator limit) and record the d_g shift.
  if (eps_max > 0.0) {
    SweepConfig refined = config;
    refined.grid_cells = static_cast<int>(
        std::min<Eigen::Index>(2 * config.grid_cells, kMaxDenseCells));
    GridSpec fine_grid = grid;
    fine_grid[0].cells = refined.grid_cells;
    const EpsilonLeg fine = run_epsilon_leg(refined, eps_max, fine_grid,
                                            kinds, 2 * config.joint_y_cells);
    report.refinement_delta =
        std::abs(fine.record.dg_values.back() - dg_at_max);
  }
  return report;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) {
    throw InsufficientDataError("fit_rate: needs at least 3 points");
  }
  const std::size_t n = points.size();
  std::vector<double> lx(n);
  std::vector<double> ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(points[i].first > 0.0) || !(points[i].second > 0.0)) {
      throw DomainError("fit_rate: coordinates must be strictly positive");
    }
    lx[i] = std::log(points[i].first);
    ly[i] = std::log(points[i].second);
  }
  const double nd = static_cast<double>(n);
  double x_bar = 0.0;
  double y_bar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x_bar += lx[i];
    y_bar += ly[i];
  }
  x_bar /= nd;
  y_bar /= nd;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - x_bar) * (lx[i] - x_bar);
    sxy += (lx[i] - x_bar) * (ly[i] - y_bar);
  }
  if (!(sxx > 0.0)) {
    throw DomainError("fit_rate: x values must not be identical");
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_bar - fit.slope * x_bar;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ssr += r * r;
  }
  fit.slope_stderr = std::sqrt(ssr / (nd - 2.0) / sxx);
  return fit;
}

double gaussian_expectation(double mean, double var,
                            const std::function<double(double)>& f,
                            int n_points) {
  if (!(var > 0.0)) {
    throw DomainError("gaussian_expectation: variance must be positive");
  }
  if (n_points < 3) {
    throw DomainError("gaussian_expectation: needs at least 3 points");
  }
  const double sd = std::sqrt(var);
  const double lo = mean - 10.0 * sd;
  const double step = 20.0 * sd / n_points;
  const double norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
  double acc = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double x = lo + (i + 0.5) * step;
    const double z = (x - mean) / sd;
    acc += f(x) * std::exp(-0.5 * z * z);
  }
  return acc * norm * step;
}

void rms_with_stderr(const std::vector<double>& errors, double& rms,
                     double& stderr_out) {
  if (errors.empty()) {
    throw InsufficientDataError("rms_with_stderr: empty sample");
  }
  const double n = static_cast<double>(errors.size());
  double mean_sq = 0.0;
  for (double e : errors) mean_sq += e * e;
  mean_sq /= n;
  rms = std::sqrt(mean_sq);
  if (errors.size() < 2 || !(rms > 0.0)) {
    stderr_out = 0.0;
    return;
  }
  double var_sq = 0.0;
  for (double e : errors) {
    var_sq += (e * e - mean_sq) * (e * e - mean_sq);
  }
  var_sq /= (n - 1.0);
  // Delta method: se(sqrt(m)) = se(m) / (2 sqrt(m)).
  stderr_out = std::sqrt(var_sq / n) / (2.0 * rms);
}

}  // namespace enkf
