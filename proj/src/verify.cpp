#include "enkf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "enkf/kernels.hpp"
#include "enkf/linalg.hpp"
#include "enkf/rng.hpp"

namespace enkf {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

// Canonical scalar test system: v' = 0.9 v + noise, y = v + noise.
PerturbedAffineFamily linear_family_1d() {
  PerturbedAffineFamily f;
  f.a_matrix = Mat::Constant(1, 1, 0.9);
  f.b_vector = Vec::Zero(1);
  f.h_matrix = Mat::Identity(1, 1);
  f.h_offset = Vec::Zero(1);
  f.psi_perturbation = zero_map(1);
  f.h_perturbation = zero_map(1);
  f.epsilon = 0.0;
  f.sigma = Mat::Constant(1, 1, 0.5);
  f.gamma = Mat::Constant(1, 1, 0.5);
  return f;
}

// Same base dynamics with smooth bounded-derivative departures.
PerturbedAffineFamily perturbed_family_1d() {
  PerturbedAffineFamily f = linear_family_1d();
  // More state noise than the linear benchmark family: it keeps the d_g
  // response near-linear through the largest perturbation size (the
  // diffusion dominates the sin/tanh curvature), which is the regime the
  // near-linear checks are about.
  f.sigma = Mat::Constant(1, 1, 1.0);
  f.psi_perturbation = sin_perturbation(1);
  f.h_perturbation = tanh_perturbation(1, 1);
  return f;
}

PerturbedAffineFamily linear_family_2d() {
  PerturbedAffineFamily f;
  f.a_matrix = Mat(2, 2);
  f.a_matrix << 0.9, 0.12, -0.08, 0.8;
  f.b_vector = Vec::Zero(2);
  f.h_matrix = Mat(1, 2);
  f.h_matrix << 1.0, 0.5;
  f.h_offset = Vec::Zero(1);
  f.psi_perturbation = zero_map(2);
  f.h_perturbation = zero_map(1);
  f.epsilon = 0.0;
  f.sigma = Mat(2, 2);
  f.sigma << 0.5, 0.1, 0.1, 0.4;
  f.gamma = Mat::Constant(1, 1, 0.5);
  return f;
}

GaussianMoments standard_init(int d) {
  return GaussianMoments{Vec::Zero(d), Mat::Identity(d, d)};
}

// Scalar grid wide enough for every filtered marginal of the run.
GridSpec envelope_axis(const std::vector<KalmanState>& states, double pad,
                       int cells) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const KalmanState& s : states) {
    const double sd = std::sqrt(s.moments.cov(0, 0));
    lo = std::min(lo, s.moments.mean[0] - pad * sd);
    hi = std::max(hi, s.moments.mean[0] + pad * sd);
  }
  return {GridAxis{lo, hi, cells}};
}

// ---------------------------------------------------------------------------
// Filter consistency triangle: grid, particle and mean-field posteriors
// against the closed-form Gaussian recursion on a linear model.

CheckResult check_triangle(std::uint64_t seed, bool parallel, int n_steps,
                           int cells, int y_cells, Eigen::Index pf_particles,
                           double tol_abs, const char* name) {
  const PerturbedAffineFamily family = linear_family_1d();
  auto [state, obs] = realize_perturbed(family);
  const GaussianMoments init = standard_init(1);
  const Trajectory traj =
      simulate_trajectory(state, obs, init.mean, init.cov, n_steps,
                          derive_key(seed, {stream::kVerify, 1}));

  const std::vector<KalmanState> kalman =
      run_kalman(affine_base(family), init, traj);
  const GaussianMoments& kf = kalman.back().moments;

  GridRunOptions opts;
  opts.state_grid = envelope_axis(kalman, 8.0, cells);
  opts.y_axis = auto_y_axis(opts.state_grid, obs, y_cells);
  opts.parallel = parallel;
  const GaussianMoments grid_m =
      run_grid_filter(state, obs, init, traj, opts).posteriors.back();

  const PfRunResult pf =
      run_pf(state, obs, init, traj, pf_particles, 0.5,
             derive_key(seed, {stream::kVerify, 2}), parallel);
  const GaussianMoments pf_m = pf.posteriors.back();
  const double ess = pf.final_state.ess();
  const double se_mean = std::sqrt(kf.cov(0, 0) / ess);
  const double se_var = kf.cov(0, 0) * std::sqrt(2.0 / ess);

  const GaussianMoments mf_m =
      run_mean_field_grid(state, obs, init, traj, opts).posteriors.back();

  const double grid_dm = std::abs(grid_m.mean[0] - kf.mean[0]);
  const double grid_dc = std::abs(grid_m.cov(0, 0) - kf.cov(0, 0));
  const double pf_zm = std::abs(pf_m.mean[0] - kf.mean[0]) / se_mean;
  const double pf_zc = std::abs(pf_m.cov(0, 0) - kf.cov(0, 0)) / se_var;
  const double mf_zm = std::abs(mf_m.mean[0] - kf.mean[0]) / se_mean;
  const double mf_zc = std::abs(mf_m.cov(0, 0) - kf.cov(0, 0)) / se_var;

  CheckResult r;
  r.name = name;
  r.pass = grid_dm <= tol_abs && grid_dc <= tol_abs && pf_zm <= 3.0 &&
           pf_zc <= 3.0 && mf_zm <= 3.0 && mf_zc <= 3.0;
  r.detail = "grid |dm|=" + num(grid_dm) + " |dc|=" + num(grid_dc) +
             " (tol " + num(tol_abs) + "); pf z=" + num(pf_zm) + "/" +
             num(pf_zc) + "; mean-field z=" + num(mf_zm) + "/" + num(mf_zc) +
             " (band 3)";
  return r;
}

// ---------------------------------------------------------------------------
// Transport exactness: pushing a Gaussian joint sample through the affine
// transport reproduces the analytic conditional moments.

CheckResult check_transport(std::uint64_t seed, bool parallel, int n_each,
                            Eigen::Index n_samples, double band,
                            const char* name) {
  RngStream gen(derive_key(seed, {stream::kVerify, 3}));
  double worst = 0.0;
  for (int c = 0; c < 2 * n_each; ++c) {
    const int d = c < n_each ? 1 : 2;
    const int k = 1;
    const int m = d + k;
    Mat a(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) a(i, j) = gen.normal();
    }
    const Mat cov = a * a.transpose() + 0.3 * Mat::Identity(m, m);
    Vec mean(m);
    for (int i = 0; i < m; ++i) mean[i] = gen.normal();

    JointGaussianMoments joint;
    joint.mean_v = mean.head(d);
    joint.mean_y = mean.tail(k);
    joint.cvv = cov.topLeftCorner(d, d);
    joint.cvy = cov.topRightCorner(d, k);
    joint.cyy = cov.bottomRightCorner(k, k);
    Vec y_obs(k);
    y_obs[0] = gen.normal();

    const Ensemble cloud = sample_ensemble(
        mean, cov, n_samples,
        derive_key(seed, {stream::kVerify, 3, static_cast<std::uint64_t>(c)}),
        parallel);
    Mat pushed(d, n_samples);
#pragma omp parallel for if (parallel)
    for (Eigen::Index j = 0; j < n_samples; ++j) {
      pushed.col(j) = transport_apply(joint, y_obs,
                                      cloud.particles.col(j).head(d),
                                      cloud.particles.col(j).tail(k));
    }
    const Vec emp_mean = kernels::ensemble_mean(pushed, parallel);
    const Mat emp_cov = kernels::ensemble_covariance(pushed, emp_mean, parallel);

    const Mat gain = joint.cvy * joint.cyy.inverse();
    const Vec cond_mean = joint.mean_v + gain * (y_obs - joint.mean_y);
    const Mat cond_cov = joint.cvv - gain * joint.cvy.transpose();

    const double n = static_cast<double>(n_samples);
    for (int i = 0; i < d; ++i) {
      const double se = std::sqrt(cond_cov(i, i) / n);
      worst = std::max(worst, std::abs(emp_mean[i] - cond_mean[i]) / se);
    }
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double se = std::sqrt(
            (cond_cov(i, i) * cond_cov(j, j) + cond_cov(i, j) * cond_cov(i, j)) /
            n);
        worst = std::max(worst, std::abs(emp_cov(i, j) - cond_cov(i, j)) / se);
      }
    }
  }
  CheckResult r;
  r.name = name;
  r.pass = worst <= band;
  r.detail = std::to_string(2 * n_each) + " joints x " +
             std::to_string(n_samples) + " samples, worst |z|=" + num(worst) +
             " (band " + num(band) + ")";
  return r;
}

// ---------------------------------------------------------------------------
// Metric axioms of the weighted total variation distance.

CheckResult check_metric_axioms(std::uint64_t seed, bool parallel,
                                int n_triples) {
  RngStream gen(derive_key(seed, {stream::kVerify, 4}));
  const GridSpec spec_1d = {GridAxis{-5.0, 5.0, 64}};
  const GridSpec spec_2d = {GridAxis{-3.0, 3.0, 12}, GridAxis{-4.0, 2.0, 10}};
  const auto random_density = [&](const GridSpec& spec) {
    GridDensity g = zeros_on(spec);
    for (Eigen::Index i = 0; i < g.values.size(); ++i) {
      g.values[i] = std::exp(gen.normal());
    }
    g.normalize();
    return g;
  };
  double worst_violation = 0.0;
  bool pass = true;
  for (int t = 0; t < n_triples; ++t) {
    const GridSpec& spec = (t % 4 == 3) ? spec_2d : spec_1d;
    const GridDensity mu = random_density(spec);
    const GridDensity nu = random_density(spec);
    const GridDensity rho = random_density(spec);
    const double d_mn = weighted_tv(mu, nu, parallel);
    const double d_nm = weighted_tv(nu, mu, parallel);
    const double d_mr = weighted_tv(mu, rho, parallel);
    const double d_rn = weighted_tv(rho, nu, parallel);
    const double d_mm = weighted_tv(mu, mu, parallel);
    if (d_mm != 0.0) pass = false;
    if (d_mn != d_nm) pass = false;
    if (!(d_mn > 0.0)) pass = false;
    const double violation = d_mn - (d_mr + d_rn);
    worst_violation = std::max(worst_violation, violation);
    if (violation > 1e-12) pass = false;
  }
  CheckResult r;
  r.name = "metric-axioms";
  r.pass = pass;
  r.detail = std::to_string(n_triples) +
             " triples: identity/symmetry/positivity exact, worst triangle "
             "slack " +
             num(worst_violation);
  return r;
}

// ---------------------------------------------------------------------------
// Mass normalization along grid and mean-field runs.

CheckResult check_mass(std::uint64_t seed, bool parallel, int cells,
                       int n_steps, double tol) {
  const PerturbedAffineFamily family = linear_family_1d();
  auto [state, obs] = realize_perturbed(family);
  const GaussianMoments init = standard_init(1);
  const Trajectory traj =
      simulate_trajectory(state, obs, init.mean, init.cov, n_steps,
                          derive_key(seed, {stream::kVerify, 5}));
  const std::vector<KalmanState> kalman =
      run_kalman(affine_base(family), init, traj);
  GridRunOptions opts;
  opts.state_grid = envelope_axis(kalman, 8.0, cells);
  opts.y_axis = auto_y_axis(opts.state_grid, obs, 256);
  opts.keep_densities = true;
  opts.parallel = parallel;
  double worst = 0.0;
  for (const GridDensity& g :
       run_grid_filter(state, obs, init, traj, opts).densities) {
    worst = std::max(worst, std::abs(g.mass() - 1.0));
  }
  for (const GridDensity& g :
       run_mean_field_grid(state, obs, init, traj, opts).densities) {
    worst = std::max(worst, std::abs(g.mass() - 1.0));
  }
  CheckResult r;
  r.name = "mass-normalization";
  r.pass = worst <= tol;
  r.detail = "worst |mass-1|=" + num(worst) + " over " +
             std::to_string(2 * n_steps) + " posteriors (tol " + num(tol) +
             ")";
  return r;
}

// ---------------------------------------------------------------------------
// Every covariance produced along filter runs factors under the jitter
// policy and stays PSD up to roundoff; near-singular inputs get repaired.

CheckResult check_psd(std::uint64_t seed, bool parallel) {
  const PerturbedAffineFamily family = linear_family_2d();
  auto [state, obs] = realize_perturbed(family);
  const GaussianMoments init = standard_init(2);
  const Trajectory traj =
      simulate_trajectory(state, obs, init.mean, init.cov, 5,
                          derive_key(seed, {stream::kVerify, 6}));
  double min_eig = std::numeric_limits<double>::infinity();
  bool factored = true;
  const auto inspect = [&](const Mat& cov) {
    min_eig = std::min(min_eig, min_eigenvalue(symmetrize(cov)));
    try {
      factor_spd_jittered(cov, "psd check");
    } catch (const Error&) {
      factored = false;
    }
  };
  for (const KalmanState& s : run_kalman(affine_base(family), init, traj)) {
    inspect(s.moments.cov);
  }
  const EnkfRunResult enkf =
      run_enkf(state, obs, init, traj, 128,
               derive_key(seed, {stream::kVerify, 7}), parallel);
  for (const GaussianMoments& m : enkf.posteriors) inspect(m.cov);

  // Rank-deficient and nearly indefinite inputs must factor via jitter.
  RngStream gen(derive_key(seed, {stream::kVerify, 8}));
  for (int t = 0; t < 20; ++t) {
    Vec b(3);
    for (int i = 0; i < 3; ++i) b[i] = gen.normal();
    Mat c = b * b.transpose();  // rank one
    if (t % 2 == 0) c -= 1e-13 * Mat::Identity(3, 3);
    try {
      factor_spd_jittered(c, "psd stress");
    } catch (const Error&) {
      factored = false;
    }
  }
  CheckResult r;
  r.name = "psd-after-jitter";
  r.pass = factored && min_eig >= -1e-10;
  r.detail = "min eigenvalue " + num(min_eig) +
             (factored ? ", all factorizations succeeded"
                       : ", a factorization FAILED");
  return r;
}

// ---------------------------------------------------------------------------
// Determinism: identical keys give identical bits, independent of the
// thread count.

CheckResult check_determinism(std::uint64_t seed, bool parallel) {
  const PerturbedAffineFamily family = linear_family_2d();
  auto [state, obs] = realize_perturbed(family);
  const GaussianMoments init = standard_init(2);
  const Trajectory traj =
      simulate_trajectory(state, obs, init.mean, init.cov, 3,
                          derive_key(seed, {stream::kVerify, 9}));
  const std::uint64_t run_key = derive_key(seed, {stream::kVerify, 10});
  const Mat p_par =
      run_enkf(state, obs, init, traj, 128, run_key, parallel)
          .final_state.ensemble.particles;
  const Mat p_ser = run_enkf(state, obs, init, traj, 128, run_key, false)
                        .final_state.ensemble.particles;
  const Mat p_again =
      run_enkf(state, obs, init, traj, 128, run_key, parallel)
          .final_state.ensemble.particles;
  const bool enkf_same = (p_par.array() == p_ser.array()).all() &&
                         (p_par.array() == p_again.array()).all();

  const PerturbedAffineFamily fam1 = linear_family_1d();
  auto [state1, obs1] = realize_perturbed(fam1);
  const GaussianMoments init1 = standard_init(1);
  const Trajectory traj1 =
      simulate_trajectory(state1, obs1, init1.mean, init1.cov, 3,
                          derive_key(seed, {stream::kVerify, 11}));
  GridRunOptions opts;
  opts.state_grid = {GridAxis{-8.0, 8.0, 200}};
  opts.y_axis = auto_y_axis(opts.state_grid, obs1, 128);
  opts.parallel = parallel;
  const Eigen::ArrayXd g_par =
      run_grid_filter(state1, obs1, init1, traj1, opts)
          .final_state.density.values;
  opts.parallel = false;
  const Eigen::ArrayXd g_ser =
      run_grid_filter(state1, obs1, init1, traj1, opts)
          .final_state.density.values;
  const bool grid_same = (g_par == g_ser).all();

  CheckResult r;
  r.name = "determinism";
  r.pass = enkf_same && grid_same;
  r.detail = std::string("ensemble rerun/thread-count bit-identical: ") +
             (enkf_same ? "yes" : "NO") +
             "; grid serial vs parallel bit-identical: " +
             (grid_same ? "yes" : "NO");
  return r;
}

// ---------------------------------------------------------------------------
// Marginal consistency: integrating the lifted joint over the data axis
// returns the predicted state density.

CheckResult check_marginal(std::uint64_t seed, bool parallel, int cells,
                           double tol) {
  (void)seed;
  const PerturbedAffineFamily family = linear_family_1d();
  auto [state, obs] = realize_perturbed(family);
  const GridSpec spec = {GridAxis{-10.0, 10.0, cells}};
  GridDensity density = gaussian_to_grid(standard_init(1), spec, nullptr,
                                         parallel);
  density.normalize();
  GridFilterState st{std::move(density), 0};
  const GridFilterState predicted =
      grid_predict(st, state, kDefaultMinCoverage, parallel);
  const GridAxis y_axis = auto_y_axis(spec, obs, 512);
  const GridDensity joint =
      build_joint_grid(predicted, obs, y_axis, nullptr, parallel);
  const int ny = y_axis.cells;
  const double dy = y_axis.spacing();
  double sup = 0.0;
  double l1 = 0.0;
  for (int iv = 0; iv < cells; ++iv) {
    double m = 0.0;
    for (int iy = 0; iy < ny; ++iy) {
      m += joint.values[static_cast<Eigen::Index>(iv) * ny + iy];
    }
    m *= dy;
    const double diff = std::abs(m - predicted.density.values[iv]);
    sup = std::max(sup, diff);
    l1 += diff * spec[0].spacing();
  }
  CheckResult r;
  r.name = "joint-marginal";
  r.pass = sup <= tol && l1 <= tol;
  r.detail = "sup diff " + num(sup) + ", L1 diff " + num(l1) + " (tol " +
             num(tol) + ")";
  return r;
}

// ---------------------------------------------------------------------------
// Sweep-based criteria

SweepConfig base_sweep_config(std::uint64_t seed, bool parallel,
                              std::uint64_t label) {
  SweepConfig cfg;
  cfg.family = perturbed_family_1d();
  cfg.init_mean = Vec::Zero(1);
  cfg.init_cov = Mat::Identity(1, 1);
  cfg.n_steps = 10;
  cfg.base_seed = derive_key(seed, {stream::kVerify, label});
  cfg.parallel = parallel;
  return cfg;
}

const RateFit* find_rate(const SweepReport& report,
                         const std::string& needle) {
  for (std::size_t i = 0; i < report.rate_labels.size(); ++i) {
    if (report.rate_labels[i].find(needle) != std::string::npos) {
      return &report.rate_fits[i];
    }
  }
  return nullptr;
}

CheckResult criterion_mc_rate(std::uint64_t seed, bool parallel) {
  SweepConfig cfg = base_sweep_config(seed, parallel, 30);
  cfg.family = linear_family_1d();
  cfg.j_values = {16, 64, 256, 1024, 4096};
  cfg.epsilon_values = {};  // exact-reference leg only
  cfg.n_replicates = 100;
  cfg.test_functions = {"mean"};
  const SweepReport report = run_sweep_j(cfg);
  const RateFit* fit = find_rate(report, "phi=mean");
  CheckResult r;
  r.name = "3-mc-rate";
  if (fit == nullptr) {
    r.pass = false;
    r.detail = "no rate fit produced";
    return r;
  }
  r.pass = fit->slope >= cfg.j_slope_lo && fit->slope <= cfg.j_slope_hi;
  r.detail = "rms slope vs ensemble size " + num(fit->slope) + " (band [" +
             num(cfg.j_slope_lo) + ", " + num(cfg.j_slope_hi) + "], se " +
             num(fit->slope_stderr) + ")";
  return r;
}

CheckResult criterion_near_linear(const SweepReport& report) {
  std::vector<CellAggregate> cells = report.cells;
  std::sort(cells.begin(), cells.end(),
            [](const CellAggregate& a, const CellAggregate& b) {
              return a.epsilon < b.epsilon;
            });
  bool monotone = true;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].dg < cells[i - 1].dg) monotone = false;
  }
  const RateFit* fit = find_rate(report, "eps-rate");
  const double slope = fit != nullptr ? fit->slope : 0.0;
  const bool slope_ok = fit != nullptr &&
                        slope >= report.config.eps_slope_lo &&
                        slope <= report.config.eps_slope_hi;
  const bool floor_ok =
      report.epsilon_zero_dg <= 2.0 * report.epsilon_floor;
  CheckResult r;
  r.name = "4-near-linear-error";
  r.pass = monotone && slope_ok && floor_ok;
  r.detail = std::string("d_g monotone in epsilon: ") +
             (monotone ? "yes" : "NO") + "; slope " + num(slope) +
             " (band [" + num(report.config.eps_slope_lo) + ", " +
             num(report.config.eps_slope_hi) + "]); zero-epsilon d_g " +
             num(report.epsilon_zero_dg) + " vs floor " +
             num(report.epsilon_floor) + " (allow 2x)";
  return r;
}

CheckResult criterion_gap_proxy(const SweepReport& report) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  bool finite = true;
  for (const CellAggregate& cell : report.cells) {
    if (!(cell.max_gap > 0.0)) {
      finite = false;
      continue;
    }
    const double ratio = cell.dg / cell.max_gap;
    if (!std::isfinite(ratio)) {
      finite = false;
      continue;
    }
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  const double spread = (finite && lo > 0.0) ? hi / lo : 0.0;
  CheckResult r;
  r.name = "5-gap-proxy-stability";
  r.pass = finite && lo > 0.0 && spread < 3.0;
  r.detail = "d_g / max-gap ratio in [" + num(lo) + ", " + num(hi) +
             "], spread factor " + num(spread) + " (< 3 required)" +
             (finite ? "" : "; NON-FINITE ratio seen");
  return r;
}

CheckResult criterion_combined_shape(std::uint64_t seed, bool parallel) {
  SweepConfig cfg = base_sweep_config(seed, parallel, 70);
  cfg.j_values = {64, 1024};
  cfg.epsilon_values = {0.02, 0.2};
  cfg.n_replicates = 100;
  const SweepReport report = run_sweep_j(cfg);
  const auto cell_at = [&](Eigen::Index j, double eps) -> const CellAggregate& {
    for (const CellAggregate& c : report.cells) {
      if (c.j == j && c.epsilon == eps) return c;
    }
    throw DomainError("combined-shape: missing sweep cell");
  };
  bool pass = true;
  double worst_slack = -std::numeric_limits<double>::infinity();
  const std::size_t n_phi = cfg.test_functions.size();
  for (std::size_t p = 0; p < n_phi; ++p) {
    for (double eps : cfg.epsilon_values) {
      const CellAggregate& small = cell_at(64, eps);
      const CellAggregate& large = cell_at(1024, eps);
      const double slack =
          3.0 * std::hypot(small.rms_stderr[p], large.rms_stderr[p]);
      const double excess = large.rms[p] - small.rms[p] - slack;
      worst_slack = std::max(worst_slack, excess);
      if (excess > 0.0) pass = false;
    }
    for (Eigen::Index j : cfg.j_values) {
      const CellAggregate& small = cell_at(j, 0.02);
      const CellAggregate& large = cell_at(j, 0.2);
      const double slack =
          3.0 * std::hypot(small.rms_stderr[p], large.rms_stderr[p]);
      const double excess = small.rms[p] - large.rms[p] - slack;
      worst_slack = std::max(worst_slack, excess);
      if (excess > 0.0) pass = false;
    }
  }
  CheckResult r;
  r.name = "7-combined-bound-shape";
  r.pass = pass;
  r.detail =
      "rms monotone (down in J, up in epsilon) over {64,1024}x{0.02,0.2} "
      "with 3-se slack across " +
      std::to_string(n_phi) + " test functions; worst excess " +
      num(worst_slack);
  return r;
}

CheckResult guarded(const char* name,
                    const std::function<CheckResult()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return CheckResult{name, false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

std::vector<CheckResult> run_quick_checks(std::uint64_t seed, bool parallel) {
  std::vector<CheckResult> results;
  results.push_back(guarded("transport-gaussian", [&] {
    return check_transport(seed, parallel, 3, 100000, 4.5,
                           "transport-gaussian");
  }));
  results.push_back(guarded("consistency-triangle", [&] {
    return check_triangle(seed, parallel, 3, 600, 256, 20000, 1e-2,
                          "consistency-triangle");
  }));
  results.push_back(guarded("metric-axioms", [&] {
    return check_metric_axioms(seed, parallel, 30);
  }));
  results.push_back(guarded("mass-normalization", [&] {
    return check_mass(seed, parallel, 400, 3, 1e-8);
  }));
  results.push_back(
      guarded("psd-after-jitter", [&] { return check_psd(seed, parallel); }));
  results.push_back(guarded("determinism", [&] {
    return check_determinism(seed, parallel);
  }));
  results.push_back(guarded("joint-marginal", [&] {
    return check_marginal(seed, parallel, 400, 1e-6);
  }));
  return results;
}

std::vector<CheckResult> run_acceptance_criteria(std::uint64_t seed,
                                                 bool parallel) {
  std::vector<CheckResult> results;

  results.push_back(guarded("1-consistency-triangle", [&] {
    return check_triangle(seed, parallel, 5, 2000, 512, 100000, 1e-2,
                          "1-consistency-triangle");
  }));

  results.push_back(guarded("2-transport-exactness", [&] {
    return check_transport(seed, parallel, 10, 1000000, 4.0,
                           "2-transport-exactness");
  }));

  results.push_back(guarded("3-mc-rate",
                            [&] { return criterion_mc_rate(seed, parallel); }));

  // Criteria 4 and 5 read the same perturbation sweep.
  {
    SweepConfig cfg = base_sweep_config(seed, parallel, 40);
    cfg.epsilon_values = {0.02, 0.05, 0.1, 0.2, 0.4};
    cfg.grid_cells = 2000;
    cfg.joint_y_cells = 512;
    try {
      const SweepReport report = run_sweep_epsilon(cfg);
      results.push_back(guarded("4-near-linear-error",
                                [&] { return criterion_near_linear(report); }));
      results.push_back(guarded("5-gap-proxy-stability",
                                [&] { return criterion_gap_proxy(report); }));
    } catch (const std::exception& e) {
      const std::string what = std::string("exception: ") + e.what();
      results.push_back(CheckResult{"4-near-linear-error", false, what});
      results.push_back(CheckResult{"5-gap-proxy-stability", false, what});
    }
  }

  results.push_back(guarded("6-invariant-suites", [&] {
    std::vector<CheckResult> subs;
    subs.push_back(check_metric_axioms(seed, parallel, 100));
    subs.push_back(check_mass(seed, parallel, 1000, 6, 1e-8));
    subs.push_back(check_psd(seed, parallel));
    subs.push_back(check_determinism(seed, parallel));
    subs.push_back(check_marginal(seed, parallel, 800, 1e-6));
    CheckResult r;
    r.name = "6-invariant-suites";
    r.pass = all_pass(subs);
    std::string detail;
    for (const CheckResult& s : subs) {
      if (!detail.empty()) detail += "; ";
      detail += s.name + (s.pass ? " ok" : " FAILED (" + s.detail + ")");
    }
    r.detail = detail;
    return r;
  }));

  results.push_back(guarded("7-combined-bound-shape", [&] {
    return criterion_combined_shape(seed, parallel);
  }));

  return results;
}

bool all_pass(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.pass; });
}

void print_check_table(const std::vector<CheckResult>& results,
                       std::ostream& os) {
  std::size_t width = 0;
  for (const CheckResult& r : results) width = std::max(width, r.name.size());
  for (const CheckResult& r : results) {
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.name
       << std::string(width - r.name.size() + 2, ' ') << r.detail << "\n";
  }
}

}  // namespace enkf
