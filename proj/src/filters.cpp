#include "enkf/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "enkf/kernels.hpp"
#include "enkf/linalg.hpp"
#include "enkf/rng.hpp"

namespace enkf {

namespace {

// Counter label for the resampling draw, outside the particle index range.
constexpr std::uint64_t kResampleLabel = ~0ull;

Mat grid_center_matrix(const GridSpec& axes) {
  const GridDensity probe = zeros_on(axes);
  Mat centers(static_cast<Eigen::Index>(axes.size()), probe.n_cells());
  for (Eigen::Index i = 0; i < probe.n_cells(); ++i) {
    centers.col(i) = probe.center(i);
  }
  return centers;
}

// log N(0; 0, Gamma) normalization, -K/2 log 2pi - sum log diag(chol).
double gaussian_log_norm(const Mat& chol) {
  double half_log_det = 0.0;
  for (Eigen::Index i = 0; i < chol.rows(); ++i) {
    half_log_det += std::log(chol(i, i));
  }
  return -0.5 * static_cast<double>(chol.rows()) *
             std::log(2.0 * std::numbers::pi) -
         half_log_det;
}

// log N(y_obs; mean, Gamma) through the cached lower factor of Gamma.
double gaussian_log_likelihood(const Vec& resid, const Mat& chol,
                               double log_norm) {
  const Vec z = chol.triangularView<Eigen::Lower>().solve(resid);
  return log_norm - 0.5 * z.squaredNorm();
}

GridFilterState init_grid_state(const GaussianMoments& init,
                                const GridSpec& grid, double min_coverage,
                                bool parallel) {
  double coverage = 0.0;
  GridDensity d0 = gaussian_to_grid(init, grid, &coverage, parallel);
  if (coverage < min_coverage) {
    throw CoverageError("initial density coverage " +
                        std::to_string(coverage) +
                        " below minimum; enlarge the grid extent");
  }
  return {std::move(d0), 0};
}

}  // namespace

AffineModel affine_base(const PerturbedAffineFamily& family) {
  return {family.a_matrix, family.b_vector, family.h_matrix, family.h_offset,
          family.sigma,    family.gamma};
}

// ---------------------------------------------------------------------------
// Grid (true) Bayes filter

GridPredictOperator::GridPredictOperator(const GridSpec& axes,
                                         const StateModel& model,
                                         bool parallel)
    : axes_(axes) {
  if (static_cast<int>(axes.size()) != model.dim) {
    throw DomainError("grid predict operator: grid dimension " +
                      std::to_string(axes.size()) + " does not match model " +
                      std::to_string(model.dim));
  }
  const Eigen::Index n = spec_cell_count(axes);
  if (n < 1) throw DomainError("grid predict operator: empty grid");
  if (n > kMaxDenseCells) {
    throw DomainError("grid predict operator: " + std::to_string(n) +
                      " cells exceeds the dense-operator limit of " +
                      std::to_string(kMaxDenseCells));
  }
  const Mat centers = grid_center_matrix(axes);
  Mat mapped(centers.rows(), n);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    mapped.col(i) = model.psi(centers.col(i));
  }
  weights_ = kernels::transition_matrix(centers, mapped, model.sigma,
                                        spec_cell_volume(axes), parallel);
}

GridFilterState GridPredictOperator::apply(const GridFilterState& in,
                                           double min_coverage) const {
  if (in.density.axes != axes_) {
    throw IncompatibleGridsError(
        "grid_predict: state grid differs from the operator grid");
  }
  GridFilterState out;
  out.step_index = in.step_index;
  out.density.axes = axes_;
  out.density.cell_volume = in.density.cell_volume;
  out.density.values = (weights_ * in.density.values.matrix()).array();
  const double mass = out.density.mass();
  if (!(mass >= min_coverage)) {
    throw CoverageError("grid_predict: pre-normalization mass " +
                        std::to_string(mass) +
                        " below minimum; enlarge the grid extent");
  }
  out.density.normalize();
  return out;
}

GridFilterState grid_predict(const GridFilterState& state,
                             const StateModel& model, double min_coverage,
                             bool parallel) {
  const GridPredictOperator op(state.density.axes, model, parallel);
  return op.apply(state, min_coverage);
}

GridFilterState grid_analysis(const GridFilterState& state,
                              const ObservationModel& obs, const Vec& y_obs,
                              bool parallel) {
  if (y_obs.size() != obs.dim_k) {
    throw DomainError("grid_analysis: observation dimension mismatch");
  }
  const Eigen::Index n = state.density.n_cells();
  const double log_norm = gaussian_log_norm(obs.gamma_chol);
  Eigen::ArrayXd loglik(n);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec resid = y_obs - obs.h(state.density.center(i));
    loglik[i] = gaussian_log_likelihood(resid, obs.gamma_chol, log_norm);
  }
  // Max-subtracted exponentiation: a far-off observation shrinks the mass
  // smoothly instead of flushing every cell to zero.
  const double lmax = loglik.maxCoeff();
  GridFilterState out;
  out.step_index = state.step_index + 1;
  out.density.axes = state.density.axes;
  out.density.cell_volume = state.density.cell_volume;
  out.density.values = state.density.values * (loglik - lmax).exp();
  const double shifted_mass = out.density.mass();
  const double log_mass =
      lmax + std::log(shifted_mass);  // log of the unnormalized posterior mass
  if (!(log_mass > std::log(1e-300))) {
    throw LikelihoodUnderflowError(
        "grid_analysis: posterior mass below 1e-300; observation "
        "incompatible with the grid support");
  }
  out.density.normalize();
  return out;
}

GridDensity build_joint_grid(const GridFilterState& state,
                             const ObservationModel& obs,
                             const GridAxis& y_grid_spec, double* coverage,
                             bool parallel) {
  if (state.density.dim() != 1 || obs.dim_k != 1) {
    throw UnsupportedDimensionError(
        "build_joint_grid: implemented for d = K = 1 tensor grids");
  }
  if (y_grid_spec.cells < 1) {
    throw DomainError("build_joint_grid: y axis needs at least one cell");
  }
  const GridAxis& vax = state.density.axes[0];
  Eigen::ArrayXd h_values(vax.cells);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < vax.cells; ++i) {
    Vec arg(1);
    arg[0] = vax.center(i);
    h_values[i] = obs.h(arg)[0];
  }
  GridDensity joint;
  joint.axes = {vax, y_grid_spec};
  joint.cell_volume = vax.spacing() * y_grid_spec.spacing();
  joint.values = kernels::joint_lift(state.density.values, h_values,
                                     y_grid_spec, obs.gamma(0, 0), parallel);
  const double mass = joint.mass();
  if (coverage != nullptr) *coverage = mass;
  if (!(mass > 0.0)) {
    throw CoverageError(
        "build_joint_grid: y axis misses the lifted density entirely");
  }
  joint.values /= mass;
  return joint;
}

GridAxis auto_y_axis(const GridSpec& state_axes, const ObservationModel& obs,
                     int cells, double pad_sigmas) {
  if (state_axes.size() != 1 || obs.dim_k != 1) {
    throw UnsupportedDimensionError("auto_y_axis: requires d = K = 1");
  }
  if (cells < 2) throw DomainError("auto_y_axis: needs at least two cells");
  const GridAxis& vax = state_axes[0];
  double h_min = std::numeric_limits<double>::infinity();
  double h_max = -std::numeric_limits<double>::infinity();
  Vec arg(1);
  for (int i = 0; i < vax.cells; ++i) {
    arg[0] = vax.center(i);
    const double hv = obs.h(arg)[0];
    h_min = std::min(h_min, hv);
    h_max = std::max(h_max, hv);
  }
  const double pad = pad_sigmas * std::sqrt(obs.gamma(0, 0));
  return {h_min - pad, h_max + pad, cells};
}

// ---------------------------------------------------------------------------
// Classical Kalman filter

KalmanState kalman_step(const KalmanState& state, const Vec& y_obs,
                        const Mat& a_matrix, const Vec& b_vector,
                        const Mat& h_matrix, const Vec& h_offset,
                        const Mat& sigma, const Mat& gamma) {
  const int d = state.moments.dim();
  const Eigen::Index k = h_matrix.rows();
  if (a_matrix.rows() != d || a_matrix.cols() != d || b_vector.size() != d ||
      h_matrix.cols() != d || h_offset.size() != k || sigma.rows() != d ||
      gamma.rows() != k || y_obs.size() != k) {
    throw DomainError("kalman_step: model block shapes inconsistent");
  }
  const Vec m_pred = a_matrix * state.moments.mean + b_vector;
  const Mat c_pred =
      symmetrize(a_matrix * state.moments.cov * a_matrix.transpose() + sigma);
  const Vec m_y = h_matrix * m_pred + h_offset;
  const Mat cvy = c_pred * h_matrix.transpose();
  const Mat cyy = symmetrize(h_matrix * cvy + gamma);
  const SpdFactor fac = factor_spd_jittered(cyy, "kalman innovation");
  const Mat gain = fac.solve(cvy.transpose()).transpose();  // d x K
  KalmanState out;
  out.step_index = state.step_index + 1;
  out.moments.mean = m_pred + gain * (y_obs - m_y);
  out.moments.cov = symmetrize(c_pred - gain * cvy.transpose());
  return out;
}

KalmanState kalman_step(const KalmanState& state, const Vec& y_obs,
                        const AffineModel& model) {
  return kalman_step(state, y_obs, model.a, model.b, model.h, model.h_off,
                     model.sigma, model.gamma);
}

// ---------------------------------------------------------------------------
// Ensemble Kalman filter

Ensemble enkf_transform(const Ensemble& particles, const Vec& y_obs,
                        const StateModel& model, const ObservationModel& obs,
                        const Mat& xi, const Mat& eta, bool parallel) {
  const Eigen::Index j_count = particles.size();
  if (j_count < 2) {
    throw InsufficientDataError("enkf_transform: needs at least 2 particles");
  }
  if (particles.dim() != model.dim || y_obs.size() != obs.dim_k) {
    throw DomainError("enkf_transform: dimension mismatch");
  }
  if (xi.rows() != model.dim || xi.cols() != j_count ||
      eta.rows() != obs.dim_k || eta.cols() != j_count) {
    throw DomainError("enkf_transform: noise block shape mismatch");
  }
  Mat vhat(model.dim, j_count);
  Mat hvals(obs.dim_k, j_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < j_count; ++j) {
    vhat.col(j) = model.psi(particles.particles.col(j)) + xi.col(j);
    hvals.col(j) = obs.h(vhat.col(j));
  }
  // Empirical covariances over the predicted cloud (v_hat, h(v_hat)); the
  // gain uses Gamma + Chh, the displayed finite-J form, not the joint-cloud
  // Cyy (they differ by sampling noise in the perturbation term).
  const Vec mean_v = kernels::ensemble_mean(vhat, parallel);
  const Vec mean_h = kernels::ensemble_mean(hvals, parallel);
  const Mat cvh =
      kernels::cross_covariance(vhat, mean_v, hvals, mean_h, parallel);
  const Mat chh = kernels::ensemble_covariance(hvals, mean_h, parallel);
  const SpdFactor fac =
      factor_spd_jittered(symmetrize(obs.gamma + chh), "enkf innovation");
  const Mat gain = fac.solve(cvh.transpose()).transpose();  // d x K
  Ensemble out;
  out.particles.resize(model.dim, j_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < j_count; ++j) {
    out.particles.col(j) =
        vhat.col(j) + gain * (y_obs - hvals.col(j) - eta.col(j));
  }
  return out;
}

EnkfState enkf_step(const EnkfState& state, const Vec& y_obs,
                    const StateModel& model, const ObservationModel& obs,
                    bool parallel) {
  const Eigen::Index j_count = state.ensemble.size();
  const int d = model.dim;
  const int k = obs.dim_k;
  Mat xi(d, j_count);
  Mat eta(k, j_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < j_count; ++j) {
    RngStream rng(derive_key(
        state.rng_stream.key,
        {stream::kEnkfStep, static_cast<std::uint64_t>(state.step_index),
         static_cast<std::uint64_t>(j)}));
    for (int i = 0; i < d; ++i) xi(i, j) = rng.normal();
    for (int i = 0; i < k; ++i) eta(i, j) = rng.normal();
  }
  xi = model.sigma_chol * xi;
  eta = obs.gamma_chol * eta;
  EnkfState out;
  out.ensemble = enkf_transform(state.ensemble, y_obs, model, obs, xi, eta,
                                parallel);
  out.step_index = state.step_index + 1;
  out.rng_stream = state.rng_stream;
  return out;
}

Ensemble sample_ensemble(const Vec& mean, const Mat& cov, Eigen::Index count,
                         std::uint64_t key, bool parallel) {
  if (count < 1) throw DomainError("sample_ensemble: count must be positive");
  const int d = static_cast<int>(mean.size());
  const Mat l = cholesky_lower(cov, "ensemble init covariance");
  Ensemble out;
  out.particles.resize(d, count);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < count; ++j) {
    RngStream rng(derive_key(
        key, {stream::kEnsembleInit, static_cast<std::uint64_t>(j)}));
    Vec z(d);
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    out.particles.col(j) = mean + l * z;
  }
  return out;
}

Vec transport_apply(const JointGaussianMoments& joint, const Vec& y_obs,
                    const Vec& point_v, const Vec& point_y) {
  if (point_v.size() != joint.dim_v() || point_y.size() != joint.dim_y() ||
      y_obs.size() != joint.dim_y()) {
    throw DomainError("transport_apply: dimension mismatch");
  }
  const SpdFactor fac = factor_spd_jittered(joint.cyy, "transport cyy");
  const Mat gain = fac.solve(joint.cvy.transpose()).transpose();  // d x K
  return point_v + gain * (y_obs - point_y);
}

// ---------------------------------------------------------------------------
// Mean-field filter

GridFilterState mean_field_analysis(const GridFilterState& predicted,
                                    double y_obs, const ObservationModel& obs,
                                    const GridAxis& y_grid_spec,
                                    double min_coverage, bool parallel) {
  double y_coverage = 0.0;
  const GridDensity joint =
      build_joint_grid(predicted, obs, y_grid_spec, &y_coverage, parallel);
  if (y_coverage < min_coverage) {
    throw CoverageError("mean_field_analysis: y axis captures only " +
                        std::to_string(y_coverage) +
                        " of the lifted density; enlarge it");
  }
  const JointGaussianMoments moments =
      joint_gaussian_projection(joint, parallel);
  const SpdFactor fac =
      factor_spd_jittered(moments.cyy, "mean-field innovation");
  const double gain = fac.solve(Vec::Constant(1, moments.cvy(0, 0)))[0];

  // Pushforward through (v, y) -> v + gain (y_obs - y): each joint cell's
  // mass lands between the two nearest state cells (linear interpolation).
  // Scatter with overlapping targets, so this loop stays serial; it is
  // linear in the joint size while the lift above is the quadratic part.
  const GridAxis& vax = predicted.density.axes[0];
  const GridAxis& yax = joint.axes[1];
  const double inv_spacing = 1.0 / vax.spacing();
  GridDensity out_density = zeros_on(predicted.density.axes);
  const int ny = yax.cells;
  for (Eigen::Index flat = 0; flat < joint.n_cells(); ++flat) {
    const double mass = joint.values[flat] * joint.cell_volume;
    if (mass == 0.0) continue;
    const int iv = static_cast<int>(flat / ny);
    const int iy = static_cast<int>(flat % ny);
    const double image = vax.center(iv) + gain * (y_obs - yax.center(iy));
    const double t = (image - vax.lo) * inv_spacing - 0.5;
    const double t0 = std::floor(t);
    const int i0 = static_cast<int>(t0);
    const double w1 = t - t0;
    if (i0 >= 0 && i0 < vax.cells) out_density.values[i0] += mass * (1.0 - w1);
    if (i0 + 1 >= 0 && i0 + 1 < vax.cells) {
      out_density.values[i0 + 1] += mass * w1;
    }
  }
  out_density.values /= out_density.cell_volume;  // cell masses -> densities
  const double kept = out_density.mass();
  if (kept < min_coverage) {
    throw CoverageError("mean_field_analysis: transported mass " +
                        std::to_string(kept) +
                        " falls outside the state grid; enlarge it");
  }
  out_density.normalize();
  return {std::move(out_density), predicted.step_index + 1};
}

GridFilterState mean_field_step_grid(const GridFilterState& state,
                                     double y_obs, const StateModel& model,
                                     const ObservationModel& obs,
                                     const GridAxis& y_grid_spec,
                                     double min_coverage, bool parallel) {
  if (state.density.dim() != 1 || obs.dim_k != 1) {
    throw UnsupportedDimensionError(
        "mean_field_step_grid: implemented for d = K = 1");
  }
  const GridFilterState predicted =
      grid_predict(state, model, min_coverage, parallel);
  return mean_field_analysis(predicted, y_obs, obs, y_grid_spec, min_coverage,
                             parallel);
}

EnkfState mean_field_step_surrogate(const EnkfState& state, const Vec& y_obs,
                                    const StateModel& model,
                                    const ObservationModel& obs,
                                    Eigen::Index min_j, bool parallel) {
  if (state.ensemble.size() < min_j) {
    throw InsufficientDataError(
        "mean_field_step_surrogate: ensemble size " +
        std::to_string(state.ensemble.size()) +
        " below the surrogate minimum " + std::to_string(min_j));
  }
  return enkf_step(state, y_obs, model, obs, parallel);
}

// ---------------------------------------------------------------------------
// Bootstrap particle filter

WeightedEnsemble bootstrap_pf_step(const WeightedEnsemble& state,
                                   const Vec& y_obs, const StateModel& model,
                                   const ObservationModel& obs,
                                   double resample_threshold,
                                   std::uint64_t step_key, bool parallel) {
  const Eigen::Index j_count = state.size();
  if (j_count < 1) {
    throw InsufficientDataError("bootstrap_pf_step: empty ensemble");
  }
  const int d = model.dim;
  Mat prop(d, j_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < j_count; ++j) {
    RngStream rng(derive_key(step_key, {static_cast<std::uint64_t>(j)}));
    Vec z(d);
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    prop.col(j) = model.psi(state.particles.col(j)) + model.sigma_chol * z;
  }
  const double log_norm = gaussian_log_norm(obs.gamma_chol);
  Eigen::ArrayXd logw(j_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index j = 0; j < j_count; ++j) {
    const Vec resid = y_obs - obs.h(prop.col(j));
    logw[j] = std::log(state.weights[j]) +
              gaussian_log_likelihood(resid, obs.gamma_chol, log_norm);
  }
  const double lmax = logw.maxCoeff();
  if (!std::isfinite(lmax)) {
    throw DegenerateWeightsError(
        "bootstrap_pf_step: every weight underflowed");
  }
  WeightedEnsemble out;
  out.particles = std::move(prop);
  out.weights = (logw - lmax).exp().matrix();
  const double total = out.weights.sum();
  if (!(total > 0.0)) {
    throw DegenerateWeightsError(
        "bootstrap_pf_step: weight normalization failed");
  }
  out.weights /= total;

  if (out.ess() < resample_threshold * static_cast<double>(j_count)) {
    // Systematic resampling: one uniform positions the whole comb.
    RngStream rng(derive_key(step_key, {kResampleLabel}));
    const double u0 = rng.uniform();
    Mat resampled(d, j_count);
    double cum = out.weights[0];
    Eigen::Index src = 0;
    for (Eigen::Index k = 0; k < j_count; ++k) {
      const double pos =
          (static_cast<double>(k) + u0) / static_cast<double>(j_count);
      while (cum < pos && src + 1 < j_count) cum += out.weights[++src];
      resampled.col(k) = out.particles.col(src);
    }
    out.particles = std::move(resampled);
    out.weights = Vec::Constant(j_count, 1.0 / static_cast<double>(j_count));
  }
  return out;
}

GaussianMoments weighted_moments(const WeightedEnsemble& e) {
  const Eigen::Index j_count = e.size();
  if (j_count < 2) {
    throw InsufficientDataError("weighted_moments: needs at least 2 particles");
  }
  GaussianMoments out;
  out.mean = e.particles * e.weights;
  const double w2 = e.weights.squaredNorm();
  if (!(1.0 - w2 > 1e-12)) {
    throw DegenerateWeightsError(
        "weighted_moments: effective sample size too close to 1");
  }
  const Mat centered = e.particles.colwise() - out.mean;
  // Unbiased weighted covariance; the 1 - sum w^2 denominator reduces to
  // the J-1 divisor under uniform weights.
  out.cov = symmetrize((centered * e.weights.asDiagonal() *
                        centered.transpose()) /
                       (1.0 - w2));
  return out;
}

// ---------------------------------------------------------------------------
// Whole-trajectory runners

namespace {

// Borrow opts.predict_op when set (after checking it was built for the same
// grid); otherwise build a fresh operator into `own`.
const GridPredictOperator& predict_operator(
    const GridRunOptions& opts, const StateModel& model,
    std::optional<GridPredictOperator>& own, const char* who) {
  if (!opts.predict_op) {
    own.emplace(opts.state_grid, model, opts.parallel);
    return *own;
  }
  const GridSpec& have = opts.predict_op->axes();
  bool match = have.size() == opts.state_grid.size();
  for (std::size_t i = 0; match && i < have.size(); ++i) {
    match = have[i].lo == opts.state_grid[i].lo &&
            have[i].hi == opts.state_grid[i].hi &&
            have[i].cells == opts.state_grid[i].cells;
  }
  if (!match) {
    throw DomainError(std::string(who) +
                      ": predict_op was built for a different grid");
  }
  return *opts.predict_op;
}

}  // namespace

GridRunResult run_grid_filter(const StateModel& model,
                              const ObservationModel& obs,
                              const GaussianMoments& init,
                              const Trajectory& traj,
                              const GridRunOptions& opts) {
  if (opts.track_gap && opts.y_axis.cells < 1) {
    throw DomainError("run_grid_filter: gap tracking needs a joint y axis");
  }
  GridRunResult out;
  GridFilterState state =
      init_grid_state(init, opts.state_grid, opts.min_coverage, opts.parallel);
  std::optional<GridPredictOperator> own;
  const GridPredictOperator& op =
      predict_operator(opts, model, own, "run_grid_filter");
  for (int n = 0; n < traj.n_steps(); ++n) {
    const GridFilterState predicted = op.apply(state, opts.min_coverage);
    if (opts.track_gap) {
      const GridDensity joint = build_joint_grid(predicted, obs, opts.y_axis,
                                                 nullptr, opts.parallel);
      out.gaps.push_back(gaussianity_gap(joint, opts.parallel));
    }
    state = grid_analysis(predicted, obs, traj.observations[n], opts.parallel);
    out.posteriors.push_back(gaussian_projection(state.density, opts.parallel));
    if (opts.keep_densities) out.densities.push_back(state.density);
  }
  out.final_state = std::move(state);
  return out;
}

GridRunResult run_mean_field_grid(const StateModel& model,
                                  const ObservationModel& obs,
                                  const GaussianMoments& init,
                                  const Trajectory& traj,
                                  const GridRunOptions& opts) {
  if (opts.y_axis.cells < 1) {
    throw DomainError("run_mean_field_grid: needs a joint y axis");
  }
  GridRunResult out;
  GridFilterState state =
      init_grid_state(init, opts.state_grid, opts.min_coverage, opts.parallel);
  std::optional<GridPredictOperator> own;
  const GridPredictOperator& op =
      predict_operator(opts, model, own, "run_mean_field_grid");
  for (int n = 0; n < traj.n_steps(); ++n) {
    const GridFilterState predicted = op.apply(state, opts.min_coverage);
    if (opts.track_gap) {
      const GridDensity joint = build_joint_grid(predicted, obs, opts.y_axis,
                                                 nullptr, opts.parallel);
      out.gaps.push_back(gaussianity_gap(joint, opts.parallel));
    }
    state = mean_field_analysis(predicted, traj.observations[n][0], obs,
                                opts.y_axis, opts.min_coverage, opts.parallel);
    out.posteriors.push_back(gaussian_projection(state.density, opts.parallel));
    if (opts.keep_densities) out.densities.push_back(state.density);
  }
  out.final_state = std::move(state);
  return out;
}

std::vector<KalmanState> run_kalman(const AffineModel& model,
                                    const GaussianMoments& init,
                                    const Trajectory& traj) {
  std::vector<KalmanState> out;
  out.reserve(static_cast<std::size_t>(traj.n_steps()) + 1);
  out.push_back({init, 0});
  for (int n = 0; n < traj.n_steps(); ++n) {
    out.push_back(kalman_step(out.back(), traj.observations[n], model));
  }
  return out;
}

EnkfRunResult run_enkf(const StateModel& model, const ObservationModel& obs,
                       const GaussianMoments& init, const Trajectory& traj,
                       Eigen::Index ensemble_size, std::uint64_t run_key,
                       bool parallel) {
  EnkfRunResult out;
  EnkfState state{
      sample_ensemble(init.mean, init.cov, ensemble_size, run_key, parallel),
      0,
      {run_key}};
  for (int n = 0; n < traj.n_steps(); ++n) {
    state = enkf_step(state, traj.observations[n], model, obs, parallel);
    out.posteriors.push_back(empirical_moments(state.ensemble, parallel));
  }
  out.final_state = std::move(state);
  return out;
}

PfRunResult run_pf(const StateModel& model, const ObservationModel& obs,
                   const GaussianMoments& init, const Trajectory& traj,
                   Eigen::Index particles, double resample_threshold,
                   std::uint64_t run_key, bool parallel) {
  PfRunResult out;
  WeightedEnsemble state;
  state.particles =
      sample_ensemble(init.mean, init.cov, particles, run_key, parallel)
          .particles;
  state.weights =
      Vec::Constant(particles, 1.0 / static_cast<double>(particles));
  for (int n = 0; n < traj.n_steps(); ++n) {
    const std::uint64_t step_key = derive_key(
        run_key, {stream::kPfStep, static_cast<std::uint64_t>(n)});
    state = bootstrap_pf_step(state, traj.observations[n], model, obs,
                              resample_threshold, step_key, parallel);
    out.posteriors.push_back(weighted_moments(state));
  }
  out.final_state = std::move(state);
  return out;
}

}  // namespace enkf
