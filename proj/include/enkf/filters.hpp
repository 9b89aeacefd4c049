#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "enkf/measures.hpp"
#include "enkf/models.hpp"

namespace enkf {

// ---------------------------------------------------------------------------
// Filter states

struct GridFilterState {
  GridDensity density;
  int step_index = 0;
};

struct KalmanState {
  GaussianMoments moments;
  int step_index = 0;
};

// Handle of the counter-based noise stream owned by one filter run. Fresh
// draws are keyed by (run key, step, particle), so a step is reproducible
// under any parallel schedule.
struct StreamHandle {
  std::uint64_t key = 0;
};

struct EnkfState {
  Ensemble ensemble;
  int step_index = 0;
  StreamHandle rng_stream;
};

struct WeightedEnsemble {
  Mat particles;  // d x J
  Vec weights;    // sums to 1

  Eigen::Index size() const { return particles.cols(); }
  double ess() const { return 1.0 / weights.squaredNorm(); }
};

// Affine model for the classical Kalman recursion.
struct AffineModel {
  Mat a;       // d x d
  Vec b;       // d
  Mat h;       // K x d
  Vec h_off;   // K
  Mat sigma;   // d x d
  Mat gamma;   // K x K
};

AffineModel affine_base(const PerturbedAffineFamily& family);

// ---------------------------------------------------------------------------
// Grid (true) Bayes filter

// Cell-count ceiling for dense prediction operators (quadratic storage).
inline constexpr Eigen::Index kMaxDenseCells = 8192;

// Precomputed dense prediction operator for one (grid, model) pair. Builds
// the full transition kernel once; each apply is a matrix-vector product.
class GridPredictOperator {
 public:
  GridPredictOperator(const GridSpec& axes, const StateModel& model,
                      bool parallel = true);

  // P then renormalize. Throws CoverageError when the pre-normalization
  // mass drops below min_coverage (grid too small for the pushforward).
  GridFilterState apply(const GridFilterState& in,
                        double min_coverage = kDefaultMinCoverage) const;

  const GridSpec& axes() const { return axes_; }

 private:
  GridSpec axes_;
  Mat weights_;
};

GridFilterState grid_predict(const GridFilterState& state,
                             const StateModel& model,
                             double min_coverage = kDefaultMinCoverage,
                             bool parallel = true);

// Pointwise likelihood reweighting (the B . Q composition collapses to
// this when only the state marginal is needed). Throws
// LikelihoodUnderflowError when the posterior mass vanishes.
GridFilterState grid_analysis(const GridFilterState& state,
                              const ObservationModel& obs, const Vec& y_obs,
                              bool parallel = true);

// Materialized joint density Q mu on a (v, y) tensor grid; d = K = 1 only.
// The result is normalized; `coverage` (optional) receives the
// pre-normalization mass, i.e. how much of the lifted density the y axis
// captures.
GridDensity build_joint_grid(const GridFilterState& state,
                             const ObservationModel& obs,
                             const GridAxis& y_grid_spec,
                             double* coverage = nullptr,
                             bool parallel = true);

// y-axis wide enough for the lifted density: range of h over the state
// grid, padded by pad_sigmas observation standard deviations.
GridAxis auto_y_axis(const GridSpec& state_axes, const ObservationModel& obs,
                     int cells, double pad_sigmas = 7.0);

// ---------------------------------------------------------------------------
// Classical Kalman filter

// Predict m' = A m + b, C' = A C A^T + Sigma, then the standard moment
// update with gain Cvy Cyy^{-1}; the innovation matrix is factored under
// the jitter policy.
KalmanState kalman_step(const KalmanState& state, const Vec& y_obs,
                        const Mat& a_matrix, const Vec& b_vector,
                        const Mat& h_matrix, const Vec& h_offset,
                        const Mat& sigma, const Mat& gamma);

KalmanState kalman_step(const KalmanState& state, const Vec& y_obs,
                        const AffineModel& model);

// ---------------------------------------------------------------------------
// Ensemble Kalman filter

// One full perturbed-observation iteration: propagate with fresh state
// noise, simulate data with fresh observation noise, shift by the
// empirical gain. Noise is keyed by (run key, step, particle).
EnkfState enkf_step(const EnkfState& state, const Vec& y_obs,
                    const StateModel& model, const ObservationModel& obs,
                    bool parallel = true);

// Deterministic core of the step with injected noise columns; the test
// seam for hand-computed updates. xi is d x J, eta is K x J.
Ensemble enkf_transform(const Ensemble& particles, const Vec& y_obs,
                        const StateModel& model, const ObservationModel& obs,
                        const Mat& xi, const Mat& eta, bool parallel = true);

// i.i.d. N(mean, cov) cloud from the ensemble-init stream of `key`.
Ensemble sample_ensemble(const Vec& mean, const Mat& cov, Eigen::Index count,
                         std::uint64_t key, bool parallel = true);

// Affine shift v + Cvy Cyy^{-1} (y_obs - y) from the joint moments.
Vec transport_apply(const JointGaussianMoments& joint, const Vec& y_obs,
                    const Vec& point_v, const Vec& point_y);

// ---------------------------------------------------------------------------
// Mean-field filter

// Law-level step, exact on the grid for d = K = 1: lift the predicted
// density to the joint grid, read the joint moments, push the joint mass
// through the affine transport map onto the state grid.
GridFilterState mean_field_step_grid(const GridFilterState& state,
                                     double y_obs, const StateModel& model,
                                     const ObservationModel& obs,
                                     const GridAxis& y_grid_spec,
                                     double min_coverage = kDefaultMinCoverage,
                                     bool parallel = true);

// Same analysis given an already predicted density (shared predict
// operator between filter variants).
GridFilterState mean_field_analysis(const GridFilterState& predicted,
                                    double y_obs,
                                    const ObservationModel& obs,
                                    const GridAxis& y_grid_spec,
                                    double min_coverage = kDefaultMinCoverage,
                                    bool parallel = true);

// Finite-J surrogate of the mean-field law: identical code path to
// enkf_step, with a guard on the minimum ensemble size. Sampling error is
// O(1/sqrt(J)).
EnkfState mean_field_step_surrogate(const EnkfState& state, const Vec& y_obs,
                                    const StateModel& model,
                                    const ObservationModel& obs,
                                    Eigen::Index min_j = 10000,
                                    bool parallel = true);

// ---------------------------------------------------------------------------
// Bootstrap particle filter (oracle)

// Propagate, reweight by the observation likelihood, renormalize;
// systematic resampling when ess < resample_threshold * J. Noise is keyed
// by (step key, particle).
WeightedEnsemble bootstrap_pf_step(const WeightedEnsemble& state,
                                   const Vec& y_obs, const StateModel& model,
                                   const ObservationModel& obs,
                                   double resample_threshold,
                                   std::uint64_t step_key,
                                   bool parallel = true);

GaussianMoments weighted_moments(const WeightedEnsemble& e);

// ---------------------------------------------------------------------------
// Whole-trajectory runners (shared by the CLI, experiments and tests)

struct GridRunOptions {
  GridSpec state_grid;
  GridAxis y_axis;            // joint lift axis (d = K = 1 runs)
  bool track_gap = false;     // record the per-step Gaussianity gap of Q P mu
  bool keep_densities = false;
  double min_coverage = kDefaultMinCoverage;
  bool parallel = true;
  // Optional prebuilt prediction operator for state_grid; lets many runs
  // over the same (grid, model) pair share the quadratic-cost kernel build.
  // Must outlive the run and match state_grid exactly.
  const GridPredictOperator* predict_op = nullptr;
};

struct GridRunResult {
  GridFilterState final_state;
  std::vector<GaussianMoments> posteriors;  // one per step
  std::vector<double> gaps;                 // gap of Q P mu_n, n = 0..N-1
  std::vector<GridDensity> densities;       // when keep_densities
};

GridRunResult run_grid_filter(const StateModel& model,
                              const ObservationModel& obs,
                              const GaussianMoments& init,
                              const Trajectory& traj,
                              const GridRunOptions& opts);

GridRunResult run_mean_field_grid(const StateModel& model,
                                  const ObservationModel& obs,
                                  const GaussianMoments& init,
                                  const Trajectory& traj,
                                  const GridRunOptions& opts);

// Returns N + 1 states: the prior at index 0, then the posterior after
// each observation.
std::vector<KalmanState> run_kalman(const AffineModel& model,
                                    const GaussianMoments& init,
                                    const Trajectory& traj);

struct EnkfRunResult {
  EnkfState final_state;
  std::vector<GaussianMoments> posteriors;
};

EnkfRunResult run_enkf(const StateModel& model, const ObservationModel& obs,
                       const GaussianMoments& init, const Trajectory& traj,
                       Eigen::Index ensemble_size, std::uint64_t run_key,
                       bool parallel = true);

struct PfRunResult {
  WeightedEnsemble final_state;
  std::vector<GaussianMoments> posteriors;
};

PfRunResult run_pf(const StateModel& model, const ObservationModel& obs,
                   const GaussianMoments& init, const Trajectory& traj,
                   Eigen::Index particles, double resample_threshold,
                   std::uint64_t run_key, bool parallel = true);

}  // namespace enkf
