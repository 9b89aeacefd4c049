#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "enkf/types.hpp"

namespace enkf {

using MapFn = std::function<Vec(const Vec&)>;

// State evolution v' = psi(v) + xi, xi ~ N(0, sigma).
struct StateModel {
  int dim = 0;
  MapFn psi;
  Mat sigma;
  Mat sigma_chol;  // lower factor, cached for sampling
};

// Observation y = h(v) + eta, eta ~ N(0, gamma).
struct ObservationModel {
  int dim_k = 0;
  MapFn h;
  Mat gamma;
  Mat gamma_chol;
};

// Validating constructors. Both check symmetry (1e-12 relative), positive
// definiteness, and that the cached factor reproduces the covariance to
// 1e-10 relative Frobenius error.
StateModel make_state_model(int dim, MapFn psi, const Mat& sigma);
ObservationModel make_observation_model(int dim_k, MapFn h, const Mat& gamma);

// Affine pair (Psi0, h0) with bounded perturbations:
//   Psi = Psi0 + epsilon * psi_pert,   h = h0 + epsilon * h_pert,
// where sup |psi_pert| <= 1 and sup |h_pert| <= 1. The noise covariances
// travel with the family and are attached to the realized models.
struct PerturbedAffineFamily {
  Mat a_matrix;  // d x d
  Vec b_vector;  // d
  Mat h_matrix;  // K x d
  Vec h_offset;  // K
  MapFn psi_perturbation;
  MapFn h_perturbation;
  double epsilon = 0.0;
  Mat sigma;
  Mat gamma;

  int dim_d() const { return static_cast<int>(b_vector.size()); }
  int dim_k() const { return static_cast<int>(h_offset.size()); }
};

// Default perturbation shapes: smooth, bounded by 1 in Euclidean sup-norm,
// Lipschitz constant <= 1. Componentwise sin / tanh, scaled by
// 1/sqrt(out_dim) so the bound holds in any dimension.
MapFn sin_perturbation(int dim);
MapFn tanh_perturbation(int in_dim, int out_dim);

// Materializes (Psi, h) at the family's epsilon. Validates epsilon in
// [0, 1] and numerically probes sup |Psi - Psi0| <= epsilon and
// sup |h - h0| <= epsilon on a per-axis probe grid.
std::pair<StateModel, ObservationModel> realize_perturbed(
    const PerturbedAffineFamily& family, int probe_points = 201);

struct Trajectory {
  std::vector<Vec> states;        // v_0 .. v_N
  std::vector<Vec> observations;  // y_1 .. y_N
  std::uint64_t seed = 0;

  int n_steps() const { return static_cast<int>(observations.size()); }
};

// Draws v_0 ~ N(init_mean, init_cov) and runs the state/data system for
// n_steps. Deterministic given the seed.
Trajectory simulate_trajectory(const StateModel& state,
                               const ObservationModel& obs,
                               const Vec& init_mean, const Mat& init_cov,
                               int n_steps, std::uint64_t seed);

// Probe-grid estimates of the weighted sup norm sup |f(x)|/(1 + |x|) and
// the Lipschitz constant. Lower bounds of the true norms; diagnostics,
// not certificates.
struct ModelBounds {
  double kappa_hat = 0.0;
  double lipschitz_hat = 0.0;
};

ModelBounds estimate_model_bounds(const MapFn& f, const Vec& box_lo,
                                  const Vec& box_hi, int n_probe);

// Common closed-form maps.
MapFn affine_map(const Mat& a, const Vec& b);
MapFn identity_map();
MapFn zero_map(int out_dim);

}  // namespace enkf
