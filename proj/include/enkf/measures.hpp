#pragma once

#include "enkf/types.hpp"

namespace enkf {

// Particle mean and unbiased (J-1) sample covariance. Requires J >= 2.
GaussianMoments empirical_moments(const Ensemble& e, bool parallel = true);

// Block moments of a paired (state, data) cloud, unbiased divisor.
JointGaussianMoments joint_empirical_moments(const JointEnsemble& e,
                                             bool parallel = true);

// First and second moments, packaged as the matching Gaussian.
GaussianMoments gaussian_projection(const GridDensity& g,
                                    bool parallel = true);
GaussianMoments gaussian_projection(const Ensemble& e, bool parallel = true);

// Joint-block view of the moments of a 2-d (v, y) grid density.
JointGaussianMoments joint_gaussian_projection(const GridDensity& joint,
                                               bool parallel = true);

// Weighted total variation: quadrature of  int g d|mu - nu|  with
// g(x) = 1 + |x|^2, which realizes  sup_{|f| <= g} |mu[f] - nu[f]|  on the
// grid (the optimal f is g * sign(mu - nu)).
// Throws IncompatibleGridsError when the grids differ.
double weighted_tv(const GridDensity& mu, const GridDensity& nu,
                   bool parallel = true);

// Normalized grid discretization of a Gaussian. `coverage` (optional)
// receives the pre-normalization mass; values below min_coverage indicate
// the grid truncates the density. Throws InvalidCovarianceError for a
// singular covariance.
inline constexpr double kDefaultMinCoverage = 0.999;

GridDensity gaussian_to_grid(const GaussianMoments& m, const GridSpec& spec,
                             double* coverage = nullptr,
                             bool parallel = true);

// Distance between a joint grid density and its own Gaussian projection,
// the per-step driver of the mean-field filter error bound.
double gaussianity_gap(const GridDensity& joint, bool parallel = true);

// Grid extent auto-selection: mean +/- pad standard deviations per axis,
// rounded outward, with the given number of cells per axis.
GridSpec auto_grid_spec(const GaussianMoments& m, int cells_per_axis,
                        double pad_sigmas = 6.0);

// Expectation of a scalar test function under a grid density (quadrature).
template <class Phi>
double grid_expectation(const GridDensity& g, Phi&& phi) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < g.n_cells(); ++i) {
    acc += phi(g.center(i)) * g.values[i];
  }
  return acc * g.cell_volume;
}

}  // namespace enkf
