#include "enkf/measures.hpp"

#include <cmath>

#include "enkf/kernels.hpp"
#include "enkf/linalg.hpp"

namespace enkf {

GaussianMoments empirical_moments(const Ensemble& e, bool parallel) {
  if (e.size() < 2) {
    throw InsufficientDataError("empirical_moments: need J >= 2");
  }
  GaussianMoments m;
  m.mean = kernels::ensemble_mean(e.particles, parallel);
  m.cov = kernels::ensemble_covariance(e.particles, m.mean, parallel);
  m.cov = symmetrize(m.cov);
  return m;
}

JointGaussianMoments joint_empirical_moments(const JointEnsemble& e,
                                             bool parallel) {
  if (e.size() < 2) {
    throw InsufficientDataError("joint_empirical_moments: need J >= 2");
  }
  if (e.data.cols() != e.state.cols()) {
    throw InsufficientDataError(
        "joint_empirical_moments: state/data particle counts differ");
  }
  JointGaussianMoments m;
  m.mean_v = kernels::ensemble_mean(e.state, parallel);
  m.mean_y = kernels::ensemble_mean(e.data, parallel);
  m.cvv = symmetrize(
      kernels::ensemble_covariance(e.state, m.mean_v, parallel));
  m.cyy = symmetrize(
      kernels::ensemble_covariance(e.data, m.mean_y, parallel));
  m.cvy = kernels::cross_covariance(e.state, m.mean_v, e.data, m.mean_y,
                                    parallel);
  return m;
}

GaussianMoments gaussian_projection(const GridDensity& g, bool parallel) {
  GaussianMoments m;
  kernels::grid_moments(g, m.mean, m.cov, parallel);
  return m;
}

GaussianMoments gaussian_projection(const Ensemble& e, bool parallel) {
  return empirical_moments(e, parallel);
}

JointGaussianMoments joint_gaussian_projection(const GridDensity& joint,
                                               bool parallel) {
  if (joint.dim() != 2) {
    throw UnsupportedDimensionError(
        "joint_gaussian_projection: expected a 2-d (v, y) grid");
  }
  const GaussianMoments m = gaussian_projection(joint, parallel);
  JointGaussianMoments out;
  out.mean_v = m.mean.head(1);
  out.mean_y = m.mean.tail(1);
  out.cvv = m.cov.topLeftCorner(1, 1);
  out.cvy = m.cov.topRightCorner(1, 1);
  out.cyy = m.cov.bottomRightCorner(1, 1);
  return out;
}

double weighted_tv(const GridDensity& mu, const GridDensity& nu,
                   bool parallel) {
  return kernels::weighted_abs_diff(mu, nu, parallel);
}

GridDensity gaussian_to_grid(const GaussianMoments& m, const GridSpec& spec,
                             double* coverage, bool parallel) {
  GridDensity g;
  g.axes = spec;
  g.cell_volume = spec_cell_volume(spec);
  g.values = kernels::gaussian_on_grid(spec, m, parallel);
  const double pre_mass = g.normalize();
  if (coverage != nullptr) *coverage = pre_mass;
  return g;
}

double gaussianity_gap(const GridDensity& joint, bool parallel) {
  const GaussianMoments m = gaussian_projection(joint, parallel);
  const GridDensity proj = gaussian_to_grid(m, joint.axes, nullptr, parallel);
  return weighted_tv(joint, proj, parallel);
}

GridSpec auto_grid_spec(const GaussianMoments& m, int cells_per_axis,
                        double pad_sigmas) {
  GridSpec spec;
  for (int a = 0; a < m.dim(); ++a) {
    const double sd = std::sqrt(std::max(m.cov(a, a), 0.0));
    spec.push_back(GridAxis{m.mean[a] - pad_sigmas * sd,
                            m.mean[a] + pad_sigmas * sd, cells_per_axis});
  }
  return spec;
}

}  // namespace enkf
