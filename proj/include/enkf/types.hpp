#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "enkf/errors.hpp"

namespace enkf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Mean / covariance pair on R^r.
struct GaussianMoments {
  Vec mean;
  Mat cov;
  int dim() const { return static_cast<int>(mean.size()); }
};

// Block moments of a joint (state, data) measure.
struct JointGaussianMoments {
  Vec mean_v;
  Vec mean_y;
  Mat cvv;  // d x d
  Mat cvy;  // d x K
  Mat cyy;  // K x K

  int dim_v() const { return static_cast<int>(mean_v.size()); }
  int dim_y() const { return static_cast<int>(mean_y.size()); }

  // (d+K)-dimensional moments with the block layout [v; y].
  GaussianMoments assemble() const {
    const int d = dim_v(), k = dim_y();
    GaussianMoments out;
    out.mean.resize(d + k);
    out.mean << mean_v, mean_y;
    out.cov.resize(d + k, d + k);
    out.cov.topLeftCorner(d, d) = cvv;
    out.cov.topRightCorner(d, k) = cvy;
    out.cov.bottomLeftCorner(k, d) = cvy.transpose();
    out.cov.bottomRightCorner(k, k) = cyy;
    return out;
  }
};

// Equal-weight particle cloud, one column per particle.
struct Ensemble {
  Mat particles;  // d x J

  int dim() const { return static_cast<int>(particles.rows()); }
  Eigen::Index size() const { return particles.cols(); }
};

// Paired (state, simulated data) cloud, one column per particle.
struct JointEnsemble {
  Mat state;  // d x J
  Mat data;   // K x J

  Eigen::Index size() const { return state.cols(); }
};

// One axis of a tensor grid: `cells` uniform cells covering [lo, hi],
// cell centers at lo + (i + 1/2) * spacing.
struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int cells = 0;

  double spacing() const { return (hi - lo) / cells; }
  double center(int i) const { return lo + (i + 0.5) * spacing(); }
  bool operator==(const GridAxis&) const = default;
};

using GridSpec = std::vector<GridAxis>;

inline double spec_cell_volume(const GridSpec& axes) {
  double v = 1.0;
  for (const auto& a : axes) v *= a.spacing();
  return v;
}

inline Eigen::Index spec_cell_count(const GridSpec& axes) {
  Eigen::Index n = 1;
  for (const auto& a : axes) n *= a.cells;
  return n;
}

// Nonnegative density values on a tensor grid, flattened axis-0 major
// (for a 2-d grid, flat = i0 * axes[1].cells + i1).
struct GridDensity {
  GridSpec axes;
  Eigen::ArrayXd values;
  double cell_volume = 0.0;

  int dim() const { return static_cast<int>(axes.size()); }
  Eigen::Index n_cells() const { return values.size(); }

  double mass() const { return values.sum() * cell_volume; }

  // Rescales to unit mass; returns the mass before rescaling.
  double normalize() {
    const double m = mass();
    if (!(m > 0.0)) throw DomainError("normalize: density has nonpositive mass");
    values /= m;
    return m;
  }

  void multi_index(Eigen::Index flat, int* idx) const {
    for (int a = dim() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(flat % axes[a].cells);
      flat /= axes[a].cells;
    }
  }

  Vec center(Eigen::Index flat) const {
    int idx[4] = {0, 0, 0, 0};
    multi_index(flat, idx);
    Vec c(dim());
    for (int a = 0; a < dim(); ++a) c[a] = axes[a].center(idx[a]);
    return c;
  }

  bool same_grid(const GridDensity& other) const { return axes == other.axes; }
};

// Zero-valued density on the given grid.
inline GridDensity zeros_on(const GridSpec& axes) {
  GridDensity g;
  g.axes = axes;
  g.values = Eigen::ArrayXd::Zero(spec_cell_count(axes));
  g.cell_volume = spec_cell_volume(axes);
  return g;
}

// Weight of the variation metric, g(x) = 1 + |x|^2.
inline double tv_weight(const Vec& x) { return 1.0 + x.squaredNorm(); }

}  // namespace enkf
