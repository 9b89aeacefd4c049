#pragma once

#include <vector>

#include "enkf/types.hpp"

// Hot inner loops. Every kernel has a serial path (parallel = false, the
// reference used by the tests) and an OpenMP path. Reductions run over a
// fixed block decomposition and combine per-block partials in block order,
// so the two paths produce bit-identical results for any thread count.
namespace enkf::kernels {

// Worker-thread cap for the parallel paths. 0 restores the OpenMP default.
void set_threads(int n);
int threads();

inline constexpr Eigen::Index kReduceBlock = 4096;

template <class Acc, class BlockFn>
Acc blocked_reduce(Eigen::Index n, Acc zero, BlockFn&& block_fn,
                   bool parallel = true) {
  const Eigen::Index nb = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<Acc> partials(static_cast<std::size_t>(nb), zero);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::Index i0 = b * kReduceBlock;
    const Eigen::Index i1 = std::min(n, i0 + kReduceBlock);
    block_fn(i0, i1, partials[static_cast<std::size_t>(b)]);
  }
  Acc total = zero;
  for (const Acc& p : partials) total += p;
  return total;
}

// Dense prediction operator: weight(i, j) = N(center_i; mapped_j, sigma),
// scaled by the source cell volume. Applying it to a value vector performs
// the prediction integral by midpoint quadrature.
Mat transition_matrix(const Mat& centers, const Mat& mapped, const Mat& sigma,
                      double cell_volume, bool parallel = true);

// Lift of a 1-d state density onto a (v, y) tensor grid with scalar data:
// out(iv * ny + iy) = rho(iv) * N(y_center(iy); h_values(iv), gamma).
Eigen::ArrayXd joint_lift(const Eigen::ArrayXd& rho,
                          const Eigen::ArrayXd& h_values,
                          const GridAxis& y_axis, double gamma,
                          bool parallel = true);

// Midpoint-quadrature mean and covariance of a tensor-grid density.
void grid_moments(const GridDensity& g, Vec& mean, Mat& cov,
                  bool parallel = true);

// sum_cells g(center) * |a - b| * cell_volume  with g(x) = 1 + |x|^2.
double weighted_abs_diff(const GridDensity& a, const GridDensity& b,
                         bool parallel = true);

// Gaussian density evaluated at every cell center (not normalized to the
// grid). Throws InvalidCovarianceError when cov is singular.
Eigen::ArrayXd gaussian_on_grid(const GridSpec& axes,
                                const GaussianMoments& m,
                                bool parallel = true);

// Particle-cloud statistics with the unbiased J-1 divisor.
Vec ensemble_mean(const Mat& particles, bool parallel = true);
Mat ensemble_covariance(const Mat& particles, const Vec& mean,
                        bool parallel = true);
Mat cross_covariance(const Mat& a, const Vec& mean_a, const Mat& b,
                     const Vec& mean_b, bool parallel = true);

}  // namespace enkf::kernels
