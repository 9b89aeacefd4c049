#include <doctest.h>

#include <cmath>
#include <numbers>

#include "enkf/kernels.hpp"
#include "enkf/rng.hpp"

using namespace enkf;

namespace {

GridDensity random_density(const GridSpec& spec, std::uint64_t key) {
  RngStream gen(key);
  GridDensity g = zeros_on(spec);
  for (Eigen::Index i = 0; i < g.values.size(); ++i) {
    g.values[i] = std::exp(gen.normal());
  }
  g.normalize();
  return g;
}

}  // namespace

TEST_CASE("blocked_reduce equals a plain ordered sum") {
  const Eigen::Index n = 3 * kernels::kReduceBlock + 17;
  std::vector<double> xs(static_cast<std::size_t>(n));
  RngStream gen(derive_key(3, {stream::kBench, 0}));
  for (auto& x : xs) x = gen.normal();
  const auto block_sum = [&](Eigen::Index i0, Eigen::Index i1, double& acc) {
    for (Eigen::Index i = i0; i < i1; ++i) {
      acc += xs[static_cast<std::size_t>(i)];
    }
  };
  const double serial = kernels::blocked_reduce(n, 0.0, block_sum, false);
  const double parallel = kernels::blocked_reduce(n, 0.0, block_sum, true);
  CHECK(serial == parallel);  // bit-identical by the block-order contract
  double direct = 0.0;
  for (double x : xs) direct += x;
  CHECK(serial == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("every kernel is bit-identical across serial and parallel paths") {
  const GridAxis axis{-6.0, 6.0, 700};
  const GridSpec spec = {axis};
  Mat centers(1, axis.cells), mapped(1, axis.cells);
  for (int i = 0; i < axis.cells; ++i) {
    centers(0, i) = axis.center(i);
    mapped(0, i) = 0.9 * axis.center(i) + 0.05;
  }
  const Mat sigma = Mat::Constant(1, 1, 0.5);
  const GridDensity rho = random_density(spec, derive_key(5, {stream::kBench, 1}));
  const GridDensity rho2 = random_density(spec, derive_key(5, {stream::kBench, 2}));
  const Eigen::ArrayXd h_vals = centers.row(0).transpose().array();
  const GridAxis y_axis{-7.0, 7.0, 128};
  const GaussianMoments gauss{Vec::Constant(1, 0.3), Mat::Constant(1, 1, 1.2)};

  const Mat t_s = kernels::transition_matrix(centers, mapped, sigma,
                                             axis.spacing(), false);
  const Mat t_p = kernels::transition_matrix(centers, mapped, sigma,
                                             axis.spacing(), true);
  CHECK((t_s.array() == t_p.array()).all());

  const Eigen::ArrayXd j_s = kernels::joint_lift(rho.values, h_vals, y_axis, 0.5, false);
  const Eigen::ArrayXd j_p = kernels::joint_lift(rho.values, h_vals, y_axis, 0.5, true);
  CHECK((j_s == j_p).all());

  Vec m_s, m_p;
  Mat c_s, c_p;
  kernels::grid_moments(rho, m_s, c_s, false);
  kernels::grid_moments(rho, m_p, c_p, true);
  CHECK((m_s.array() == m_p.array()).all());
  CHECK((c_s.array() == c_p.array()).all());

  CHECK(kernels::weighted_abs_diff(rho, rho2, false) ==
        kernels::weighted_abs_diff(rho, rho2, true));

  CHECK((kernels::gaussian_on_grid(spec, gauss, false) ==
         kernels::gaussian_on_grid(spec, gauss, true))
            .all());

  RngStream gen(derive_key(6, {stream::kBench, 3}));
  Mat particles(3, 5000);
  for (Eigen::Index j = 0; j < particles.cols(); ++j) {
    for (int i = 0; i < 3; ++i) particles(i, j) = gen.normal();
  }
  const Vec mean_s = kernels::ensemble_mean(particles, false);
  const Vec mean_p = kernels::ensemble_mean(particles, true);
  CHECK((mean_s.array() == mean_p.array()).all());
  const Mat cov_s = kernels::ensemble_covariance(particles, mean_s, false);
  const Mat cov_p = kernels::ensemble_covariance(particles, mean_s, true);
  CHECK((cov_s.array() == cov_p.array()).all());
  const Mat x_s =
      kernels::cross_covariance(particles, mean_s, particles, mean_s, false);
  const Mat x_p =
      kernels::cross_covariance(particles, mean_s, particles, mean_s, true);
  CHECK((x_s.array() == x_p.array()).all());
  CHECK((x_s - cov_s).norm() < 1e-12);  // self cross-covariance = covariance
}

TEST_CASE("transition_matrix columns integrate to one over a wide grid") {
  const GridAxis axis{-10.0, 10.0, 500};
  Mat centers(1, axis.cells), mapped(1, axis.cells);
  for (int i = 0; i < axis.cells; ++i) {
    centers(0, i) = axis.center(i);
    mapped(0, i) = 0.5 * axis.center(i);
  }
  const Mat w = kernels::transition_matrix(centers, mapped,
                                           Mat::Constant(1, 1, 0.75),
                                           axis.spacing(), true);
  // Column j holds N(center_i; mapped_j, sigma) * vol: sums to mass ~ 1.
  for (int j : {0, 123, 250, 499}) {
    CHECK(w.col(j).sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("gaussian_on_grid matches the closed-form density") {
  const GridAxis axis{-4.0, 4.0, 16};
  const GaussianMoments m{Vec::Constant(1, 0.5), Mat::Constant(1, 1, 2.0)};
  const Eigen::ArrayXd vals = kernels::gaussian_on_grid({axis}, m, true);
  for (int i = 0; i < axis.cells; ++i) {
    const double v = axis.center(i);
    const double expected = std::exp(-(v - 0.5) * (v - 0.5) / 4.0) /
                            std::sqrt(2.0 * std::numbers::pi * 2.0);
    CHECK(vals[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("set_threads caps the parallel paths") {
  kernels::set_threads(1);
  CHECK(kernels::threads() == 1);
  kernels::set_threads(2);
  CHECK(kernels::threads() == 2);
  kernels::set_threads(0);
  CHECK(kernels::threads() >= 1);
}
