#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "enkf/kernels.hpp"
#include "enkf/measures.hpp"
#include "enkf/rng.hpp"

// Times every kernel's serial reference path against the OpenMP path on
// benchmark-sized inputs and confirms the results are bit-identical.

namespace {

using namespace enkf;

double best_ms(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

struct Row {
  std::string name;
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
  bool identical = false;
};

void print_table(const std::vector<Row>& rows) {
  std::printf("%-22s %12s %12s %9s %10s\n", "kernel", "serial ms",
              "parallel ms", "speedup", "identical");
  for (const Row& r : rows) {
    std::printf("%-22s %12.3f %12.3f %8.2fx %10s\n", r.name.c_str(),
                r.serial_ms, r.parallel_ms, r.serial_ms / r.parallel_ms,
                r.identical ? "yes" : "NO");
  }
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  RngStream gen(derive_key(42, {stream::kBench}));

  // Grid-kernel inputs: a 1500-cell scalar grid.
  const GridAxis axis{-8.0, 8.0, 1500};
  const GridSpec spec = {axis};
  Mat centers(1, axis.cells);
  Mat mapped(1, axis.cells);
  for (int i = 0; i < axis.cells; ++i) {
    centers(0, i) = axis.center(i);
    mapped(0, i) = 0.9 * axis.center(i);
  }
  const Mat sigma = Mat::Constant(1, 1, 0.5);
  GridDensity rho = zeros_on(spec);
  for (Eigen::Index i = 0; i < rho.values.size(); ++i) {
    rho.values[i] = std::exp(gen.normal());
  }
  rho.normalize();
  GridDensity rho2 = rho;
  for (Eigen::Index i = 0; i < rho2.values.size(); ++i) {
    rho2.values[i] *= 1.0 + 0.1 * std::sin(0.01 * static_cast<double>(i));
  }
  rho2.normalize();
  const Eigen::ArrayXd h_values = centers.row(0).transpose().array();
  const GridAxis y_axis{-9.0, 9.0, 512};
  const GaussianMoments gauss{Vec::Zero(1), Mat::Identity(1, 1)};

  // Ensemble-kernel inputs: 8-dimensional cloud, 200k particles.
  const int dim = 8;
  const Eigen::Index n_particles = 200000;
  Mat particles(dim, n_particles);
  for (Eigen::Index j = 0; j < n_particles; ++j) {
    for (int i = 0; i < dim; ++i) particles(i, j) = gen.normal();
  }

  std::vector<Row> rows;
  const auto bench = [&](const std::string& name, auto make_serial,
                         auto make_parallel, auto same) {
    Row row;
    row.name = name;
    auto serial_out = make_serial();
    auto parallel_out = make_parallel();
    row.identical = same(serial_out, parallel_out);
    row.serial_ms = best_ms([&] { make_serial(); }, reps);
    row.parallel_ms = best_ms([&] { make_parallel(); }, reps);
    rows.push_back(row);
  };
  const auto mat_same = [](const Mat& a, const Mat& b) {
    return (a.array() == b.array()).all();
  };
  const auto arr_same = [](const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    return (a == b).all();
  };

  bench(
      "transition_matrix",
      [&] {
        return kernels::transition_matrix(centers, mapped, sigma,
                                          axis.spacing(), false);
      },
      [&] {
        return kernels::transition_matrix(centers, mapped, sigma,
                                          axis.spacing(), true);
      },
      mat_same);
  bench(
      "joint_lift",
      [&] { return kernels::joint_lift(rho.values, h_values, y_axis, 0.5, false); },
      [&] { return kernels::joint_lift(rho.values, h_values, y_axis, 0.5, true); },
      arr_same);
  bench(
      "grid_moments",
      [&] {
        Vec mean;
        Mat cov;
        kernels::grid_moments(rho, mean, cov, false);
        return cov;
      },
      [&] {
        Vec mean;
        Mat cov;
        kernels::grid_moments(rho, mean, cov, true);
        return cov;
      },
      mat_same);
  bench(
      "weighted_abs_diff",
      [&] {
        return Eigen::ArrayXd::Constant(
            1, kernels::weighted_abs_diff(rho, rho2, false));
      },
      [&] {
        return Eigen::ArrayXd::Constant(
            1, kernels::weighted_abs_diff(rho, rho2, true));
      },
      arr_same);
  bench(
      "gaussian_on_grid",
      [&] { return kernels::gaussian_on_grid(spec, gauss, false); },
      [&] { return kernels::gaussian_on_grid(spec, gauss, true); }, arr_same);
  bench(
      "ensemble_mean",
      [&] { return Mat(kernels::ensemble_mean(particles, false)); },
      [&] { return Mat(kernels::ensemble_mean(particles, true)); }, mat_same);
  const Vec mean = kernels::ensemble_mean(particles, false);
  bench(
      "ensemble_covariance",
      [&] { return kernels::ensemble_covariance(particles, mean, false); },
      [&] { return kernels::ensemble_covariance(particles, mean, true); },
      mat_same);

  std::printf("threads: %d (set_threads / ENKF_LAB_THREADS to change)\n\n",
              kernels::threads());
  print_table(rows);
  bool all_identical = true;
  for (const Row& r : rows) all_identical = all_identical && r.identical;
  if (!all_identical) {
    std::printf("\nERROR: a parallel kernel diverged from its serial "
                "reference\n");
    return 1;
  }
  return 0;
}
