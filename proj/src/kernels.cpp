#include "enkf/kernels.hpp"

#include <cmath>
#include <numbers>

#include "enkf/linalg.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace enkf::kernels {

namespace {
int g_threads = 0;
}

void set_threads(int n) {
  g_threads = n > 0 ? n : 0;
#ifdef _OPENMP
  if (g_threads > 0) omp_set_num_threads(g_threads);
#endif
}

int threads() {
#ifdef _OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// Gaussian normalization (2 pi)^(-d/2) det(sigma)^(-1/2) and the inverse,
// computed once per kernel call.
struct GaussKernel {
  Mat sigma_inv;
  double norm;

  explicit GaussKernel(const Mat& sigma) {
    const Mat l = cholesky_lower(sigma, "kernel covariance");
    const int d = static_cast<int>(sigma.rows());
    double log_det = 0.0;
    for (int i = 0; i < d; ++i) log_det += std::log(l(i, i));
    norm = std::exp(-0.5 * d * std::log(2.0 * std::numbers::pi) - log_det);
    sigma_inv = Eigen::LLT<Mat>(symmetrize(sigma))
                    .solve(Mat::Identity(d, d));
  }
};

inline void flat_to_center(const GridSpec& axes, Eigen::Index flat,
                           double* out) {
  for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
    const int i = static_cast<int>(flat % axes[a].cells);
    flat /= axes[a].cells;
    out[a] = axes[a].center(i);
  }
}

}  // namespace

Mat transition_matrix(const Mat& centers, const Mat& mapped, const Mat& sigma,
                      double cell_volume, bool parallel) {
  const Eigen::Index n_out = centers.cols();
  const Eigen::Index n_in = mapped.cols();
  const int d = static_cast<int>(centers.rows());
  const GaussKernel k(sigma);
  Mat t(n_out, n_in);
  if (d == 1) {
    const double inv = k.sigma_inv(0, 0);
#pragma omp parallel for schedule(static) if (parallel)
    for (Eigen::Index i = 0; i < n_out; ++i) {
      const double c = centers(0, i);
      for (Eigen::Index j = 0; j < n_in; ++j) {
        const double diff = c - mapped(0, j);
        t(i, j) = k.norm * std::exp(-0.5 * inv * diff * diff) * cell_volume;
      }
    }
    return t;
  }
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < n_out; ++i) {
    Vec diff(d);
    for (Eigen::Index j = 0; j < n_in; ++j) {
      diff = centers.col(i) - mapped.col(j);
      const double q = diff.dot(k.sigma_inv * diff);
      t(i, j) = k.norm * std::exp(-0.5 * q) * cell_volume;
    }
  }
  return t;
}

Eigen::ArrayXd joint_lift(const Eigen::ArrayXd& rho,
                          const Eigen::ArrayXd& h_values,
                          const GridAxis& y_axis, double gamma,
                          bool parallel) {
  if (gamma <= 0.0) throw InvalidCovarianceError("joint_lift: gamma <= 0");
  const Eigen::Index nv = rho.size();
  const Eigen::Index ny = y_axis.cells;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * gamma);
  const double inv = 1.0 / gamma;
  Eigen::ArrayXd out(nv * ny);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index iv = 0; iv < nv; ++iv) {
    const double hv = h_values[iv];
    const double r = rho[iv];
    double* row = out.data() + iv * ny;
    for (Eigen::Index iy = 0; iy < ny; ++iy) {
      const double diff = y_axis.center(static_cast<int>(iy)) - hv;
      row[iy] = r * norm * std::exp(-0.5 * inv * diff * diff);
    }
  }
  return out;
}

void grid_moments(const GridDensity& g, Vec& mean, Mat& cov, bool parallel) {
  const int d = g.dim();
  const Eigen::Index n = g.n_cells();

  struct MeanAcc {
    Vec sum;
    MeanAcc& operator+=(const MeanAcc& o) {
      sum += o.sum;
      return *this;
    }
  };
  MeanAcc zero_m{Vec::Zero(d)};
  MeanAcc m = blocked_reduce(
      n, zero_m,
      [&](Eigen::Index i0, Eigen::Index i1, MeanAcc& acc) {
        double c[4];
        for (Eigen::Index i = i0; i < i1; ++i) {
          flat_to_center(g.axes, i, c);
          const double w = g.values[i];
          for (int a = 0; a < d; ++a) acc.sum[a] += w * c[a];
        }
      },
      parallel);
  mean = m.sum * g.cell_volume;

  struct CovAcc {
    Mat sum;
    CovAcc& operator+=(const CovAcc& o) {
      sum += o.sum;
      return *this;
    }
  };
  CovAcc zero_c{Mat::Zero(d, d)};
  CovAcc cv = blocked_reduce(
      n, zero_c,
      [&](Eigen::Index i0, Eigen::Index i1, CovAcc& acc) {
        double c[4];
        for (Eigen::Index i = i0; i < i1; ++i) {
          flat_to_center(g.axes, i, c);
          const double w = g.values[i];
          for (int a = 0; a < d; ++a) {
            const double da = c[a] - mean[a];
            for (int b = 0; b <= a; ++b) {
              acc.sum(a, b) += w * da * (c[b] - mean[b]);
            }
          }
        }
      },
      parallel);
  cov = cv.sum * g.cell_volume;
  cov = cov.selfadjointView<Eigen::Lower>();
}

double weighted_abs_diff(const GridDensity& a, const GridDensity& b,
                         bool parallel) {
  if (!a.same_grid(b)) {
    throw IncompatibleGridsError("weighted_abs_diff: grids differ");
  }
  const int d = a.dim();
  const double sum = blocked_reduce(
      a.n_cells(), 0.0,
      [&](Eigen::Index i0, Eigen::Index i1, double& acc) {
        double c[4];
        for (Eigen::Index i = i0; i < i1; ++i) {
          flat_to_center(a.axes, i, c);
          double g = 1.0;
          for (int ax = 0; ax < d; ++ax) g += c[ax] * c[ax];
          acc += g * std::abs(a.values[i] - b.values[i]);
        }
      },
      parallel);
  return sum * a.cell_volume;
}

Eigen::ArrayXd gaussian_on_grid(const GridSpec& axes, const GaussianMoments& m,
                                bool parallel) {
  const int d = static_cast<int>(axes.size());
  if (m.dim() != d) {
    throw InvalidCovarianceError("gaussian_on_grid: dimension mismatch");
  }
  const GaussKernel k(m.cov);
  const Eigen::Index n = spec_cell_count(axes);
  Eigen::ArrayXd out(n);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    double c[4];
    flat_to_center(axes, i, c);
    double q = 0.0;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        q += (c[a] - m.mean[a]) * k.sigma_inv(a, b) * (c[b] - m.mean[b]);
      }
    }
    out[i] = k.norm * std::exp(-0.5 * q);
  }
  return out;
}

Vec ensemble_mean(const Mat& particles, bool parallel) {
  const int d = static_cast<int>(particles.rows());
  const Eigen::Index j = particles.cols();
  struct Acc {
    Vec sum;
    Acc& operator+=(const Acc& o) {
      sum += o.sum;
      return *this;
    }
  };
  Acc zero{Vec::Zero(d)};
  Acc total = blocked_reduce(
      j, zero,
      [&](Eigen::Index i0, Eigen::Index i1, Acc& acc) {
        for (Eigen::Index i = i0; i < i1; ++i) acc.sum += particles.col(i);
      },
      parallel);
  return total.sum / static_cast<double>(j);
}

Mat ensemble_covariance(const Mat& particles, const Vec& mean, bool parallel) {
  return cross_covariance(particles, mean, particles, mean, parallel);
}

Mat cross_covariance(const Mat& a, const Vec& mean_a, const Mat& b,
                     const Vec& mean_b, bool parallel) {
  const Eigen::Index j = a.cols();
  struct Acc {
    Mat sum;
    Acc& operator+=(const Acc& o) {
      sum += o.sum;
      return *this;
    }
  };
  Acc zero{Mat::Zero(a.rows(), b.rows())};
  Acc total = blocked_reduce(
      j, zero,
      [&](Eigen::Index i0, Eigen::Index i1, Acc& acc) {
        for (Eigen::Index i = i0; i < i1; ++i) {
          acc.sum.noalias() +=
              (a.col(i) - mean_a) * (b.col(i) - mean_b).transpose();
        }
      },
      parallel);
  return total.sum / static_cast<double>(j - 1);
}

}  // namespace enkf::kernels
