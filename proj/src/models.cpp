#include "enkf/models.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "enkf/linalg.hpp"
#include "enkf/rng.hpp"

namespace enkf {

namespace {

Mat validated_chol(const Mat& raw, const Mat& cov, const char* what) {
  if (!is_symmetric(raw, 1e-12)) {
    throw InvalidCovarianceError(std::string(what) + ": not symmetric");
  }
  const Mat l = cholesky_lower(cov, what);
  if (relative_frobenius_error(Mat(l * l.transpose()), cov) > 1e-10) {
    throw InvalidCovarianceError(std::string(what) +
                                 ": factor does not reproduce covariance");
  }
  // LLT tolerates semidefinite input; require strictly positive pivots.
  for (int i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) {
      throw InvalidCovarianceError(std::string(what) +
                                   ": nonpositive pivot, matrix not PD");
    }
  }
  return l;
}

Vec draw_normal(RngStream& rng, int dim) {
  Vec z(dim);
  for (int i = 0; i < dim; ++i) z[i] = rng.normal();
  return z;
}

// Odometer over a tensor probe grid with n points per axis.
template <class Fn>
void for_each_probe(const Vec& lo, const Vec& hi, int n, Fn&& fn) {
  const int r = static_cast<int>(lo.size());
  std::vector<int> idx(r, 0);
  Vec x(r);
  while (true) {
    for (int a = 0; a < r; ++a) {
      x[a] = n == 1 ? lo[a] : lo[a] + (hi[a] - lo[a]) * idx[a] / (n - 1);
    }
    fn(x);
    int a = r - 1;
    while (a >= 0 && ++idx[a] == n) idx[a--] = 0;
    if (a < 0) break;
  }
}

}  // namespace

StateModel make_state_model(int dim, MapFn psi, const Mat& sigma) {
  if (dim < 1) throw DomainError("make_state_model: dim must be positive");
  if (sigma.rows() != dim || sigma.cols() != dim) {
    throw InvalidCovarianceError("make_state_model: sigma shape mismatch");
  }
  StateModel m;
  m.dim = dim;
  m.psi = std::move(psi);
  m.sigma = symmetrize(sigma);
  m.sigma_chol = validated_chol(sigma, m.sigma, "state noise covariance");
  return m;
}

ObservationModel make_observation_model(int dim_k, MapFn h, const Mat& gamma) {
  if (dim_k < 1) {
    throw DomainError("make_observation_model: dim_k must be positive");
  }
  if (gamma.rows() != dim_k || gamma.cols() != dim_k) {
    throw InvalidCovarianceError(
        "make_observation_model: gamma shape mismatch");
  }
  ObservationModel m;
  m.dim_k = dim_k;
  m.h = std::move(h);
  m.gamma = symmetrize(gamma);
  m.gamma_chol =
      validated_chol(gamma, m.gamma, "observation noise covariance");
  return m;
}

MapFn sin_perturbation(int dim) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  return [scale](const Vec& v) { return Vec(scale * v.array().sin()); };
}

MapFn tanh_perturbation(int in_dim, int out_dim) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(out_dim));
  return [in_dim, out_dim, scale](const Vec& v) {
    Vec out(out_dim);
    for (int i = 0; i < out_dim; ++i) out[i] = scale * std::tanh(v[i % in_dim]);
    return out;
  };
}

MapFn affine_map(const Mat& a, const Vec& b) {
  return [a, b](const Vec& v) { return Vec(a * v + b); };
}

MapFn identity_map() {
  return [](const Vec& v) { return v; };
}

MapFn zero_map(int out_dim) {
  return [out_dim](const Vec&) { return Vec(Vec::Zero(out_dim)); };
}

std::pair<StateModel, ObservationModel> realize_perturbed(
    const PerturbedAffineFamily& family, int probe_points) {
  if (!(family.epsilon >= 0.0 && family.epsilon <= 1.0)) {
    throw DomainError("realize_perturbed: epsilon must lie in [0, 1]");
  }
  const int d = family.dim_d();
  const int k = family.dim_k();
  const double eps = family.epsilon;

  const MapFn psi0 = affine_map(family.a_matrix, family.b_vector);
  const MapFn h0 = affine_map(family.h_matrix, family.h_offset);
  const MapFn psi_pert = family.psi_perturbation
                             ? family.psi_perturbation
                             : zero_map(d);
  const MapFn h_pert = family.h_perturbation ? family.h_perturbation
                                             : zero_map(k);

  MapFn psi = [psi0, psi_pert, eps](const Vec& v) {
    return Vec(psi0(v) + eps * psi_pert(v));
  };
  MapFn h = [h0, h_pert, eps](const Vec& v) {
    return Vec(h0(v) + eps * h_pert(v));
  };

  // Envelope check on the probe grid: the realized maps must stay inside
  // the epsilon ball around the affine base.
  const Vec lo = Vec::Constant(d, -10.0);
  const Vec hi = Vec::Constant(d, 10.0);
  const double slack = eps + 1e-9;
  double max_psi = 0.0, max_h = 0.0;
  for_each_probe(lo, hi, probe_points, [&](const Vec& x) {
    max_psi = std::max(max_psi, (eps * psi_pert(x)).norm());
    max_h = std::max(max_h, (eps * h_pert(x)).norm());
  });
  if (max_psi > slack || max_h > slack) {
    throw DomainError(
        "realize_perturbed: perturbation exceeds the epsilon envelope");
  }

  return {make_state_model(d, std::move(psi), family.sigma),
          make_observation_model(k, std::move(h), family.gamma)};
}

Trajectory simulate_trajectory(const StateModel& state,
                               const ObservationModel& obs,
                               const Vec& init_mean, const Mat& init_cov,
                               int n_steps, std::uint64_t seed) {
  if (n_steps < 1) throw DomainError("simulate_trajectory: n_steps >= 1");
  if (init_cov.rows() != state.dim || init_cov.cols() != state.dim) {
    throw InvalidCovarianceError("simulate_trajectory: init_cov shape");
  }
  const Mat init_chol = cholesky_lower(init_cov, "initial covariance");

  RngStream rng(derive_key(seed, {stream::kTrajectory}));
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(n_steps + 1);
  traj.observations.reserve(n_steps);

  Vec v = init_mean + init_chol * draw_normal(rng, state.dim);
  traj.states.push_back(v);
  for (int n = 0; n < n_steps; ++n) {
    v = state.psi(v) + state.sigma_chol * draw_normal(rng, state.dim);
    traj.states.push_back(v);
    const Vec y = obs.h(v) + obs.gamma_chol * draw_normal(rng, obs.dim_k);
    traj.observations.push_back(y);
  }
  return traj;
}

ModelBounds estimate_model_bounds(const MapFn& f, const Vec& box_lo,
                                  const Vec& box_hi, int n_probe) {
  const int r = static_cast<int>(box_lo.size());
  if (box_hi.size() != r) {
    throw DomainError("estimate_model_bounds: box shape mismatch");
  }
  for (int a = 0; a < r; ++a) {
    if (!(box_hi[a] > box_lo[a])) {
      throw DomainError("estimate_model_bounds: degenerate probe box");
    }
  }
  if (n_probe < 2) {
    throw DomainError("estimate_model_bounds: need n_probe >= 2 per axis");
  }

  // Evaluate once per probe point, then compare neighbors along each axis.
  std::vector<Vec> points;
  std::vector<Vec> values;
  for_each_probe(box_lo, box_hi, n_probe, [&](const Vec& x) {
    points.push_back(x);
    values.push_back(f(x));
  });

  ModelBounds out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.kappa_hat =
        std::max(out.kappa_hat, values[i].norm() / (1.0 + points[i].norm()));
  }

  // Neighbor strides in the flattened odometer order (last axis fastest).
  std::vector<std::size_t> stride(r, 1);
  for (int a = r - 2; a >= 0; --a) {
    stride[a] = stride[a + 1] * static_cast<std::size_t>(n_probe);
  }
  std::vector<int> idx(r, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int a = 0; a < r; ++a) {
      if (idx[a] + 1 < n_probe) {
        const std::size_t nb = i + stride[a];
        const double dist = (points[nb] - points[i]).norm();
        if (dist > 0.0) {
          out.lipschitz_hat = std::max(
              out.lipschitz_hat, (values[nb] - values[i]).norm() / dist);
        }
      }
    }
    int a = r - 1;
    while (a >= 0 && ++idx[a] == n_probe) idx[a--] = 0;
  }
  return out;
}

}  // namespace enkf
