#include <doctest.h>

#include <cmath>

#include "enkf/errors.hpp"
#include "enkf/filters.hpp"
#include "enkf/measures.hpp"
#include "enkf/rng.hpp"

using namespace enkf;

namespace {

Ensemble two_points(double a, double b) {
  Ensemble e;
  e.particles.resize(1, 2);
  e.particles << a, b;
  return e;
}

GridDensity gaussian_mixture_2d(const GridSpec& spec) {
  const Mat cov = 0.25 * Mat::Identity(2, 2);
  const GridDensity g1 =
      gaussian_to_grid({Vec::Constant(2, -2.0), cov}, spec);
  const GridDensity g2 = gaussian_to_grid({Vec::Constant(2, 2.0), cov}, spec);
  GridDensity mix = g1;
  mix.values = 0.5 * (g1.values + g2.values);
  mix.normalize();
  return mix;
}

}  // namespace

TEST_CASE("two-point ensemble moments") {
  const GaussianMoments m = empirical_moments(two_points(0.0, 2.0));
  CHECK(m.mean[0] == 1.0);
  CHECK(m.cov(0, 0) == 2.0);  // divisor J-1 = 1

  const GaussianMoments sym = empirical_moments(two_points(-1.0, 1.0));
  CHECK(sym.mean[0] == 0.0);
  CHECK(sym.cov(0, 0) == 2.0);
}

TEST_CASE("degenerate ensembles and guards") {
  Ensemble same;
  same.particles = Mat::Constant(2, 5, 1.5);
  const GaussianMoments m = empirical_moments(same);
  CHECK(m.cov.norm() == 0.0);

  Ensemble single;
  single.particles = Mat::Zero(1, 1);
  CHECK_THROWS_AS(empirical_moments(single), InsufficientDataError);
}

TEST_CASE("empirical covariance matches a two-pass oracle") {
  RngStream gen(derive_key(21, {stream::kVerify, 50}));
  Ensemble e;
  e.particles.resize(3, 200);
  for (Eigen::Index j = 0; j < 200; ++j) {
    for (int i = 0; i < 3; ++i) e.particles(i, j) = gen.normal();
  }
  const GaussianMoments m = empirical_moments(e);
  Vec mean = Vec::Zero(3);
  for (Eigen::Index j = 0; j < 200; ++j) mean += e.particles.col(j);
  mean /= 200.0;
  Mat cov = Mat::Zero(3, 3);
  for (Eigen::Index j = 0; j < 200; ++j) {
    const Vec c = e.particles.col(j) - mean;
    cov += c * c.transpose();
  }
  cov /= 199.0;
  CHECK((m.mean - mean).norm() < 1e-12);
  CHECK((m.cov - cov).norm() < 1e-12);
}

TEST_CASE("sampled covariance recovers the target within 3 percent") {
  Mat cov(2, 2);
  cov << 1.0, 0.0, 0.0, 4.0;
  const Ensemble e = sample_ensemble(Vec::Zero(2), cov, 100000,
                                     derive_key(33, {stream::kVerify, 51}));
  const GaussianMoments m = empirical_moments(e);
  CHECK((m.cov - cov).norm() / cov.norm() < 0.03);
}

TEST_CASE("joint moments of paired clouds") {
  JointEnsemble pairs;
  pairs.state.resize(1, 2);
  pairs.state << 0.0, 2.0;
  pairs.data = pairs.state;
  const JointGaussianMoments jm = joint_empirical_moments(pairs);
  CHECK(jm.mean_v[0] == 1.0);
  CHECK(jm.mean_y[0] == 1.0);
  CHECK(jm.cvv(0, 0) == 2.0);
  CHECK(jm.cvy(0, 0) == 2.0);
  CHECK(jm.cyy(0, 0) == 2.0);

  JointEnsemble flat;
  flat.state.resize(1, 4);
  flat.state << -1.0, 0.0, 1.0, 2.0;
  flat.data = Mat::Constant(1, 4, 3.0);
  const JointGaussianMoments fm = joint_empirical_moments(flat);
  CHECK(fm.cvy(0, 0) == 0.0);
  CHECK(fm.cyy(0, 0) == 0.0);
}

TEST_CASE("joint moments of an additive-noise pair match the analytic blocks") {
  RngStream gen(derive_key(34, {stream::kVerify, 52}));
  const Eigen::Index n = 100000;
  JointEnsemble pairs;
  pairs.state.resize(1, n);
  pairs.data.resize(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = gen.normal();
    pairs.state(0, j) = v;
    pairs.data(0, j) = v + gen.normal();
  }
  const JointGaussianMoments jm = joint_empirical_moments(pairs);
  CHECK(std::abs(jm.cvy(0, 0) - 1.0) < 0.03);
  CHECK(std::abs(jm.cyy(0, 0) - 2.0) < 0.05);
}

TEST_CASE("projection of a discretized Gaussian returns its moments") {
  const GridSpec spec = {GridAxis{-8.0, 8.0, 400}};
  const GridDensity g = gaussian_to_grid({Vec::Zero(1), Mat::Identity(1, 1)}, spec);
  CHECK(std::abs(g.mass() - 1.0) <= 1e-8);
  const GaussianMoments m = gaussian_projection(g);
  CHECK(std::abs(m.mean[0]) < 1e-6);
  CHECK(std::abs(m.cov(0, 0) - 1.0) < 1e-4);
}

TEST_CASE("projection of the symmetric mixture matches the mixture formula") {
  const GridSpec spec = {GridAxis{-8.0, 8.0, 800}};
  const GridDensity a =
      gaussian_to_grid({Vec::Constant(1, -2.0), Mat::Constant(1, 1, 0.25)}, spec);
  const GridDensity b =
      gaussian_to_grid({Vec::Constant(1, 2.0), Mat::Constant(1, 1, 0.25)}, spec);
  GridDensity mix = a;
  mix.values = 0.5 * (a.values + b.values);
  mix.normalize();
  const GaussianMoments m = gaussian_projection(mix);
  CHECK(std::abs(m.mean[0]) < 1e-6);
  CHECK(std::abs(m.cov(0, 0) - 4.25) < 1e-3);  // 0.25 + 2^2
}

TEST_CASE("round-trip projection through a grid") {
  const GaussianMoments target{Vec::Constant(1, 1.0), Mat::Constant(1, 1, 2.0)};
  const GridSpec spec = auto_grid_spec(target, 400);
  const GaussianMoments m = gaussian_projection(gaussian_to_grid(target, spec));
  CHECK(std::abs(m.mean[0] - 1.0) < 1e-3);
  CHECK(std::abs(m.cov(0, 0) - 2.0) < 1e-2);
}

TEST_CASE("auto grid extent covers six standard deviations") {
  const GridSpec spec =
      auto_grid_spec({Vec::Zero(1), Mat::Identity(1, 1)}, 400);
  REQUIRE(spec.size() == 1);
  CHECK(spec[0].cells == 400);
  CHECK(spec[0].lo <= -5.99);
  CHECK(spec[0].hi >= 5.99);
}

TEST_CASE("coverage reporting flags a mean far outside the box") {
  const GridSpec spec = {GridAxis{-8.0, 8.0, 400}};
  double coverage = 0.0;
  gaussian_to_grid({Vec::Constant(1, 12.0), Mat::Identity(1, 1)}, spec,
                   &coverage);
  CHECK(coverage < kDefaultMinCoverage);

  double good = 0.0;
  gaussian_to_grid({Vec::Zero(1), Mat::Identity(1, 1)}, spec, &good);
  CHECK(good >= kDefaultMinCoverage);

  // A Gaussian that misses the box entirely has no mass to normalize.
  CHECK_THROWS_AS(
      gaussian_to_grid({Vec::Constant(1, 100.0), Mat::Identity(1, 1)}, spec),
      DomainError);
}

TEST_CASE("weighted tv of identical and renormalized densities") {
  const GridSpec spec = {GridAxis{-10.0, 10.0, 500}};
  const GridDensity g = gaussian_to_grid({Vec::Zero(1), Mat::Identity(1, 1)}, spec);
  CHECK(weighted_tv(g, g) == 0.0);
  GridDensity copy = g;
  copy.normalize();
  CHECK(weighted_tv(g, copy) <= 1e-8);
}

TEST_CASE("weighted tv against an independent quadrature value") {
  const GridSpec spec = {GridAxis{-10.0, 10.0, 2000}};
  const GridDensity mu = gaussian_to_grid({Vec::Zero(1), Mat::Identity(1, 1)}, spec);
  const GridDensity nu =
      gaussian_to_grid({Vec::Constant(1, 0.5), Mat::Identity(1, 1)}, spec);
  // int (1+v^2) |N(0,1) - N(0.5,1)| dv by adaptive quadrature.
  const double oracle = 1.2256718851077;
  CHECK(weighted_tv(mu, nu) == doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("weighted tv refuses mismatched grids") {
  const GridDensity a =
      gaussian_to_grid({Vec::Zero(1), Mat::Identity(1, 1)},
                       {GridAxis{-8.0, 8.0, 100}});
  const GridDensity b =
      gaussian_to_grid({Vec::Zero(1), Mat::Identity(1, 1)},
                       {GridAxis{-8.0, 8.0, 101}});
  CHECK_THROWS_AS(weighted_tv(a, b), IncompatibleGridsError);
}

TEST_CASE("gaussianity gap vanishes on Gaussians at the grid tolerance") {
  GridSpec spec = {GridAxis{-7.0, 7.0, 120}, GridAxis{-7.0, 7.0, 120}};
  Mat cov(2, 2);
  cov << 1.0, 0.4, 0.4, 1.2;
  const GridDensity pi = gaussian_to_grid({Vec::Zero(2), cov}, spec);
  // Discretization tolerance measured on the same grid: distance between
  // the density and the re-gridded projection of its own moments.
  const GridDensity ref = gaussian_to_grid(gaussian_projection(pi), spec);
  const double tol = weighted_tv(pi, ref);
  CHECK(gaussianity_gap(pi) <= 2.0 * tol + 1e-12);
}

TEST_CASE("gaussianity gap detects the bimodal joint") {
  const GridSpec coarse = {GridAxis{-8.0, 8.0, 100}, GridAxis{-8.0, 8.0, 100}};
  const GridSpec fine = {GridAxis{-8.0, 8.0, 200}, GridAxis{-8.0, 8.0, 200}};
  const double gap_coarse = gaussianity_gap(gaussian_mixture_2d(coarse));
  const double gap_fine = gaussianity_gap(gaussian_mixture_2d(fine));
  CHECK(gap_coarse > 0.1);
  CHECK(std::abs(gap_fine - gap_coarse) / gap_coarse < 0.05);
}

TEST_CASE("normalization is idempotent") {
  const GridSpec spec = {GridAxis{-5.0, 5.0, 64}};
  RngStream gen(derive_key(90, {stream::kVerify, 53}));
  GridDensity g = zeros_on(spec);
  for (Eigen::Index i = 0; i < g.values.size(); ++i) {
    g.values[i] = std::exp(gen.normal());
  }
  g.normalize();
  const Eigen::ArrayXd snapshot = g.values;
  const double second = g.normalize();
  CHECK(second == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((g.values == snapshot).all());
}

TEST_CASE("metric axioms hold on random triples") {
  const GridSpec spec = {GridAxis{-4.0, 4.0, 48}};
  RngStream gen(derive_key(91, {stream::kVerify, 54}));
  const auto random_density = [&] {
    GridDensity g = zeros_on(spec);
    for (Eigen::Index i = 0; i < g.values.size(); ++i) {
      g.values[i] = std::exp(gen.normal());
    }
    g.normalize();
    return g;
  };
  for (int t = 0; t < 10; ++t) {
    const GridDensity mu = random_density();
    const GridDensity nu = random_density();
    const GridDensity rho = random_density();
    CHECK(weighted_tv(mu, mu) == 0.0);
    CHECK(weighted_tv(mu, nu) == weighted_tv(nu, mu));
    CHECK(weighted_tv(mu, nu) > 0.0);
    CHECK(weighted_tv(mu, nu) <=
          weighted_tv(mu, rho) + weighted_tv(rho, nu) + 1e-12);
  }
}
