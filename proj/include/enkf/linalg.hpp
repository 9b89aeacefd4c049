#pragma once

#include "enkf/types.hpp"

namespace enkf {

// Max |m - m^T| relative to max |m| (0 for the zero matrix).
double symmetry_defect(const Mat& m);

inline bool is_symmetric(const Mat& m, double rel_tol = 1e-12) {
  return symmetry_defect(m) <= rel_tol;
}

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double relative_frobenius_error(const Mat& a, const Mat& b);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& m);

// Lower Cholesky factor of a symmetric positive-definite matrix.
// Throws InvalidCovarianceError on asymmetry or factorization failure.
Mat cholesky_lower(const Mat& m, const char* what = "matrix");

// SPD factorization with the escalating jitter policy: the matrix is
// factored as m + j * (trace(m)/dim) * I with j = 1e-10, escalated by 10x
// up to 1e-6. Throws SingularInnovationError when every level fails.
struct SpdFactor {
  Eigen::LLT<Mat> llt;
  double jitter_applied = 0.0;  // absolute diagonal shift that succeeded

  template <class Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return llt.solve(rhs);
  }
};

SpdFactor factor_spd_jittered(const Mat& m, const char* what = "innovation");

// Validates the GaussianMoments invariants: cov symmetric to 1e-12
// relative tolerance, eigenvalues >= -1e-10. Throws InvalidCovarianceError.
void validate_moments(const GaussianMoments& m, const char* what = "moments");

// Validates the assembled joint block matrix (symmetric PSD up to 1e-10).
void validate_joint_moments(const JointGaussianMoments& m,
                            const char* what = "joint moments");

}  // namespace enkf
