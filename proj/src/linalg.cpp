#include "enkf/linalg.hpp"

#include <string>

namespace enkf {

double symmetry_defect(const Mat& m) {
  if (m.rows() != m.cols()) return 1.0;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

double relative_frobenius_error(const Mat& a, const Mat& b) {
  const double denom = b.norm();
  if (denom == 0.0) return a.norm();
  return (a - b).norm() / denom;
}

double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Mat cholesky_lower(const Mat& m, const char* what) {
  if (!is_symmetric(m)) {
    throw InvalidCovarianceError(std::string(what) + ": not symmetric");
  }
  Eigen::LLT<Mat> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) {
    throw InvalidCovarianceError(std::string(what) +
                                 ": Cholesky factorization failed");
  }
  return llt.matrixL();
}

SpdFactor factor_spd_jittered(const Mat& m, const char* what) {
  const Mat sym = symmetrize(m);
  const double trace_scale = sym.trace() / static_cast<double>(sym.rows());
  const double scale = trace_scale > 0.0 ? trace_scale : 1.0;
  const Mat eye = Mat::Identity(sym.rows(), sym.cols());
  double rel = 0.0;  // clean factorization first, then escalate
  while (rel <= 1.0001e-6) {
    const double shift = rel * scale;
    SpdFactor f;
    f.llt.compute(sym + shift * eye);
    if (f.llt.info() == Eigen::Success) {
      f.jitter_applied = shift;
      return f;
    }
    rel = rel == 0.0 ? 1e-10 : rel * 10.0;
  }
  throw SingularInnovationError(std::string(what) +
                                ": singular after maximum jitter");
}

void validate_moments(const GaussianMoments& m, const char* what) {
  if (m.cov.rows() != m.mean.size() || m.cov.cols() != m.mean.size()) {
    throw InvalidCovarianceError(std::string(what) + ": shape mismatch");
  }
  if (!is_symmetric(m.cov)) {
    throw InvalidCovarianceError(std::string(what) + ": cov not symmetric");
  }
  if (min_eigenvalue(m.cov) < -1e-10) {
    throw InvalidCovarianceError(std::string(what) + ": cov not PSD");
  }
}

void validate_joint_moments(const JointGaussianMoments& m, const char* what) {
  const GaussianMoments full = m.assemble();
  if (!is_symmetric(full.cov, 1e-10)) {
    throw InvalidCovarianceError(std::string(what) + ": block asymmetry");
  }
  if (min_eigenvalue(full.cov) < -1e-10) {
    throw InvalidCovarianceError(std::string(what) + ": not PSD");
  }
}

}  // namespace enkf
