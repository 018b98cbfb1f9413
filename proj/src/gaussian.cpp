#include "qmix/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "qmix/error.hpp"

namespace qmix {

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
  const Eigen::Index d = cov.rows();
  if (d == 0 || cov.cols() != d) throw Error(ErrorCode::InvalidArgument, "covariance must be square and non-empty");
  if (!cov.allFinite()) throw Error(ErrorCode::NotPositiveDefinite, "covariance has non-finite entries");
  const double tol = 1e-12 * cov.trace() / static_cast<double>(d);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = cov(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
    if (!(pivot > tol) || !(tol > 0.0))
      throw Error(ErrorCode::NotPositiveDefinite, "covariance is not positive definite");
    L(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double s = cov(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

Eigen::MatrixXd condition_covariance(const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd c = 0.5 * (cov + cov.transpose());
  try {
    cholesky_factor(c);
    return c;
  } catch (const Error&) {
  }
  const double floor = 1e-9 * c.trace() / static_cast<double>(c.rows());
  if (!(floor > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "covariance has non-positive trace");
  c.diagonal().array() += floor;
  cholesky_factor(c);
  return c;
}

GaussianClass::GaussianClass(Eigen::VectorXd mu, Eigen::MatrixXd cov)
    : mu_(std::move(mu)), cov_(std::move(cov)) {
  if (cov_.rows() != mu_.size() || cov_.cols() != mu_.size())
    throw Error(ErrorCode::LengthMismatch, "mean and covariance dimensions differ");
  if (!mu_.allFinite()) throw Error(ErrorCode::InvalidArgument, "mean has non-finite entries");
  const double scale = cov_.cwiseAbs().maxCoeff();
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(ErrorCode::NotPositiveDefinite, "covariance is not symmetric");
  chol_ = cholesky_factor(cov_);
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

double GaussianClass::log_normalizer() const {
  return 0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + 0.5 * log_det_;
}

double quad_form(const Eigen::VectorXd& p, const GaussianClass& cls) {
  if (p.size() != cls.dim()) throw Error(ErrorCode::LengthMismatch, "point and class dimensions differ");
  Eigen::VectorXd z = cls.chol().triangularView<Eigen::Lower>().solve(p - cls.mu());
  return z.squaredNorm();
}

double log_classical_density(const Eigen::VectorXd& p, const GaussianClass& cls) {
  return -0.5 * quad_form(p, cls) - cls.log_normalizer();
}

double classical_density(const Eigen::VectorXd& p, const GaussianClass& cls) {
  return std::exp(log_classical_density(p, cls));
}

}  // namespace qmix
