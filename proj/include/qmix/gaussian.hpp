#pragma once

#include <Eigen/Dense>

namespace qmix {

// Lower-triangular L with L L^T = cov. Throws NotPositiveDefinite when a
// pivot falls to 1e-12 * trace(cov) / d or below.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov);

// Symmetrizes cov and, if it does not factor, adds 1e-9 * trace / d to the
// diagonal once. Throws NotPositiveDefinite if that is still not enough.
Eigen::MatrixXd condition_covariance(const Eigen::MatrixXd& cov);

class GaussianClass {
 public:
  GaussianClass(Eigen::VectorXd mu, Eigen::MatrixXd cov);

  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  Eigen::Index dim() const { return mu_.size(); }
  double log_det() const { return log_det_; }
  // log Z = (d/2) log(2 pi) + (1/2) log|C|
  double log_normalizer() const;

  GaussianClass with_mu(Eigen::VectorXd mu) const { return {std::move(mu), cov_}; }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double log_det_;
};

double quad_form(const Eigen::VectorXd& p, const GaussianClass& cls);
double log_classical_density(const Eigen::VectorXd& p, const GaussianClass& cls);
double classical_density(const Eigen::VectorXd& p, const GaussianClass& cls);

}  // namespace qmix
