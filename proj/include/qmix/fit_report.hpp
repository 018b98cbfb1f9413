#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qmix {

// N x K posterior class probabilities; rows sum to 1 within 1e-10.
class Responsibilities {
 public:
  explicit Responsibilities(Eigen::MatrixXd q);
  const Eigen::MatrixXd& q() const { return q_; }
  Eigen::Index n() const { return q_.rows(); }
  Eigen::Index k() const { return q_.cols(); }
  Eigen::VectorXd column_sums() const { return q_.colwise().sum().transpose(); }

 private:
  Eigen::MatrixXd q_;
};

struct ConvergenceConfig {
  double tol = 1e-8;
  int max_iter = 500;
};

template <class Params>
struct FitReport {
  Params params_final;
  std::vector<Params> param_trace;  // parameters at each E-step
  std::vector<double> objective_trace;
  std::vector<Eigen::VectorXd> count_trace;
  Responsibilities responsibilities;
  Eigen::VectorXd n_per_class;
  int iterations = 0;
  bool converged = false;
};

}  // namespace qmix
