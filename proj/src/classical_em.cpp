#include "qmix/classical_em.hpp"

#include <cmath>

#include "qmix/error.hpp"
#include "qmix/kernels.hpp"

namespace qmix {

Responsibilities::Responsibilities(Eigen::MatrixXd q) : q_(std::move(q)) {
  if (q_.rows() < 1 || q_.cols() < 1) throw Error(ErrorCode::InvalidArgument, "empty responsibilities");
  for (Eigen::Index i = 0; i < q_.rows(); ++i) {
    const double s = q_.row(i).sum();
    if (!(std::abs(s - 1.0) <= 1e-10) || q_.row(i).minCoeff() < 0.0 || q_.row(i).maxCoeff() > 1.0)
      throw Error(ErrorCode::InvalidArgument, "responsibility row " + std::to_string(i) + " is not on the simplex");
  }
}

ClassicalMixture::ClassicalMixture(std::vector<GaussianClass> cls, Eigen::VectorXd pri)
    : classes(std::move(cls)), priors(std::move(pri)) {
  if (classes.size() < 2) throw Error(ErrorCode::InvalidArgument, "mixture needs at least two classes");
  if (priors.size() != k()) throw Error(ErrorCode::LengthMismatch, "one prior per class required");
  if (std::abs(priors.sum() - 1.0) > 1e-12 || priors.minCoeff() < 0.0 || priors.maxCoeff() > 1.0)
    throw Error(ErrorCode::InvalidArgument, "priors must lie on the simplex");
  for (const auto& c : classes)
    if (c.dim() != classes.front().dim()) throw Error(ErrorCode::LengthMismatch, "classes differ in dimension");
}

namespace {

// Unnormalized log posteriors log pi_k + log N(p_i | k).
Eigen::MatrixXd log_joint(const Dataset& data, const ClassicalMixture& mix) {
  if (mix.classes.front().dim() != data.d()) throw Error(ErrorCode::LengthMismatch, "mixture and dataset dimensions differ");
  Eigen::MatrixXd lp(data.n(), mix.k());
  for (Eigen::Index k = 0; k < mix.k(); ++k) {
    const auto& c = mix.classes[k];
    Eigen::VectorXd q = kernels::quad_forms(data.points(), c.mu(), c.chol());
    lp.col(k) = (-0.5 * q).array() - c.log_normalizer() + std::log(mix.priors(k));
  }
  return lp;
}

struct EStep {
  Eigen::MatrixXd q;
  double log_likelihood;
};

EStep e_step(const Dataset& data, const ClassicalMixture& mix) {
  Eigen::MatrixXd lp = log_joint(data, mix);
  Eigen::VectorXd lse = kernels::log_softmax_rows(lp);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < lse.size(); ++i) {
    if (!std::isfinite(lse(i)))
      throw Error(ErrorCode::AllZeroRow, "every class density vanishes at point " + std::to_string(i));
    ll += lse(i);
  }
  return {lp.array().exp().matrix(), ll};
}

}  // namespace

Responsibilities classical_e_step(const Dataset& data, const ClassicalMixture& mix) {
  EStep e = e_step(data, mix);
  for (Eigen::Index i = 0; i < e.q.rows(); ++i) e.q.row(i) /= e.q.row(i).sum();
  return Responsibilities(std::move(e.q));
}

double classical_log_likelihood(const Dataset& data, const ClassicalMixture& mix) {
  return e_step(data, mix).log_likelihood;
}

ClassicalMixture classical_m_step(const Dataset& data, const Responsibilities& q) {
  if (q.n() != data.n()) throw Error(ErrorCode::LengthMismatch, "responsibilities and dataset differ in N");
  const Eigen::Index d = data.d();
  std::vector<GaussianClass> classes;
  Eigen::VectorXd priors(q.k());
  for (Eigen::Index k = 0; k < q.k(); ++k) {
    const double nk = q.q().col(k).sum();
    if (!(nk > 1e-8)) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(k) + " received no weight");
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < data.n(); ++i) mu += q.q()(i, k) * data.point(i);
    mu /= nk;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      Eigen::VectorXd r = data.point(i) - mu;
      cov += q.q()(i, k) * r * r.transpose();
    }
    cov /= nk;
    classes.emplace_back(mu, condition_covariance(cov));
    priors(k) = nk / static_cast<double>(data.n());
  }
  priors /= priors.sum();
  return ClassicalMixture(std::move(classes), priors);
}

FitReport<ClassicalMixture> classical_fit(const Dataset& data, const ClassicalMixture& init,
                                          const ConvergenceConfig& cfg) {
  if (data.n() < 2) throw Error(ErrorCode::InvalidArgument, "fitting needs at least two points");
  ClassicalMixture params = init;
  std::vector<ClassicalMixture> params_trace;
  std::vector<double> trace;
  std::vector<Eigen::VectorXd> counts;
  bool converged = false;
  int m_steps = 0;
  EStep e = e_step(data, params);
  for (;;) {
    params_trace.push_back(params);
    trace.push_back(e.log_likelihood);
    counts.push_back(e.q.colwise().sum().transpose());
    const std::size_t t = trace.size();
    if (t > 1 && std::abs(trace[t - 1] - trace[t - 2]) <= cfg.tol * std::abs(trace[t - 1])) {
      converged = true;
      break;
    }
    if (m_steps >= cfg.max_iter) break;
    params = classical_m_step(data, Responsibilities(e.q));
    ++m_steps;
    e = e_step(data, params);
  }
  for (Eigen::Index i = 0; i < e.q.rows(); ++i) e.q.row(i) /= e.q.row(i).sum();
  Responsibilities q(std::move(e.q));
  Eigen::VectorXd n = q.column_sums();
  return {std::move(params), std::move(params_trace), std::move(trace), std::move(counts), std::move(q), std::move(n), m_steps, converged};
}

std::vector<Eigen::Index> distinct_indices(Eigen::Index n, int k, std::mt19937_64& rng) {
  if (n < k) throw Error(ErrorCode::InvalidArgument, "not enough points to pick distinct centers");
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> out;
  while (static_cast<int>(out.size()) < k) {
    Eigen::Index i = pick(rng);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

ClassicalMixture random_classical_init(const Dataset& data, int k, std::mt19937_64& rng) {
  Eigen::MatrixXd cov = condition_covariance(data.covariance());
  std::vector<GaussianClass> classes;
  for (Eigen::Index i : distinct_indices(data.n(), k, rng)) classes.emplace_back(data.point(i), cov);
  return ClassicalMixture(std::move(classes), Eigen::VectorXd::Constant(k, 1.0 / k));
}

}  // namespace qmix
