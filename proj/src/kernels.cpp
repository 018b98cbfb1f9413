#include "qmix/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <limits>

#include "qmix/color.hpp"

namespace qmix::kernels {

namespace {

constexpr Eigen::Index kParallelThreshold = 2048;

inline double quad_at(const Points& pts, Eigen::Index i, const Eigen::VectorXd& mu, const Eigen::MatrixXd& L) {
  // Forward substitution L z = p - mu for d <= 3.
  const Eigen::Index d = mu.size();
  double z[3];
  double q = 0.0;
  for (Eigen::Index r = 0; r < d; ++r) {
    double s = pts(i, r) - mu(r);
    for (Eigen::Index c = 0; c < r; ++c) s -= L(r, c) * z[c];
    z[r] = s / L(r, r);
    q += z[r] * z[r];
  }
  return q;
}

inline double softmax_row(Eigen::MatrixXd& logp, Eigen::Index i) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < logp.cols(); ++k) m = std::max(m, logp(i, k));
  if (!std::isfinite(m)) {
    for (Eigen::Index k = 0; k < logp.cols(); ++k) logp(i, k) = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < logp.cols(); ++k) s += std::exp(logp(i, k) - m);
  const double lse = m + std::log(s);
  for (Eigen::Index k = 0; k < logp.cols(); ++k) logp(i, k) -= lse;
  return lse;
}

struct ShareParams {
  double log_s1, log_s2, c, log_ov;
};

inline void share_at(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2, const ShareParams& p,
                     InterferenceShares& out, Eigen::Index i) {
  const double t1 = p.log_s1 + 2.0 * lg1(i);
  const double t2 = p.log_s2 + 2.0 * lg2(i);
  const double t12 = lg1(i) + lg2(i) - p.log_ov;
  const double m = std::max(t1, std::max(t2, t12));
  const double a = std::exp(t1 - m);
  const double b = std::exp(t2 - m);
  const double x = p.c * std::exp(t12 - m);
  const double ds = a + b + x;
  out.log_d(i) = ds > 0.0 ? m + std::log(ds) : -std::numeric_limits<double>::infinity();
  out.share1(i) = a / ds;
  out.share2(i) = b / ds;
  out.cross(i) = x / ds;
}

InterferenceShares make_shares(Eigen::Index n) {
  return {Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
}

ShareParams share_params(double log_ov, double alpha1, double alpha2) {
  return {2.0 * std::log(alpha1), 2.0 * std::log(alpha2), constraint_remainder(alpha1, alpha2), log_ov};
}

inline double sum_log_at(const MixTerms& t, double s1, double s2) {
  const double c = 1.0 - s1 - s2;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.u.size(); ++i) {
    const double d = s1 * t.u(i) + s2 * t.v(i) + c * t.w(i);
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    acc += std::log(d);
  }
  return acc;
}

inline double objective_at(const MixTerms& t, double s1, double s2) {
  const double hc = 0.5 * (1.0 - s1 - s2);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t.u.size(); ++i) {
    const double p1 = s1 * t.u(i) + hc * t.w(i);
    const double p2 = s2 * t.v(i) + hc * t.w(i);
    if (!(p1 > 0.0 && p2 > 0.0)) return -std::numeric_limits<double>::infinity();
    acc += t.shift(i) + (p1 * std::log(p1) + p2 * std::log(p2)) / (p1 + p2);
  }
  return acc;
}

inline void lab_at(const std::uint8_t* rgb, double* lab, std::size_t i) {
  Lab v = qmix::srgb_to_lab(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  lab[3 * i] = v.L;
  lab[3 * i + 1] = v.a;
  lab[3 * i + 2] = v.b;
}

bool use_parallel(Eigen::Index n) { return n >= kParallelThreshold && !omp_in_parallel() && omp_get_max_threads() > 1; }

}  // namespace

namespace serial {

Eigen::VectorXd quad_forms(const Points& pts, const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol) {
  Eigen::VectorXd out(pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) out(i) = quad_at(pts, i, mu, chol);
  return out;
}

Eigen::VectorXd log_softmax_rows(Eigen::MatrixXd& logp) {
  Eigen::VectorXd lse(logp.rows());
  for (Eigen::Index i = 0; i < logp.rows(); ++i) lse(i) = softmax_row(logp, i);
  return lse;
}

InterferenceShares interference_shares(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2, double log_ov,
                                       double alpha1, double alpha2) {
  InterferenceShares out = make_shares(lg1.size());
  const ShareParams p = share_params(log_ov, alpha1, alpha2);
  for (Eigen::Index i = 0; i < lg1.size(); ++i) share_at(lg1, lg2, p, out, i);
  return out;
}

std::vector<double> sum_log_mix(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2) {
  std::vector<double> out(s1.size());
  for (std::size_t j = 0; j < s1.size(); ++j) out[j] = sum_log_at(t, s1[j], s2[j]);
  return out;
}

std::vector<double> interference_objective(const MixTerms& t, const std::vector<double>& s1,
                                           const std::vector<double>& s2) {
  std::vector<double> out(s1.size());
  for (std::size_t j = 0; j < s1.size(); ++j) out[j] = objective_at(t, s1[j], s2[j]);
  return out;
}

void srgb_to_lab(const std::uint8_t* rgb, std::size_t n, double* lab) {
  for (std::size_t i = 0; i < n; ++i) lab_at(rgb, lab, i);
}

}  // namespace serial

namespace parallel {

Eigen::VectorXd quad_forms(const Points& pts, const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol) {
  Eigen::VectorXd out(pts.rows());
  const Eigen::Index n = pts.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) out(i) = quad_at(pts, i, mu, chol);
  return out;
}

Eigen::VectorXd log_softmax_rows(Eigen::MatrixXd& logp) {
  Eigen::VectorXd lse(logp.rows());
  const Eigen::Index n = logp.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) lse(i) = softmax_row(logp, i);
  return lse;
}

InterferenceShares interference_shares(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2, double log_ov,
                                       double alpha1, double alpha2) {
  InterferenceShares out = make_shares(lg1.size());
  const ShareParams p = share_params(log_ov, alpha1, alpha2);
  const Eigen::Index n = lg1.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) share_at(lg1, lg2, p, out, i);
  return out;
}

std::vector<double> sum_log_mix(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2) {
  std::vector<double> out(s1.size());
  const long m = static_cast<long>(s1.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long j = 0; j < m; ++j) out[j] = sum_log_at(t, s1[j], s2[j]);
  return out;
}

std::vector<double> interference_objective(const MixTerms& t, const std::vector<double>& s1,
                                           const std::vector<double>& s2) {
  std::vector<double> out(s1.size());
  const long m = static_cast<long>(s1.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long j = 0; j < m; ++j) out[j] = objective_at(t, s1[j], s2[j]);
  return out;
}

void srgb_to_lab(const std::uint8_t* rgb, std::size_t n, double* lab) {
  const long m = static_cast<long>(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) lab_at(rgb, lab, static_cast<std::size_t>(i));
}

}  // namespace parallel

Eigen::VectorXd quad_forms(const Points& pts, const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol) {
  return use_parallel(pts.rows()) ? parallel::quad_forms(pts, mu, chol) : serial::quad_forms(pts, mu, chol);
}

Eigen::VectorXd log_softmax_rows(Eigen::MatrixXd& logp) {
  return use_parallel(logp.rows()) ? parallel::log_softmax_rows(logp) : serial::log_softmax_rows(logp);
}

InterferenceShares interference_shares(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2, double log_ov,
                                       double alpha1, double alpha2) {
  return use_parallel(lg1.size()) ? parallel::interference_shares(lg1, lg2, log_ov, alpha1, alpha2)
                                  : serial::interference_shares(lg1, lg2, log_ov, alpha1, alpha2);
}

std::vector<double> sum_log_mix(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2) {
  const Eigen::Index work = t.u.size() * static_cast<Eigen::Index>(s1.size());
  return use_parallel(work) ? parallel::sum_log_mix(t, s1, s2) : serial::sum_log_mix(t, s1, s2);
}

std::vector<double> interference_objective(const MixTerms& t, const std::vector<double>& s1,
                                           const std::vector<double>& s2) {
  const Eigen::Index work = t.u.size() * static_cast<Eigen::Index>(s1.size());
  return use_parallel(work) ? parallel::interference_objective(t, s1, s2) : serial::interference_objective(t, s1, s2);
}

void srgb_to_lab(const std::uint8_t* rgb, std::size_t n, double* lab) {
  if (use_parallel(static_cast<Eigen::Index>(n))) parallel::srgb_to_lab(rgb, n, lab);
  else serial::srgb_to_lab(rgb, n, lab);
}

}  // namespace qmix::kernels
