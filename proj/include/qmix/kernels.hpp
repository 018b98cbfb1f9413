#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "qmix/dataset.hpp"

// Per-point loops shared by the EM engines and the color pipeline. Each kernel
// exists as a serial reference and an OpenMP version. Parallel versions only
// split independent per-element work; every reduction runs serially in index
// order, so both produce bit-identical results at any thread count.
namespace qmix::kernels {

// 1 - a1^2 - a2^2, with rounding-level remainders snapped to zero so that the
// classical limit a1^2 + a2^2 = 1 carries no spurious interference term.
inline double constraint_remainder(double a1, double a2) {
  const double c = 1.0 - a1 * a1 - a2 * a2;
  return std::abs(c) <= 4.0 * std::numeric_limits<double>::epsilon() ? 0.0 : c;
}

// Per-point pieces of the two-class interference model, from log-amplitudes.
//   log_d: log D_i, D_i = a1^2 G1^2 + a2^2 G2^2 + (alpha o)_i
//   share1, share2: a_k^2 G_ik^2 / D_i
//   cross: (alpha o)_i / D_i
struct InterferenceShares {
  Eigen::VectorXd log_d, share1, share2, cross;
};

// Scaled terms for sum_i log D_i as a function of (s1, s2) = (a1^2, a2^2):
// D_i = exp(shift_i) * (s1 u_i + s2 v_i + (1 - s1 - s2) w_i).
struct MixTerms {
  Eigen::VectorXd u, v, w, shift;
};

namespace serial {
Eigen::VectorXd quad_forms(const Points& pts, const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol);
Eigen::VectorXd log_softmax_rows(Eigen::MatrixXd& logp);
InterferenceShares interference_shares(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2,
                                       double log_ov, double alpha1, double alpha2);
std::vector<double> sum_log_mix(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2);
std::vector<double> interference_objective(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2);
void srgb_to_lab(const std::uint8_t* rgb, std::size_t n, double* lab);
}  // namespace serial

namespace parallel {
Eigen::VectorXd quad_forms(const Points& pts, const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol);
Eigen::VectorXd log_softmax_rows(Eigen::MatrixXd& logp);
InterferenceShares interference_shares(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2,
                                       double log_ov, double alpha1, double alpha2);
std::vector<double> sum_log_mix(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2);
std::vector<double> interference_objective(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2);
void srgb_to_lab(const std::uint8_t* rgb, std::size_t n, double* lab);
}  // namespace parallel

// Dispatch used by the library: parallel for large inputs outside an
// enclosing parallel region, serial otherwise.
Eigen::VectorXd quad_forms(const Points& pts, const Eigen::VectorXd& mu, const Eigen::MatrixXd& chol);
// Replaces each row of log-probabilities by its log-softmax; returns row log-sum-exp.
Eigen::VectorXd log_softmax_rows(Eigen::MatrixXd& logp);
InterferenceShares interference_shares(const Eigen::VectorXd& lg1, const Eigen::VectorXd& lg2,
                                       double log_ov, double alpha1, double alpha2);
// sum_i log(s1 u_i + s2 v_i + (1 - s1 - s2) w_i) for each candidate pair; -inf
// when any term is non-positive.
std::vector<double> sum_log_mix(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2);
// Objective sum_i sum_k Q_ik log P_ik with Q taken from the E-step at each
// candidate pair; -inf when any joint probability is non-positive.
std::vector<double> interference_objective(const MixTerms& t, const std::vector<double>& s1, const std::vector<double>& s2);
void srgb_to_lab(const std::uint8_t* rgb, std::size_t n, double* lab);

}  // namespace qmix::kernels
