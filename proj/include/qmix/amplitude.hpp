#pragma once

#include <Eigen/Dense>

#include "qmix/dataset.hpp"
#include "qmix/gaussian.hpp"

namespace qmix {

// Amplitudes G_ik = g_ik / ||g_k|| of one class over a dataset, where
// g_ik = exp(-q_ik / 4). log_values is kept alongside because far points
// underflow in the linear domain long before they do in the log domain.
struct AmplitudeColumn {
  Eigen::VectorXd values;
  Eigen::VectorXd log_values;
  double norm_raw = 0.0;
  double log_norm_raw = 0.0;
};

AmplitudeColumn amplitude_column(const Dataset& data, const GaussianClass& cls);
// Normalizes arbitrary raw log-amplitudes; the result is invariant to adding
// a constant to every entry.
AmplitudeColumn amplitude_column_from_log(const Eigen::VectorXd& log_raw);

double overlap(const AmplitudeColumn& a, const AmplitudeColumn& b);
double log_overlap(const AmplitudeColumn& a, const AmplitudeColumn& b);

double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace qmix
