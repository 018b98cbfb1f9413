#include "qmix/amplitude.hpp"

#include <cmath>
#include <limits>

#include "qmix/error.hpp"
#include "qmix/kernels.hpp"

namespace qmix {

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

AmplitudeColumn amplitude_column_from_log(const Eigen::VectorXd& log_raw) {
  if (log_raw.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty amplitude column");
  if (!(log_raw.maxCoeff() > -745.0))
    throw Error(ErrorCode::DegenerateAmplitudes, "all raw amplitudes underflow");
  AmplitudeColumn col;
  col.log_norm_raw = 0.5 * log_sum_exp(2.0 * log_raw);
  col.norm_raw = std::exp(col.log_norm_raw);
  col.log_values = log_raw.array() - col.log_norm_raw;
  col.values = col.log_values.array().exp();
  return col;
}

AmplitudeColumn amplitude_column(const Dataset& data, const GaussianClass& cls) {
  if (cls.dim() != data.d()) throw Error(ErrorCode::LengthMismatch, "class and dataset dimensions differ");
  Eigen::VectorXd q = kernels::quad_forms(data.points(), cls.mu(), cls.chol());
  return amplitude_column_from_log(-0.25 * q);
}

double log_overlap(const AmplitudeColumn& a, const AmplitudeColumn& b) {
  if (a.log_values.size() != b.log_values.size())
    throw Error(ErrorCode::LengthMismatch, "amplitude columns have different lengths");
  return std::min(0.0, log_sum_exp(a.log_values + b.log_values));
}

double overlap(const AmplitudeColumn& a, const AmplitudeColumn& b) {
  return std::exp(log_overlap(a, b));
}

}  // namespace qmix
