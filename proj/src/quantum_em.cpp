#include "qmix/quantum_em.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "qmix/classical_em.hpp"
#include "qmix/error.hpp"
#include "qmix/kernels.hpp"

namespace qmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Field {
  AmplitudeColumn g1, g2;
  double log_ov = 0.0;    // log sum_i G_i1 G_i2
  Eigen::VectorXd log_o;  // log o_i
};

Field make_field(const Dataset& data, const GaussianClass& c1, const GaussianClass& c2) {
  Field f{amplitude_column(data, c1), amplitude_column(data, c2), 0.0, {}};
  Eigen::VectorXd s = f.g1.log_values + f.g2.log_values;
  f.log_ov = log_sum_exp(s);
  f.log_o = s.array() - f.log_ov;
  return f;
}

Field make_field(const Dataset& data, const QuantumMixture2& mix) { return make_field(data, mix.class1, mix.class2); }

// cos_phi from the normalization constraint. The constraint is enforced to an
// absolute 1e-12 in total probability, which matters only when the overlap is
// so small that rounding in 1 - a1^2 - a2^2 dominates.
double constrained_cos_phi(double a1, double a2, double log_ov) {
  const double c = kernels::constraint_remainder(a1, a2);
  const double ov = std::exp(std::min(0.0, log_ov));
  const double reach = 2.0 * a1 * a2 * ov;
  if (std::abs(c) > reach * (1.0 + 1e-12) + 1e-12)
    throw Error(ErrorCode::ConstraintViolation,
                "amplitudes violate |cos phi| <= 1 (a1=" + std::to_string(a1) + ", a2=" + std::to_string(a2) + ")");
  if (c == 0.0 || reach == 0.0) return 0.0;
  return std::clamp(c / reach, -1.0, 1.0);
}

void check_alpha(double a) {
  if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::ConstraintViolation, "amplitude must lie in (0, 1)");
}

void check_q(const Dataset& data, const Responsibilities& q) {
  if (q.n() != data.n() || q.k() != 2)
    throw Error(ErrorCode::LengthMismatch, "responsibilities must be N x 2 for the dataset");
}

// log(a_k^2 G_ik^2 + (alpha o)_i / 2), NaN when not positive.
double log_joint(double log_s, double lg, double lo, double half_c) {
  const double t = log_s + 2.0 * lg;
  const double m = std::max(t, lo);
  const double v = std::exp(t - m) + half_c * std::exp(lo - m);
  return v > 0.0 ? m + std::log(v) : kNaN;
}

// Surrogate objective and its stationarity weights at evaluation classes
// (c1, c2), with normalizer offsets log_kappa taken from a reference point.
struct Surrogate {
  double objective = 0.0;
  bool feasible = true;
  Eigen::MatrixXd w;  // N x 2 weights W_ik
};

std::array<double, 2> log_kappa(const Field& ref, const QuantumMixture2& mix) {
  // kappa_k = Z_k / S_k with S_k = sum_i g_ik^2 = norm_raw^2.
  return {mix.class1.log_normalizer() - 2.0 * ref.g1.log_norm_raw,
          mix.class2.log_normalizer() - 2.0 * ref.g2.log_norm_raw};
}

Surrogate surrogate(const Dataset& data, const GaussianClass& c1, const GaussianClass& c2, double a1, double a2,
                    const std::array<double, 2>& lkap, const Eigen::MatrixXd& q, bool weights) {
  const Eigen::Index n = data.n();
  const GaussianClass* cls[2] = {&c1, &c2};
  Eigen::VectorXd lr[2], lg[2];
  for (int k = 0; k < 2; ++k) {
    lr[k] = -0.25 * kernels::quad_forms(data.points(), cls[k]->mu(), cls[k]->chol());
    lg[k] = lr[k].array() - 0.5 * cls[k]->log_normalizer() + 0.5 * lkap[k];
  }
  Eigen::VectorXd s = lr[0] + lr[1];
  Eigen::VectorXd lo = s.array() - log_sum_exp(s);
  const double log_s[2] = {2.0 * std::log(a1), 2.0 * std::log(a2)};
  const double half_c = 0.5 * kernels::constraint_remainder(a1, a2);

  Surrogate out;
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 2; ++k) {
      const double t = log_s[k] + 2.0 * lg[k](i);
      const double m = std::max(t, lo(i));
      const double A = std::exp(t - m);
      const double X = half_c * std::exp(lo(i) - m);
      const double P = A + X;
      const double qik = q(i, k);
      if (!(qik > 0.0)) {  // 0 log 0 = 0
        a(i, k) = 0.0;
        continue;
      }
      if (!(P > 0.0)) {
        // Rounding can leave P <= 0 where the E-step clamped Q to ~0.
        if (qik <= 1e-12) {
          a(i, k) = 0.0;
          continue;
        }
        out.feasible = false;
        return out;
      }
      out.objective += qik * (m + std::log(P));
      a(i, k) = qik * A / P;
      b(i) += qik * X / P;
    }
  }
  if (weights) {
    const double bsum = b.sum();
    out.w.resize(n, 2);
    for (int k = 0; k < 2; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) out.w(i, k) = 2.0 * a(i, k) + b(i) - std::exp(lo(i)) * bsum;
    }
  }
  return out;
}

Eigen::VectorXd weighted_mean(const Dataset& data, const Eigen::VectorXd& w) {
  const double sw = w.sum();
  if (!(std::abs(sw) > 1e-8)) throw Error(ErrorCode::DegenerateWeights, "update weights sum to zero");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(data.d());
  for (Eigen::Index i = 0; i < data.n(); ++i) mu += w(i) * data.point(i);
  return mu / sw;
}

Eigen::MatrixXd weighted_scatter(const Dataset& data, const Eigen::VectorXd& w, const Eigen::VectorXd& mu) {
  const double sw = w.sum();
  if (!(std::abs(sw) > 1e-8)) throw Error(ErrorCode::DegenerateWeights, "update weights sum to zero");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(data.d(), data.d());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    Eigen::VectorXd r = data.point(i) - mu;
    c += w(i) * r * r.transpose();
  }
  return condition_covariance(c / sw);
}

}  // namespace

QuantumMixture2 QuantumMixture2::build(const Dataset& data, GaussianClass c1, GaussianClass c2, double a1,
                                       double a2) {
  check_alpha(a1);
  check_alpha(a2);
  if (c1.dim() != data.d() || c2.dim() != data.d())
    throw Error(ErrorCode::LengthMismatch, "class and dataset dimensions differ");
  Field f = make_field(data, c1, c2);
  const double cphi = constrained_cos_phi(a1, a2, f.log_ov);
  return QuantumMixture2{std::move(c1), std::move(c2), a1, a2, cphi, std::exp(std::min(0.0, f.log_ov))};
}

QuantumMixture2 QuantumMixture2::from_phase(const Dataset& data, GaussianClass c1, GaussianClass c2, double a1,
                                            double cos_phi) {
  check_alpha(a1);
  if (!(std::abs(cos_phi) <= 1.0)) throw Error(ErrorCode::ConstraintViolation, "cos phi outside [-1, 1]");
  Field f = make_field(data, c1, c2);
  const double b = a1 * std::exp(std::min(0.0, f.log_ov)) * cos_phi;
  const double a2 = -b + std::sqrt(b * b + 1.0 - a1 * a1);
  return build(data, std::move(c1), std::move(c2), a1, a2);
}

OverlapFields overlap_fields(const Dataset& data, const QuantumMixture2& mix) {
  Field f = make_field(data, mix);
  OverlapFields out;
  out.o = f.log_o.array().exp();
  out.alpha_o = kernels::constraint_remainder(mix.alpha1, mix.alpha2) * out.o;
  out.total_overlap = std::exp(std::min(0.0, f.log_ov));
  return out;
}

Eigen::MatrixXd joint_prob_k(const Dataset& data, const QuantumMixture2& mix) {
  Field f = make_field(data, mix);
  constrained_cos_phi(mix.alpha1, mix.alpha2, f.log_ov);
  const double alpha[2] = {mix.alpha1, mix.alpha2};
  const double cross = mix.alpha1 * mix.alpha2 * mix.cos_phi;
  Eigen::MatrixXd p(data.n(), 2);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double g1 = f.g1.values(i), g2 = f.g2.values(i);
    const double g[2] = {g1, g2};
    for (int k = 0; k < 2; ++k) {
      double v = alpha[k] * alpha[k] * g[k] * g[k] + cross * g1 * g2;
      if (v < -1e-12) throw Error(ErrorCode::ConstraintViolation, "negative joint probability at point " + std::to_string(i));
      p(i, k) = std::max(v, 0.0);
    }
  }
  return p;
}

double quantum_density_K(std::span<const double> amplitudes, std::span<const std::complex<double>> alphas,
                         std::span<const double> phases) {
  if (amplitudes.size() != alphas.size() || amplitudes.size() != phases.size())
    throw Error(ErrorCode::LengthMismatch, "amplitudes, alphas and phases must have equal length");
  double total = 0.0;
  for (std::size_t k = 0; k < amplitudes.size(); ++k) {
    for (std::size_t l = 0; l < amplitudes.size(); ++l) {
      // Re(alpha_k conj(alpha_l) e^{-i (phi_k - phi_l)}) G_k G_l; for real
      // alphas this is alpha_k alpha_l cos(phi_{l,k}) G_k G_l.
      const std::complex<double> w = alphas[k] * std::conj(alphas[l]) * std::polar(1.0, -(phases[k] - phases[l]));
      total += w.real() * amplitudes[k] * amplitudes[l];
    }
  }
  return total;
}

Responsibilities quantum_e_step(const Dataset& data, const QuantumMixture2& mix) {
  Field f = make_field(data, mix);
  kernels::InterferenceShares sh =
      kernels::interference_shares(f.g1.log_values, f.g2.log_values, f.log_ov, mix.alpha1, mix.alpha2);
  Eigen::MatrixXd q(data.n(), 2);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (!std::isfinite(sh.log_d(i)))
      throw Error(ErrorCode::ConstraintViolation, "total probability vanishes at point " + std::to_string(i));
    double n1 = sh.share1(i) + 0.5 * sh.cross(i);
    double n2 = sh.share2(i) + 0.5 * sh.cross(i);
    if (n1 < -1e-12 || n2 < -1e-12)
      throw Error(ErrorCode::NegativeResponsibility, "negative responsibility at point " + std::to_string(i));
    n1 = std::clamp(n1, 0.0, 1.0);
    n2 = std::clamp(n2, 0.0, 1.0);
    const double s = n1 + n2;
    q(i, 0) = n1 / s;
    q(i, 1) = n2 / s;
  }
  return Responsibilities(std::move(q));
}

Eigen::Vector2d estimated_counts(const Responsibilities& q) {
  if (q.k() != 2) throw Error(ErrorCode::LengthMismatch, "two-class responsibilities expected");
  return q.column_sums();
}

double quantum_objective(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q) {
  check_q(data, q);
  Field f = make_field(data, mix);
  const double half_c = 0.5 * kernels::constraint_remainder(mix.alpha1, mix.alpha2);
  const double log_s[2] = {2.0 * std::log(mix.alpha1), 2.0 * std::log(mix.alpha2)};
  const Eigen::VectorXd* lg[2] = {&f.g1.log_values, &f.g2.log_values};
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (int k = 0; k < 2; ++k) {
      const double qik = q.q()(i, k);
      if (!(qik > 0.0)) continue;  // 0 log 0 = 0
      const double lp = log_joint(log_s[k], (*lg[k])(i), f.log_o(i), half_c);
      if (std::isnan(lp))
        throw Error(ErrorCode::NonPositiveJoint, "joint probability not positive at point " + std::to_string(i));
      total += qik * lp;
    }
  }
  return total;
}

double quantum_m_objective(const Dataset& data, const QuantumMixture2& eval, const Responsibilities& q,
                           const QuantumMixture2& reference) {
  check_q(data, q);
  Field ref = make_field(data, reference);
  Surrogate s = surrogate(data, eval.class1, eval.class2, eval.alpha1, eval.alpha2, log_kappa(ref, reference),
                          q.q(), false);
  if (!s.feasible) throw Error(ErrorCode::NonPositiveJoint, "surrogate joint probability not positive");
  return s.objective;
}

MStepWeights m_step_weights(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q) {
  check_q(data, q);
  Field f = make_field(data, mix);
  kernels::InterferenceShares sh =
      kernels::interference_shares(f.g1.log_values, f.g2.log_values, f.log_ov, mix.alpha1, mix.alpha2);
  const double b = 0.5 * sh.cross.sum();
  Eigen::VectorXd o = f.log_o.array().exp();
  MStepWeights w{Eigen::MatrixXd(data.n(), 2), Eigen::MatrixXd(data.n(), 2)};
  w.f = q.q().colwise() - o * b;
  w.r.col(0) = w.f.col(0) + sh.share1;
  w.r.col(1) = w.f.col(1) + sh.share2;
  return w;
}

std::array<Eigen::VectorXd, 2> mu_update(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q) {
  check_q(data, q);
  Field ref = make_field(data, mix);
  const auto lkap = log_kappa(ref, mix);
  GaussianClass c1 = mix.class1, c2 = mix.class2;
  const double scale = 1.0 + data.points().cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    Surrogate s = surrogate(data, c1, c2, mix.alpha1, mix.alpha2, lkap, q.q(), true);
    if (!s.feasible) {
      if (it == 0) throw Error(ErrorCode::NonPositiveJoint, "joint probability not positive at the reference");
      break;
    }
    Eigen::VectorXd m1, m2;
    try {
      m1 = weighted_mean(data, s.w.col(0));
      m2 = weighted_mean(data, s.w.col(1));
    } catch (const Error&) {
      if (it == 0) throw;
      break;
    }
    const double step = std::max((m1 - c1.mu()).cwiseAbs().maxCoeff(), (m2 - c2.mu()).cwiseAbs().maxCoeff());
    c1 = c1.with_mu(m1);
    c2 = c2.with_mu(m2);
    if (step <= 1e-13 * scale) break;
  }
  return {c1.mu(), c2.mu()};
}

std::array<Eigen::MatrixXd, 2> cov_update(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q,
                                          const std::array<Eigen::VectorXd, 2>& new_mus, CovWeights weights) {
  check_q(data, q);
  if (weights == CovWeights::SinglePass) {
    MStepWeights w = m_step_weights(data, mix, q);
    return {weighted_scatter(data, w.r.col(0), new_mus[0]), weighted_scatter(data, w.r.col(1), new_mus[1])};
  }
  Field ref = make_field(data, mix);
  const auto lkap = log_kappa(ref, mix);
  GaussianClass c1(new_mus[0], mix.class1.cov()), c2(new_mus[1], mix.class2.cov());
  for (int it = 0; it < 200; ++it) {
    Surrogate s = surrogate(data, c1, c2, mix.alpha1, mix.alpha2, lkap, q.q(), true);
    if (!s.feasible) {
      if (it == 0) throw Error(ErrorCode::NonPositiveJoint, "joint probability not positive at the reference");
      break;
    }
    Eigen::MatrixXd s1, s2;
    try {
      s1 = weighted_scatter(data, s.w.col(0), new_mus[0]);
      s2 = weighted_scatter(data, s.w.col(1), new_mus[1]);
    } catch (const Error&) {
      if (it == 0) throw;
      break;
    }
    const double step = std::max((s1 - c1.cov()).cwiseAbs().maxCoeff() / s1.cwiseAbs().maxCoeff(),
                                 (s2 - c2.cov()).cwiseAbs().maxCoeff() / s2.cwiseAbs().maxCoeff());
    c1 = GaussianClass(new_mus[0], s1);
    c2 = GaussianClass(new_mus[1], s2);
    if (step <= 1e-13) break;
  }
  return {c1.cov(), c2.cov()};
}

AlphaResiduals alpha_residuals(const Dataset& data, const QuantumMixture2& mix) {
  Field f = make_field(data, mix);
  kernels::InterferenceShares sh =
      kernels::interference_shares(f.g1.log_values, f.g2.log_values, f.log_ov, mix.alpha1, mix.alpha2);
  AlphaResiduals r;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double ld = sh.log_d(i);
    const double od = std::exp(f.log_o(i) - ld);
    r.r1 += std::exp(2.0 * f.g1.log_values(i) - ld) - od;
    r.r2 += std::exp(2.0 * f.g2.log_values(i) - ld) - od;
    r.scale += std::exp(-ld);
  }
  r.scale /= static_cast<double>(data.n());
  return r;
}

namespace {

struct MixSetup {
  kernels::MixTerms t;
  double min_ratio1, min_ratio2;  // min_i G_ik^2 / o_i
  double ov;
};

MixSetup mix_setup(const Field& f) {
  const Eigen::Index n = f.log_o.size();
  MixSetup m{{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)},
             std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::exp(std::min(0.0, f.log_ov))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l1 = 2.0 * f.g1.log_values(i), l2 = 2.0 * f.g2.log_values(i), lo = f.log_o(i);
    const double top = std::max(l1, std::max(l2, lo));
    m.t.shift(i) = top;
    m.t.u(i) = std::exp(l1 - top);
    m.t.v(i) = std::exp(l2 - top);
    m.t.w(i) = std::exp(lo - top);
    m.min_ratio1 = std::min(m.min_ratio1, std::exp(l1 - lo));
    m.min_ratio2 = std::min(m.min_ratio2, std::exp(l2 - lo));
  }
  return m;
}

// Every P(p_i, k) > 0; only binding when 1 - s1 - s2 < 0.
bool joint_positive(const MixSetup& m, double s1, double s2) {
  const double c = 1.0 - s1 - s2;
  return c >= 0.0 || (c > -2.0 * s1 * m.min_ratio1 && c > -2.0 * s2 * m.min_ratio2);
}

}  // namespace

std::pair<double, double> alpha_solve(const Dataset& data, const QuantumMixture2& mix, const AlphaSolveOptions& opt) {
  Field f = make_field(data, mix);
  const MixSetup ms = mix_setup(f);
  const kernels::MixTerms& t = ms.t;
  const double ov = ms.ov;

  // Feasible points are parametrized by (a1, cos_phi); a2 follows from the
  // constraint. Returns (s1, s2) = (a1^2, a2^2) when every P(p_i, k) > 0.
  auto feasible = [&](double a1, double cphi) -> std::optional<std::pair<double, double>> {
    if (!(a1 > 0.0 && a1 < 1.0)) return std::nullopt;
    const double b = a1 * ov * cphi;
    const double a2 = -b + std::sqrt(b * b + 1.0 - a1 * a1);
    if (!(a2 > 0.0 && a2 < 1.0)) return std::nullopt;
    const double s1 = a1 * a1, s2 = a2 * a2;
    if (!joint_positive(ms, s1, s2)) return std::nullopt;
    return std::make_pair(s1, s2);
  };
  auto value = [&](const std::pair<double, double>& s) {
    return kernels::sum_log_mix(t, {s.first}, {s.second})[0];
  };

  double best_a1 = 0.0, best_c = 0.0, best = -std::numeric_limits<double>::infinity();
  bool grid = opt.grid;
  if (!grid) {
    // Warm start; an infeasible start (the fit tolerates shares down to
    // -1e-12) falls back to the grid.
    best_a1 = mix.alpha1;
    best_c = mix.cos_phi;
    if (auto s = feasible(best_a1, best_c)) best = value(*s);
    grid = !std::isfinite(best);
  }
  if (grid) {
    std::vector<double> ga, gc, s1, s2;
    const int na = static_cast<int>(std::lround(1.0 / opt.grid_step));
    const int nc = static_cast<int>(std::lround(2.0 / opt.grid_step));
    for (int i = 1; i < na; ++i) {
      for (int j = 0; j <= nc; ++j) {
        const double a1 = i * opt.grid_step, cphi = j == nc / 2 ? 0.0 : -1.0 + j * opt.grid_step;
        if (auto s = feasible(a1, cphi)) {
          ga.push_back(a1);
          gc.push_back(cphi);
          s1.push_back(s->first);
          s2.push_back(s->second);
        }
      }
    }
    std::vector<double> vals = kernels::sum_log_mix(t, s1, s2);
    for (std::size_t j = 0; j < vals.size(); ++j) {
      if (vals[j] > best) {
        best = vals[j];
        best_a1 = ga[j];
        best_c = gc[j];
      }
    }
  }
  if (!std::isfinite(best)) throw Error(ErrorCode::InfeasibleRegion, "no feasible amplitude pair found");

  double h = grid ? 0.5 * opt.grid_step : opt.grid_step;
  while (h >= opt.refine_tol) {
    bool moved = false;
    for (int coord = 0; coord < 2; ++coord) {
      for (double dir : {1.0, -1.0}) {
        double a1 = best_a1, cphi = best_c;
        if (coord == 0) a1 += dir * h;
        else cphi = std::clamp(cphi + dir * h, -1.0, 1.0);
        if (a1 == best_a1 && cphi == best_c) continue;
        auto s = feasible(a1, cphi);
        if (!s) continue;
        const double v = value(*s);
        if (v > best) {
          best = v;
          best_a1 = a1;
          best_c = cphi;
          moved = true;
        }
      }
    }
    if (!moved) h *= 0.5;
  }
  const double b = best_a1 * ov * best_c;
  return {best_a1, -b + std::sqrt(b * b + 1.0 - best_a1 * best_a1)};
}

AlphaSearchResult exhaustive_alpha_search(const Dataset& data, const GaussianClass& c1, const GaussianClass& c2,
                                          double step) {
  Field f = make_field(data, c1, c2);
  const MixSetup ms = mix_setup(f);
  const int n = static_cast<int>(std::lround(1.0 / step));
  std::vector<double> s1, s2;
  for (int i = 1; i < n; ++i) {
    for (int j = 1; j < n; ++j) {
      const double a1 = i * step, a2 = j * step;
      const double c = kernels::constraint_remainder(a1, a2);
      if (std::abs(c) > 2.0 * a1 * a2 * ms.ov) continue;
      if (!joint_positive(ms, a1 * a1, a2 * a2)) continue;
      s1.push_back(a1 * a1);
      s2.push_back(a2 * a2);
    }
  }
  if (s1.empty()) throw Error(ErrorCode::InfeasibleRegion, "no feasible amplitude pair on the search grid");
  std::vector<double> vals = kernels::interference_objective(ms.t, s1, s2);
  std::size_t best = 0;
  for (std::size_t j = 1; j < vals.size(); ++j)
    if (vals[j] > vals[best]) best = j;
  if (!std::isfinite(vals[best])) throw Error(ErrorCode::InfeasibleRegion, "no feasible amplitude pair on the search grid");
  return {std::sqrt(s1[best]), std::sqrt(s2[best]), vals[best]};
}

namespace {

// Mixture for new classes keeping the amplitudes when feasible; otherwise the
// amplitudes move along the segment toward the classical circle
// a1^2 + a2^2 = 1 (always feasible) by the smallest bisected fraction that
// restores |cos_phi| <= 1 and P(p_i, k) > 0.
QuantumMixture2 build_feasible(const Dataset& data, const GaussianClass& c1, const GaussianClass& c2, double a1,
                               double a2) {
  const double s1 = a1 * a1, s2 = a2 * a2, tot = s1 + s2;
  const MixSetup ms = mix_setup(make_field(data, c1, c2));
  auto ok = [&](double lam) {
    const double t1 = s1 * (1.0 - lam + lam / tot), t2 = s2 * (1.0 - lam + lam / tot);
    return std::abs(1.0 - t1 - t2) <= 2.0 * std::sqrt(t1 * t2) * ms.ov && joint_positive(ms, t1, t2);
  };
  double lam = 0.0;
  if (!ok(0.0)) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (ok(mid)) hi = mid;
      else lo = mid;
    }
    lam = hi;
  }
  const double f = 1.0 - lam + lam / tot;
  return QuantumMixture2::build(data, c1, c2, std::sqrt(s1 * f), std::sqrt(s2 * f));
}

// Ascent safeguard on the M-step surrogate anchored at `ref`: try the full
// step, then halve it until the Q-frozen surrogate does not drop by more than
// 1e-9 and the candidate admits an E-step; keep the current parameters if
// every trial fails.
QuantumMixture2 damped(const Dataset& data, const Responsibilities& q, const QuantumMixture2& ref,
                       const QuantumMixture2& current, double current_obj, int halvings,
                       const std::function<QuantumMixture2(double)>& at, double* obj_out) {
  double t = 1.0;
  for (int k = 0; k <= halvings; ++k, t *= 0.5) {
    try {
      QuantumMixture2 cand = at(t);
      const double o = quantum_m_objective(data, cand, q, ref);
      if (o >= current_obj - 1e-9) {
        quantum_e_step(data, cand);  // must also be feasible under the data normalization
        *obj_out = o;
        return cand;
      }
    } catch (const Error&) {
    }
  }
  *obj_out = current_obj;
  return current;
}

}  // namespace

FitReport<QuantumMixture2> quantum_fit(const Dataset& data, const QuantumMixture2& init, const QuantumFitConfig& cfg) {
  if (data.n() < 2) throw Error(ErrorCode::InvalidArgument, "fitting needs at least two points");
  QuantumMixture2 mix = QuantumMixture2::build(data, init.class1, init.class2, init.alpha1, init.alpha2);
  std::vector<QuantumMixture2> params_trace;
  std::vector<double> trace;
  std::vector<Eigen::VectorXd> counts;
  bool converged = false;
  bool first_alpha = true;
  int m_steps = 0;
  for (;;) {
    Responsibilities q = quantum_e_step(data, mix);
    const double obj = quantum_objective(data, mix, q);
    params_trace.push_back(mix);
    trace.push_back(obj);
    counts.push_back(q.column_sums());
    const std::size_t t = trace.size();
    if (t > 1 && std::abs(trace[t - 1] - trace[t - 2]) <= cfg.convergence.tol * std::abs(trace[t - 1])) {
      converged = true;
      break;
    }
    if (m_steps >= cfg.convergence.max_iter) break;

    const QuantumMixture2 ref = mix;
    double cur = obj;

    std::array<Eigen::VectorXd, 2> mus;
    try {
      mus = mu_update(data, ref, q);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateWeights) throw;
      mus = {weighted_mean(data, q.q().col(0)), weighted_mean(data, q.q().col(1))};
    }
    mix = damped(data, q, ref, mix, cur, cfg.damping_halvings,
                 [&](double s) {
                   return build_feasible(data, ref.class1.with_mu(ref.class1.mu() + s * (mus[0] - ref.class1.mu())),
                                         ref.class2.with_mu(ref.class2.mu() + s * (mus[1] - ref.class2.mu())),
                                         ref.alpha1, ref.alpha2);
                 },
                 &cur);

    try {
      auto covs = cov_update(data, ref, q, {mix.class1.mu(), mix.class2.mu()}, cfg.cov_weights);
      const QuantumMixture2 base = mix;
      mix = damped(data, q, ref, mix, cur, cfg.damping_halvings,
                   [&](double s) {
                     return build_feasible(
                         data, GaussianClass(base.class1.mu(), base.class1.cov() + s * (covs[0] - base.class1.cov())),
                         GaussianClass(base.class2.mu(), base.class2.cov() + s * (covs[1] - base.class2.cov())),
                         base.alpha1, base.alpha2);
                   },
                   &cur);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateWeights && e.code() != ErrorCode::NotPositiveDefinite &&
          e.code() != ErrorCode::NonPositiveJoint)
        throw;
    }

    try {
      AlphaSolveOptions opt;
      opt.grid = first_alpha;
      first_alpha = false;
      auto [a1, a2] = alpha_solve(data, mix, opt);
      const QuantumMixture2 base = mix;
      const double s1 = base.alpha1 * base.alpha1, s2 = base.alpha2 * base.alpha2;
      mix = damped(data, q, ref, mix, cur, cfg.damping_halvings,
                   [&](double s) {
                     return QuantumMixture2::build(data, base.class1, base.class2,
                                                   std::sqrt(s1 + s * (a1 * a1 - s1)),
                                                   std::sqrt(s2 + s * (a2 * a2 - s2)));
                   },
                   &cur);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InfeasibleRegion) throw;
    }
    ++m_steps;
  }
  Responsibilities q = quantum_e_step(data, mix);
  Eigen::VectorXd n = q.column_sums();
  return {std::move(mix), std::move(params_trace), std::move(trace), std::move(counts), std::move(q), std::move(n), m_steps, converged};
}

QuantumMixture2 random_quantum_init(const Dataset& data, std::mt19937_64& rng) {
  ClassicalMixture c = random_classical_init(data, 2, rng);
  const double a = 1.0 / std::sqrt(2.0);
  return QuantumMixture2::build(data, c.classes[0], c.classes[1], a, a);
}

}  // namespace qmix
