#pragma once

#include <array>
#include <complex>
#include <random>
#include <span>
#include <utility>

#include "qmix/amplitude.hpp"
#include "qmix/dataset.hpp"
#include "qmix/fit_report.hpp"
#include "qmix/gaussian.hpp"

namespace qmix {

// Two-class interference mixture. cos_phi is not free: it is fixed by
// 1 = a1^2 + a2^2 + 2 a1 a2 cos_phi * overlap over the dataset the mixture was
// built against.
struct QuantumMixture2 {
  GaussianClass class1;
  GaussianClass class2;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double cos_phi = 0.0;
  double total_overlap = 0.0;

  // Throws ConstraintViolation when |cos_phi| would exceed 1 + 1e-12.
  static QuantumMixture2 build(const Dataset& data, GaussianClass c1, GaussianClass c2, double a1, double a2);
  // Solves the constraint for alpha2 given alpha1 and cos_phi.
  static QuantumMixture2 from_phase(const Dataset& data, GaussianClass c1, GaussianClass c2, double a1,
                                    double cos_phi);

  const GaussianClass& cls(int k) const { return k == 0 ? class1 : class2; }
};

struct OverlapFields {
  Eigen::VectorXd o;        // G_i1 G_i2 / sum_j G_j1 G_j2
  Eigen::VectorXd alpha_o;  // (1 - a1^2 - a2^2) o_i
  double total_overlap = 0.0;
};

OverlapFields overlap_fields(const Dataset& data, const QuantumMixture2& mix);

// Entry (i, k) = a_k^2 G_ik^2 + a1 a2 G_i1 G_i2 cos_phi.
Eigen::MatrixXd joint_prob_k(const Dataset& data, const QuantumMixture2& mix);

// |sum_k alpha_k G_k e^{-i phi_k}|^2 as the double sum over class pairs.
double quantum_density_K(std::span<const double> amplitudes, std::span<const std::complex<double>> alphas,
                         std::span<const double> phases);

Responsibilities quantum_e_step(const Dataset& data, const QuantumMixture2& mix);
Eigen::Vector2d estimated_counts(const Responsibilities& q);

// O = sum_i sum_k Q_ik log P(p_i, k).
double quantum_objective(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q);

// M-step surrogate: O with each amplitude normalizer taken as the continuous
// Gaussian normalizer rescaled to agree with the dataset normalization at
// `reference`. Equal to quantum_objective when eval == reference. The mean and
// covariance updates are its stationary points with Q held fixed.
double quantum_m_objective(const Dataset& data, const QuantumMixture2& eval, const Responsibilities& q,
                           const QuantumMixture2& reference);

// Per-point weights of the M-step. F_ik = Q_ik - o_i sum_j (alpha o)_j / (2 D_j)
// and the single-pass covariance weights
// R_ik = F_ik + a_k^2 G_ik^2 / D_i.
struct MStepWeights {
  Eigen::MatrixXd f;
  Eigen::MatrixXd r;
};
MStepWeights m_step_weights(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q);

enum class CovWeights {
  Stationary,  // weights 2F at the reference, iterated to a stationary point
  SinglePass,  // single pass with the R weights
};

std::array<Eigen::VectorXd, 2> mu_update(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q);
std::array<Eigen::MatrixXd, 2> cov_update(const Dataset& data, const QuantumMixture2& mix, const Responsibilities& q,
                                          const std::array<Eigen::VectorXd, 2>& new_mus,
                                          CovWeights weights = CovWeights::Stationary);

struct AlphaResiduals {
  double r1 = 0.0;     // sum_i (G_i1^2 - o_i) / D_i
  double r2 = 0.0;     // sum_i (G_i2^2 - o_i) / D_i
  double scale = 0.0;  // N^-1 sum_i 1 / D_i
};
AlphaResiduals alpha_residuals(const Dataset& data, const QuantumMixture2& mix);

struct AlphaSolveOptions {
  bool grid = true;  // coarse 0.02 grid before refinement; otherwise refine from mix's alphas
  double grid_step = 0.02;
  double refine_tol = 1e-6;
};

// Maximizes sum_i log D_i, whose gradient components are the two residual
// sums, over the feasible set |cos_phi| <= 1, P(p_i, k) >= 0.
std::pair<double, double> alpha_solve(const Dataset& data, const QuantumMixture2& mix,
                                      const AlphaSolveOptions& opt = {});

struct AlphaSearchResult {
  double alpha1 = 0.0, alpha2 = 0.0, objective = 0.0;
};
// Exhaustive search of the objective (fresh E-step at every pair) over
// a1, a2 in {step, 2 step, ...} below 1, restricted to feasible pairs.
AlphaSearchResult exhaustive_alpha_search(const Dataset& data, const GaussianClass& c1, const GaussianClass& c2,
                                          double step = 0.001);

struct QuantumFitConfig {
  ConvergenceConfig convergence;
  CovWeights cov_weights = CovWeights::Stationary;
  int damping_halvings = 20;
};

FitReport<QuantumMixture2> quantum_fit(const Dataset& data, const QuantumMixture2& init,
                                       const QuantumFitConfig& cfg = {});

QuantumMixture2 random_quantum_init(const Dataset& data, std::mt19937_64& rng);

}  // namespace qmix
