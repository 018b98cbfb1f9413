#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qmix/dataset.hpp"
#include "qmix/engine.hpp"
#include "qmix/error.hpp"
#include "qmix/fit_report.hpp"
#include "qmix/gaussian.hpp"

namespace qmix {

struct ClassSpec {
  Eigen::VectorXd center;
  Eigen::VectorXd sigma;  // axis standard deviations
  int count = 0;
};

// Gaussian classes with covariance R(theta) diag(sigma^2) R(theta)^T, plus an
// optional per-coordinate Uniform(-epsilon, epsilon) displacement.
struct ScenarioSpec {
  std::vector<ClassSpec> classes;
  double theta = 0.0;  // radians, 2D only
  double epsilon = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::Index dim() const { return classes.front().center.size(); }
  Eigen::Index total() const;
  Eigen::MatrixXd covariance(std::size_t k) const;
  GaussianClass truth(std::size_t k) const;
};

// Two classes: centers (0, 0) and (s, s), isotropic sigmas, given counts.
ScenarioSpec two_class_scenario(double separation, double sigma1, double sigma2, int n1, int n2);

LabeledDataset generate(const ScenarioSpec& spec);

// Common per-fit summary for both engines (two classes).
struct FitSummary {
  std::array<Eigen::VectorXd, 2> mu;
  std::array<Eigen::MatrixXd, 2> cov;
  Eigen::Vector2d counts;
  double objective = 0.0;  // log-likelihood (classical) or interference objective (quantum)
  bool converged = false;
  int iterations = 0;
  double alpha1 = 0.0, alpha2 = 0.0, cos_phi = 0.0;  // quantum only
};

// Random init drawn from rng, then fit. Both engines consume rng identically,
// so equal seeds give equal initial centers.
FitSummary fit_engine(const Dataset& data, Engine engine, std::uint64_t init_seed, const ConvergenceConfig& cfg);

// Swaps the two classes when that lowers the summed center distance to truth.
bool match_labels(FitSummary& fit, const std::array<Eigen::VectorXd, 2>& truth_mu);

struct ParamStat {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double error = 0.0;        // |truth - mean|
  double fluctuation = 0.0;  // population standard deviation of the estimates
};

// error and fluctuation of one parameter over per-trial estimates.
ParamStat param_stat(std::string name, double truth, const std::vector<double>& estimates);

struct TrialConfig {
  int trials = 20;
  int restarts = 1;  // best objective over restarts
  int jobs = 0;      // 0: OpenMP default
  ConvergenceConfig convergence;
};

struct TrialStats {
  Engine engine = Engine::Classical;
  int trials = 0;
  int converged = 0;
  std::vector<std::string> failures;           // one message per failed trial
  std::vector<std::string> names;              // parameter order of each estimate row
  std::vector<std::vector<double>> estimates;  // one row per successful trial
  std::vector<ParamStat> params;

  const ParamStat& at(const std::string& name) const;
};

class TrialRunError : public Error {
 public:
  TrialRunError(const std::string& what, TrialStats stats)
      : Error(ErrorCode::TooManyFailures, what), stats_(std::move(stats)) {}
  const TrialStats& stats() const { return stats_; }

 private:
  TrialStats stats_;
};

// Parameter order: mu{k}_{x,y[,z]}, var{k}_{x,y[,z]}, n{k} for k = 1, 2.
std::vector<std::string> param_names(Eigen::Index dim);

// Trial t draws data from derive_seed(seed, t) and the init from the same
// stream index, so both engines see the same data and initial centers.
TrialStats run_trials(const ScenarioSpec& spec, Engine engine, const TrialConfig& cfg, std::uint64_t seed);

struct OverlapRow {
  double separation = 0.0;
  double overlap = 0.0;  // sum_i G_i1 G_i2 at the generating parameters
  double cos_phi = 0.0;
  double alpha1 = 0.0, alpha2 = 0.0;
  bool converged = false;
  bool fitted = false;
};

// Second center at base center + (s, s); one dataset per separation. With
// fit_phase false only the generating-parameter overlap is computed.
std::vector<OverlapRow> overlap_sweep(const ScenarioSpec& base, const std::vector<double>& separations,
                                      std::uint64_t seed, const ConvergenceConfig& cfg = {}, bool fit_phase = true);

struct LandscapeConfig {
  double init_mu1x = 1.0;  // initial first-class x center; the rest starts at truth
  double mu_step = 0.01;
  double alpha_step = 0.01;       // classical alpha axis
  double true_alpha_step = 0.001;  // exhaustive search for the quantum true objective
  ConvergenceConfig convergence;
};

struct LandscapeGrid {
  Engine engine = Engine::Classical;
  std::vector<double> axis1;      // mu^1_x samples
  std::vector<double> axis2;      // alpha1 samples
  std::vector<double> axis2_cos;  // cos_phi paired with each alpha1 (quantum)
  Eigen::MatrixXd objective;      // axis1 x axis2; NaN where infeasible
  double initial = 0.0, final_value = 0.0, truth = 0.0;
  double final_mu1x = 0.0, final_alpha1 = 0.0;
  std::size_t final_row = 0, final_col = 0;
  bool converged = false;
};

// Both engines are scored with the interference objective of the two-class
// model; the classical one sits in its limit cos_phi = 0, a1^2 + a2^2 = 1.
LandscapeGrid landscape_scan(const Dataset& data, const ScenarioSpec& truth, Engine engine,
                             const LandscapeConfig& cfg = {});

}  // namespace qmix
