#pragma once

#include <random>
#include <vector>

#include "qmix/dataset.hpp"
#include "qmix/fit_report.hpp"
#include "qmix/gaussian.hpp"

namespace qmix {

struct ClassicalMixture {
  ClassicalMixture(std::vector<GaussianClass> classes, Eigen::VectorXd priors);
  std::vector<GaussianClass> classes;
  Eigen::VectorXd priors;
  Eigen::Index k() const { return static_cast<Eigen::Index>(classes.size()); }
};

Responsibilities classical_e_step(const Dataset& data, const ClassicalMixture& mix);
// sum_i log sum_k pi_k N(p_i | mu_k, C_k)
double classical_log_likelihood(const Dataset& data, const ClassicalMixture& mix);
ClassicalMixture classical_m_step(const Dataset& data, const Responsibilities& q);
FitReport<ClassicalMixture> classical_fit(const Dataset& data, const ClassicalMixture& init,
                                          const ConvergenceConfig& cfg = {});

// K distinct data points as centers, the global covariance for every class,
// uniform priors.
ClassicalMixture random_classical_init(const Dataset& data, int k, std::mt19937_64& rng);
std::vector<Eigen::Index> distinct_indices(Eigen::Index n, int k, std::mt19937_64& rng);

}  // namespace qmix
