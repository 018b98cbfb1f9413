#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "qmix/amplitude.hpp"
#include "qmix/classical_em.hpp"
#include "qmix/error.hpp"
#include "qmix/experiments.hpp"
#include "qmix/quantum_em.hpp"
#include "qmix/rng.hpp"

using namespace qmix;

namespace {

Dataset random_dataset(int n, std::mt19937_64& rng, double spread = 2.0, double shift = 2.0) {
  std::normal_distribution<double> nd(0.0, spread);
  Points p(n, 2);
  for (int i = 0; i < n; ++i) {
    const double off = i % 2 ? shift : 0.0;
    p(i, 0) = nd(rng) + off;
    p(i, 1) = nd(rng) + off;
  }
  return Dataset(std::move(p));
}

GaussianClass iso(double x, double y, double var) {
  return GaussianClass(Eigen::Vector2d(x, y), var * Eigen::Matrix2d::Identity());
}

// Amplitudes computed directly from the definition, without the log domain.
Eigen::MatrixXd direct_amplitudes(const Dataset& d, const QuantumMixture2& m) {
  Eigen::MatrixXd g(d.n(), 2);
  for (int k = 0; k < 2; ++k) {
    const GaussianClass& c = m.cls(k);
    Eigen::MatrixXd inv = c.cov().inverse();
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      Eigen::VectorXd r = d.point(i) - c.mu();
      g(i, k) = std::exp(-0.25 * r.dot(inv * r));
    }
    g.col(k).normalize();
  }
  return g;
}

QuantumMixture2 toy_mixture(const Dataset& d, double a1, double a2) {
  return QuantumMixture2::build(d, iso(0.2, 0.1, 2.0), iso(1.8, 2.1, 2.5), a1, a2);
}

// Equal amplitudes a1 = a2 whose constraint phase is cos_phi.
QuantumMixture2 equal_amplitudes(const Dataset& d, const GaussianClass& c1, const GaussianClass& c2,
                                 double cos_phi) {
  const double ov = QuantumMixture2::build(d, c1, c2, 0.6, 0.8).total_overlap;
  const double a = 1.0 / std::sqrt(2.0 + 2.0 * ov * cos_phi);
  return QuantumMixture2::build(d, c1, c2, a, a);
}

template <class F>
Eigen::Vector4d mu_gradient(F obj, const QuantumMixture2& m, double h) {
  Eigen::Vector4d g;
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) {
      auto at = [&](double s) {
        QuantumMixture2 e = m;
        Eigen::VectorXd mu = m.cls(k).mu();
        mu(j) += s;
        (k == 0 ? e.class1 : e.class2) = m.cls(k).with_mu(mu);
        return obj(e);
      };
      g(2 * k + j) = (at(h) - at(-h)) / (2 * h);
    }
  }
  return g;
}

}  // namespace

TEST(QuantumMixture, CosPhiFollowsConstraint) {
  std::mt19937_64 rng(1);
  Dataset d = random_dataset(20, rng);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.7);
  EXPECT_NEAR(m.cos_phi, (1 - 0.36 - 0.49) / (2 * 0.6 * 0.7 * m.total_overlap), 1e-14);
  QuantumMixture2 back = QuantumMixture2::from_phase(d, m.class1, m.class2, 0.6, m.cos_phi);
  EXPECT_NEAR(back.alpha2, 0.7, 1e-14);
}

TEST(QuantumMixture, InfeasibleAmplitudesRejected) {
  std::mt19937_64 rng(2);
  Dataset d = random_dataset(20, rng, 1.0, 30.0);  // nearly disjoint classes
  try {
    QuantumMixture2::build(d, iso(0, 0, 1), iso(30, 30, 1), 0.3, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConstraintViolation);
  }
  EXPECT_THROW(QuantumMixture2::build(d, iso(0, 0, 1), iso(30, 30, 1), 0.0, 1.0), Error);
}

TEST(OverlapFields, SharesSumToOne) {
  std::mt19937_64 rng(3);
  Dataset d = random_dataset(25, rng);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.7);
  OverlapFields f = overlap_fields(d, m);
  EXPECT_NEAR(f.o.sum(), 1.0, 1e-10);
  EXPECT_GE(f.o.minCoeff(), 0.0);
  const double c = 1.0 - 0.6 * 0.6 - 0.7 * 0.7;
  for (Eigen::Index i = 0; i < d.n(); ++i) EXPECT_EQ(f.alpha_o(i), c * f.o(i));
  Eigen::MatrixXd g = direct_amplitudes(d, m);
  EXPECT_NEAR(f.total_overlap, g.col(0).dot(g.col(1)), 1e-14);
}

TEST(JointProb, ClassicalFormOnTheCircle) {
  std::mt19937_64 rng(4);
  Dataset d = random_dataset(12, rng);
  const double a1 = 0.6, a2 = std::sqrt(1 - a1 * a1);
  QuantumMixture2 m = toy_mixture(d, a1, a2);
  EXPECT_NEAR(m.cos_phi, 0.0, 1e-15);
  Eigen::MatrixXd p = joint_prob_k(d, m);
  Eigen::MatrixXd g = direct_amplitudes(d, m);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    EXPECT_NEAR(p(i, 0), a1 * a1 * g(i, 0) * g(i, 0), 1e-15);
    EXPECT_NEAR(p(i, 1), a2 * a2 * g(i, 1) * g(i, 1), 1e-15);
  }
}

TEST(JointProb, IdenticalClassesGiveEqualColumns) {
  std::mt19937_64 rng(5);
  Dataset d = random_dataset(10, rng);
  QuantumMixture2 m = QuantumMixture2::build(d, iso(1, 1, 3), iso(1, 1, 3), 0.5, 0.5);
  Eigen::MatrixXd p = joint_prob_k(d, m);
  EXPECT_LT((p.col(0) - p.col(1)).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(JointProb, ToySumIsOne) {
  Points pts(4, 2);
  pts << 0, 0, 1, 0.5, 2, 2.5, 0.5, 1.5;
  Dataset d(pts);
  QuantumMixture2 m = QuantumMixture2::build(d, iso(0, 0, 1), iso(2, 2, 1.5), 0.6, 0.7);
  // Independent sum: a1^2 + a2^2 + 2 a1 a2 cos_phi sum_i G_i1 G_i2.
  Eigen::MatrixXd g = direct_amplitudes(d, m);
  const double cphi = (1 - 0.36 - 0.49) / (2 * 0.42 * g.col(0).dot(g.col(1)));
  double direct = 0.0;
  for (int i = 0; i < 4; ++i)
    direct += 0.36 * g(i, 0) * g(i, 0) + 0.49 * g(i, 1) * g(i, 1) + 2 * 0.42 * cphi * g(i, 0) * g(i, 1);
  EXPECT_NEAR(direct, 1.0, 1e-12);
  EXPECT_NEAR(joint_prob_k(d, m).sum(), 1.0, 1e-12);
}

TEST(QuantumDensityK, SingleClassHasNoInterference) {
  std::vector<double> g = {0.7};
  std::vector<std::complex<double>> a = {{0.8, 0.0}};
  std::vector<double> ph = {1.3};
  EXPECT_NEAR(quantum_density_K(g, a, ph), 0.64 * 0.49, 1e-15);
}

TEST(QuantumDensityK, QuarterTurnIsClassical) {
  std::vector<double> g = {0.7, 0.4};
  std::vector<std::complex<double>> a = {{0.6, 0.0}, {0.5, 0.0}};
  std::vector<double> ph = {0.0, std::numbers::pi / 2};
  EXPECT_NEAR(quantum_density_K(g, a, ph), 0.36 * 0.49 + 0.25 * 0.16, 1e-15);
}

TEST(QuantumDensityK, HalfTurnCancelsEqualWaves) {
  std::vector<double> g = {0.5, 0.3};
  std::vector<std::complex<double>> a = {{0.6, 0.0}, {1.0, 0.0}};
  std::vector<double> ph = {0.0, std::numbers::pi};
  EXPECT_NEAR(quantum_density_K(g, a, ph), 0.0, 1e-15);
}

TEST(QuantumDensityK, MatchesModulusOfComplexSum) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> g(4), ph(4);
    std::vector<std::complex<double>> a(4);
    std::complex<double> sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      g[k] = u(rng);
      a[k] = {u(rng), u(rng)};
      ph[k] = 6.0 * u(rng);
      sum += a[k] * g[k] * std::polar(1.0, -ph[k]);
    }
    EXPECT_NEAR(quantum_density_K(g, a, ph), std::norm(sum), 1e-13);
  }
}

TEST(QuantumEStep, ClassicalLimitMatchesAmplitudeRatios) {
  std::mt19937_64 rng(7);
  Dataset d = random_dataset(15, rng);
  const double a1 = 0.5, a2 = std::sqrt(0.75);
  QuantumMixture2 m = toy_mixture(d, a1, a2);
  Responsibilities q = quantum_e_step(d, m);
  Eigen::MatrixXd g = direct_amplitudes(d, m);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double w1 = a1 * a1 * g(i, 0) * g(i, 0), w2 = a2 * a2 * g(i, 1) * g(i, 1);
    EXPECT_NEAR(q.q()(i, 0), w1 / (w1 + w2), 1e-12);
  }
}

TEST(QuantumEStep, SymmetricClassesSplitEvenly) {
  std::mt19937_64 rng(8);
  Dataset d = random_dataset(10, rng);
  QuantumMixture2 m = QuantumMixture2::build(d, iso(1, 1, 3), iso(1, 1, 3), 0.6, 0.6);
  Responsibilities q = quantum_e_step(d, m);
  EXPECT_LT((q.q().array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(QuantumEStep, ToyMatchesDirectFormula) {
  std::mt19937_64 rng(9);
  Dataset d = random_dataset(5, rng);
  QuantumMixture2 m = toy_mixture(d, 0.5, 0.8);
  Responsibilities q = quantum_e_step(d, m);
  Eigen::MatrixXd g = direct_amplitudes(d, m);
  const double ov = g.col(0).dot(g.col(1)), c = 1 - 0.25 - 0.64;
  for (int i = 0; i < 5; ++i) {
    const double ao = c * g(i, 0) * g(i, 1) / ov;
    const double den = 0.25 * g(i, 0) * g(i, 0) + 0.64 * g(i, 1) * g(i, 1) + ao;
    EXPECT_NEAR(q.q()(i, 0), (0.25 * g(i, 0) * g(i, 0) + 0.5 * ao) / den, 1e-12);
    EXPECT_NEAR(q.q()(i, 1), (0.64 * g(i, 1) * g(i, 1) + 0.5 * ao) / den, 1e-12);
    EXPECT_EQ(q.q()(i, 0) + q.q()(i, 1), 1.0);
  }
}

TEST(EstimatedCounts, UniformAndHard) {
  EXPECT_TRUE(estimated_counts(Responsibilities(Eigen::MatrixXd::Constant(8, 2, 0.5))).isApprox(Eigen::Vector2d(4, 4)));
  Eigen::MatrixXd hard = Eigen::MatrixXd::Zero(5, 2);
  hard.col(0).head(2).setOnes();
  hard.col(1).tail(3).setOnes();
  EXPECT_TRUE(estimated_counts(Responsibilities(hard)).isApprox(Eigen::Vector2d(2, 3)));
}

TEST(QuantumObjective, SinglePointDirect) {
  Points p(1, 2);
  p << 0.3, -0.2;
  Dataset d(p);
  // One point: G = 1 for both classes, overlap 1.
  QuantumMixture2 m = QuantumMixture2::build(d, iso(0, 0, 1), iso(5, 5, 1), 0.9, 0.2);
  Eigen::MatrixXd qm(1, 2);
  qm << 0.7, 0.3;
  const double cross = 0.9 * 0.2 * m.cos_phi;
  const double expect = 0.7 * std::log(0.81 + cross) + 0.3 * std::log(0.04 + cross);
  EXPECT_NEAR(quantum_objective(d, m, Responsibilities(qm)), expect, 1e-12);
}

TEST(QuantumObjective, ToyMatchesBruteForce) {
  Points pts(4, 2);
  pts << 0, 0, 1, 0.5, 2, 2.5, 0.5, 1.5;
  Dataset d(pts);
  QuantumMixture2 m = QuantumMixture2::build(d, iso(0, 0, 1), iso(2, 2, 1.5), 0.6, 0.7);
  Responsibilities q = quantum_e_step(d, m);
  Eigen::MatrixXd g = direct_amplitudes(d, m);
  const double cross = 0.42 * m.cos_phi;
  double direct = 0.0;
  for (int i = 0; i < 4; ++i) {
    direct += q.q()(i, 0) * std::log(0.36 * g(i, 0) * g(i, 0) + cross * g(i, 0) * g(i, 1));
    direct += q.q()(i, 1) * std::log(0.49 * g(i, 1) * g(i, 1) + cross * g(i, 0) * g(i, 1));
  }
  EXPECT_NEAR(quantum_objective(d, m, q), direct, 1e-12);
}

TEST(QuantumObjective, NonPositiveJointRaises) {
  Points pts(3, 2);
  pts << 0, 0, 10, 10, 5, 5;
  Dataset d(pts);
  // Destructive interference drives the far point's class-1 probability below zero.
  QuantumMixture2 m = equal_amplitudes(d, iso(0, 0, 4), iso(10, 10, 4), -0.9);
  ASSERT_LT(m.cos_phi, 0.0);
  try {
    quantum_objective(d, m, Responsibilities(Eigen::MatrixXd::Constant(3, 2, 0.5)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveJoint);
  }
}

TEST(QuantumObjective, MStepObjectiveAgreesAtReference) {
  std::mt19937_64 rng(10);
  Dataset d = random_dataset(30, rng);
  QuantumMixture2 m = toy_mixture(d, 0.55, 0.75);
  Responsibilities q = quantum_e_step(d, m);
  EXPECT_NEAR(quantum_m_objective(d, m, q, m), quantum_objective(d, m, q), 1e-10);
}

TEST(MStepWeights, ClassicalLimitReducesToResponsibilities) {
  std::mt19937_64 rng(11);
  Dataset d = random_dataset(20, rng);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.8);
  Responsibilities q = quantum_e_step(d, m);
  MStepWeights w = m_step_weights(d, m, q);
  EXPECT_LT((w.f - q.q()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((w.r - 2.0 * q.q()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MuUpdate, ClassicalLimitIsWeightedMean) {
  std::mt19937_64 rng(12);
  Dataset d = random_dataset(20, rng);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.8);
  Responsibilities q = quantum_e_step(d, m);
  auto mus = mu_update(d, m, q);
  ClassicalMixture c = classical_m_step(d, q);
  for (int k = 0; k < 2; ++k) EXPECT_LT((mus[k] - c.classes[k].mu()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MuUpdate, MirrorSymmetryPreserved) {
  Points pts(6, 2);
  pts << -3, -3, -2, -4, -4, -2, 3, 3, 2, 4, 4, 2;
  Dataset d(pts);
  QuantumMixture2 m = equal_amplitudes(d, iso(-2, -2, 2), iso(2, 2, 2), 0.5);
  auto mus = mu_update(d, m, quantum_e_step(d, m));
  EXPECT_LT((mus[0] + mus[1]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MuUpdate, StationaryForTheMStepObjective) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0, 1.5);
  Points p(6, 2);
  for (int i = 0; i < 6; ++i) {
    p(i, 0) = nd(rng) + (i < 3 ? 0 : 2);
    p(i, 1) = nd(rng) + (i < 3 ? 0 : 2);
  }
  Dataset d(p);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.75);
  ASSERT_GT(std::abs(m.cos_phi), 1e-3);
  Responsibilities q = quantum_e_step(d, m);
  auto mus = mu_update(d, m, q);
  QuantumMixture2 next = m;
  next.class1 = m.class1.with_mu(mus[0]);
  next.class2 = m.class2.with_mu(mus[1]);
  auto obj = [&](const QuantumMixture2& e) { return quantum_m_objective(d, e, q, m); };
  const double before = mu_gradient(obj, m, 1e-5).norm();
  const double after = mu_gradient(obj, next, 1e-5).norm();
  ASSERT_GT(before, 1e-2);
  EXPECT_LT(after, 1e-4 * before);
  // The first pass of the update is the mean under the weights F.
  MStepWeights w = m_step_weights(d, m, q);
  Eigen::VectorXd f_mean = (p.transpose() * w.f.col(0)) / w.f.col(0).sum();
  Eigen::VectorXd sw = mu_gradient(obj, m, 1e-5).head(2);
  Eigen::VectorXd analytic = 0.5 * m.class1.cov().inverse() * (f_mean - m.class1.mu()) * 2.0 * w.f.col(0).sum();
  EXPECT_LT((sw - analytic).norm(), 1e-6 * (1.0 + sw.norm()));
}

TEST(CovUpdate, ClassicalLimitIsWeightedScatter) {
  std::mt19937_64 rng(13);
  Dataset d = random_dataset(25, rng);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.8);
  Responsibilities q = quantum_e_step(d, m);
  auto mus = mu_update(d, m, q);
  auto covs = cov_update(d, m, q, mus);
  auto single = cov_update(d, m, q, mus, CovWeights::SinglePass);
  ClassicalMixture c = classical_m_step(d, q);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT((covs[k] - c.classes[k].cov()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((single[k] - c.classes[k].cov()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CovUpdate, HardAssignedSeparatedDataGivesSampleCovariances) {
  ScenarioSpec spec = two_class_scenario(100.0, 1.0, 2.0, 50, 60);
  spec.seed = 14;
  LabeledDataset ld = generate(spec);
  QuantumMixture2 m = QuantumMixture2::build(ld.data, spec.truth(0), spec.truth(1), std::sqrt(50.0 / 110.0),
                                             std::sqrt(60.0 / 110.0));
  Responsibilities q = quantum_e_step(ld.data, m);
  auto mus = mu_update(ld.data, m, q);
  auto covs = cov_update(ld.data, m, q, mus);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
    int n = 0;
    for (Eigen::Index i = 0; i < ld.data.n(); ++i)
      if (ld.labels[i] == k) {
        mean += ld.data.point(i);
        ++n;
      }
    mean /= n;
    for (Eigen::Index i = 0; i < ld.data.n(); ++i)
      if (ld.labels[i] == k) s += (ld.data.point(i) - mean) * (ld.data.point(i) - mean).transpose();
    s /= n;
    EXPECT_LT((mus[k] - mean).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((covs[k] - s).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(CovUpdate, SymmetricPositiveDefiniteOnFuzzedInputs) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.3, 0.9);
  int returned = 0;
  for (int t = 0; t < 40; ++t) {
    Dataset d = random_dataset(15, rng);
    QuantumMixture2 m =
        QuantumMixture2::from_phase(d, iso(0.2, 0.1, 2.0), iso(1.8, 2.1, 2.5), u(rng), u(rng) - 0.3);
    Responsibilities q = quantum_e_step(d, m);
    auto mus = mu_update(d, m, q);
    for (auto weights : {CovWeights::Stationary, CovWeights::SinglePass}) {
      try {
        auto covs = cov_update(d, m, q, mus, weights);
        for (const auto& c : covs) {
          EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
          EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues().minCoeff(), 0.0);
        }
        ++returned;
      } catch (const Error& e) {
        // Negative interference weights can make the scatter indefinite.
        EXPECT_TRUE(e.code() == ErrorCode::NotPositiveDefinite || e.code() == ErrorCode::DegenerateWeights);
      }
    }
  }
  EXPECT_GT(returned, 60);
}

TEST(AlphaSolve, ZeroOverlapGivesClassicalPrior) {
  ScenarioSpec spec = two_class_scenario(200.0, 1.0, 1.0, 30, 90);
  spec.seed = 16;
  LabeledDataset ld = generate(spec);
  QuantumMixture2 m = QuantumMixture2::build(ld.data, spec.truth(0), spec.truth(1), 0.5, std::sqrt(0.75));
  ASSERT_LT(m.total_overlap, 1e-12);
  auto [a1, a2] = alpha_solve(ld.data, m);
  EXPECT_NEAR(a1 * a1 + a2 * a2, 1.0, 1e-9);
  EXPECT_NEAR(a1 * a1, 0.25, 1e-5);
}

TEST(AlphaSolve, SymmetricDataGivesEqualAmplitudes) {
  Points pts(8, 2);
  pts << -3, -3, -2, -4, -4, -2, -3, -2, 3, 3, 2, 4, 4, 2, 3, 2;
  // Mirror the second half exactly.
  for (int i = 0; i < 4; ++i) pts.row(4 + i) = -pts.row(i);
  Dataset d(pts);
  QuantumMixture2 m = equal_amplitudes(d, iso(-3, -3, 2), iso(3, 3, 2), 0.5);
  auto [a1, a2] = alpha_solve(d, m);
  EXPECT_NEAR(a1, a2, 1e-5);
}

TEST(AlphaSolve, InteriorOptimumHasSmallResiduals) {
  std::mt19937_64 rng(17);
  Dataset d = random_dataset(60, rng, 2.0, 1.5);
  QuantumMixture2 m = toy_mixture(d, 0.6, 0.7);
  auto [a1, a2] = alpha_solve(d, m);
  QuantumMixture2 s = QuantumMixture2::build(d, m.class1, m.class2, a1, a2);
  AlphaResiduals r = alpha_residuals(d, s);
  // Interior maximum when no neighbor on the constraint surface is infeasible.
  bool interior = true;
  for (double da : {-1e-3, 1e-3})
    for (double dc : {-1e-3, 1e-3}) try {
        QuantumMixture2::from_phase(d, s.class1, s.class2, a1 + da, std::clamp(s.cos_phi + dc, -1.0, 1.0));
        quantum_objective(d, s, quantum_e_step(d, s));
      } catch (const Error&) {
        interior = false;
      }
  if (interior) {
    EXPECT_LT(std::abs(r.r1), 1e-3 * r.scale * d.n());
    EXPECT_LT(std::abs(r.r2), 1e-3 * r.scale * d.n());
  }
}

TEST(AlphaSolve, NoFeasibleNeighborImproves) {
  std::mt19937_64 rng(18);
  for (int t = 0; t < 5; ++t) {
    Dataset d = random_dataset(40, rng, 2.0, 1.0 + t);
    QuantumMixture2 m = toy_mixture(d, 0.6, 0.7);
    auto [a1, a2] = alpha_solve(d, m);
    QuantumMixture2 s = QuantumMixture2::build(d, m.class1, m.class2, a1, a2);
    auto log_d_sum = [&](const QuantumMixture2& e) {
      Eigen::MatrixXd p = joint_prob_k(d, e);
      double v = 0.0;
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (!(p(i, 0) > 0 && p(i, 1) > 0)) return -std::numeric_limits<double>::infinity();
        v += std::log(p.row(i).sum());
      }
      return v;
    };
    const double best = log_d_sum(s);
    for (double da : {-1e-2, 1e-2})
      for (double dc : {-1e-2, 0.0, 1e-2}) try {
          QuantumMixture2 e =
              QuantumMixture2::from_phase(d, s.class1, s.class2, a1 + da, std::clamp(s.cos_phi + dc, -1.0, 1.0));
          EXPECT_LE(log_d_sum(e), best + 1e-9);
        } catch (const Error&) {
        }
  }
}

TEST(ExhaustiveAlphaSearch, ReturnsFeasibleBestOnGrid) {
  std::mt19937_64 rng(19);
  Dataset d = random_dataset(40, rng);
  GaussianClass c1 = iso(0, 0, 3), c2 = iso(2, 2, 3);
  AlphaSearchResult r = exhaustive_alpha_search(d, c1, c2, 0.01);
  QuantumMixture2 m = QuantumMixture2::build(d, c1, c2, r.alpha1, r.alpha2);
  EXPECT_NEAR(quantum_objective(d, m, quantum_e_step(d, m)), r.objective, 1e-8);
  for (double a1 : {0.3, 0.5, 0.7})
    for (double a2 : {0.4, 0.6, 0.8}) try {
        QuantumMixture2 e = QuantumMixture2::build(d, c1, c2, a1, a2);
        EXPECT_LE(quantum_objective(d, e, quantum_e_step(d, e)), r.objective + 1e-9);
      } catch (const Error&) {
      }
}

TEST(QuantumFit, ClassicalLimitInitMatchesClassicalFit) {
  ScenarioSpec spec = two_class_scenario(30.0, 1.0, 1.5, 60, 90);
  spec.seed = 20;
  LabeledDataset ld = generate(spec);
  // One data point of each cluster as centers, unit covariances, equal priors.
  const Eigen::Index second = std::find(ld.labels.begin(), ld.labels.end(), 1) - ld.labels.begin();
  ClassicalMixture ci({GaussianClass(ld.data.point(0), Eigen::Matrix2d::Identity()),
                       GaussianClass(ld.data.point(second), Eigen::Matrix2d::Identity())},
                      Eigen::Vector2d(0.5, 0.5));
  auto cf = classical_fit(ld.data, ci);
  const double a1 = std::sqrt(ci.priors(0)), a2 = std::sqrt(ci.priors(1));
  auto qf = quantum_fit(ld.data, QuantumMixture2::build(ld.data, ci.classes[0], ci.classes[1], a1, a2));
  ASSERT_TRUE(cf.converged);
  ASSERT_TRUE(qf.converged);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT((qf.params_final.cls(k).mu() - cf.params_final.classes[k].mu()).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((qf.params_final.cls(k).cov() - cf.params_final.classes[k].cov()).cwiseAbs().maxCoeff(), 1e-3);
  }
  EXPECT_NEAR(qf.n_per_class(0), cf.n_per_class(0), 1e-3);
}

TEST(QuantumFit, NormalizationHoldsAtEveryIterate) {
  ScenarioSpec spec = two_class_scenario(5.0, 3.0, 5.0, 100, 200);
  spec.seed = 21;
  LabeledDataset ld = generate(spec);
  auto rng = make_rng(21, 0);
  QuantumFitConfig cfg;
  cfg.convergence.max_iter = 40;
  auto rep = quantum_fit(ld.data, random_quantum_init(ld.data, rng), cfg);
  ASSERT_FALSE(rep.param_trace.empty());
  for (const auto& m : rep.param_trace) EXPECT_NEAR(joint_prob_k(ld.data, m).sum(), 1.0, 1e-9);
  for (const auto& n : rep.count_trace) EXPECT_NEAR(n.sum(), 300.0, 1e-8);
  EXPECT_EQ(rep.objective_trace.size(), rep.param_trace.size());
}
