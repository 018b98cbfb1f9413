// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qmix/kernels.hpp"

using namespace qmix;
using kernels::MixTerms;

namespace {

Points make_points(Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 4.0);
  Points p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = g(rng);
  return p;
}

MixTerms make_terms(Eigen::Index n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  MixTerms t{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    t.u(i) = u(rng);
    t.v(i) = u(rng);
    t.w(i) = 0.3 * u(rng);
  }
  return t;
}

// Candidate (a1^2, a2^2) pairs on a 0.02 grid.
void alpha_grid(std::vector<double>& s1, std::vector<double>& s2) {
  for (int i = 1; i < 50; ++i)
    for (int j = 1; j < 50; ++j) {
      const double a1 = 0.02 * i, a2 = 0.02 * j;
      if (a1 * a1 + a2 * a2 < 1.2) {
        s1.push_back(a1 * a1);
        s2.push_back(a2 * a2);
      }
    }
}

template <bool Parallel>
void BM_QuadForms(benchmark::State& st) {
  const Points p = make_points(st.range(0), 3);
  Eigen::Matrix3d cov;
  cov << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::MatrixXd chol = cov.llt().matrixL();
  const Eigen::VectorXd mu = Eigen::Vector3d(1, 2, 3);
  for (auto _ : st) {
    auto r = Parallel ? kernels::parallel::quad_forms(p, mu, chol) : kernels::serial::quad_forms(p, mu, chol);
    benchmark::DoNotOptimize(r.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel>
void BM_InterferenceShares(benchmark::State& st) {
  const Eigen::Index n = st.range(0);
  const Eigen::VectorXd lg1 = -Eigen::VectorXd::Random(n).cwiseAbs() * 5, lg2 = -Eigen::VectorXd::Random(n).cwiseAbs() * 5;
  for (auto _ : st) {
    auto r = Parallel ? kernels::parallel::interference_shares(lg1, lg2, -1.0, 0.6, 0.7)
                      : kernels::serial::interference_shares(lg1, lg2, -1.0, 0.6, 0.7);
    benchmark::DoNotOptimize(r.log_d.data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}

template <bool Parallel>
void BM_SumLogMix(benchmark::State& st) {
  const MixTerms t = make_terms(st.range(0));
  std::vector<double> s1, s2;
  alpha_grid(s1, s2);
  for (auto _ : st) {
    auto r = Parallel ? kernels::parallel::sum_log_mix(t, s1, s2) : kernels::serial::sum_log_mix(t, s1, s2);
    benchmark::DoNotOptimize(r.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0) * static_cast<std::int64_t>(s1.size()));
}

template <bool Parallel>
void BM_InterferenceObjective(benchmark::State& st) {
  const MixTerms t = make_terms(st.range(0));
  std::vector<double> s1, s2;
  alpha_grid(s1, s2);
  for (auto _ : st) {
    auto r = Parallel ? kernels::parallel::interference_objective(t, s1, s2)
                      : kernels::serial::interference_objective(t, s1, s2);
    benchmark::DoNotOptimize(r.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0) * static_cast<std::int64_t>(s1.size()));
}

template <bool Parallel>
void BM_SrgbToLab(benchmark::State& st) {
  const std::size_t n = static_cast<std::size_t>(st.range(0));
  std::vector<std::uint8_t> rgb(3 * n);
  std::mt19937_64 rng(3);
  for (auto& v : rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  std::vector<double> lab(3 * n);
  for (auto _ : st) {
    if (Parallel)
      kernels::parallel::srgb_to_lab(rgb.data(), n, lab.data());
    else
      kernels::serial::srgb_to_lab(rgb.data(), n, lab.data());
    benchmark::DoNotOptimize(lab.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_QuadForms<false>)->Arg(1500)->Arg(71700)->UseRealTime();
BENCHMARK(BM_QuadForms<true>)->Arg(1500)->Arg(71700)->UseRealTime();
BENCHMARK(BM_InterferenceShares<false>)->Arg(1500)->Arg(71700)->UseRealTime();
BENCHMARK(BM_InterferenceShares<true>)->Arg(1500)->Arg(71700)->UseRealTime();
BENCHMARK(BM_SumLogMix<false>)->Arg(1500)->UseRealTime();
BENCHMARK(BM_SumLogMix<true>)->Arg(1500)->UseRealTime();
BENCHMARK(BM_InterferenceObjective<false>)->Arg(1500)->UseRealTime();
BENCHMARK(BM_InterferenceObjective<true>)->Arg(1500)->UseRealTime();
BENCHMARK(BM_SrgbToLab<false>)->Arg(71700)->UseRealTime();
BENCHMARK(BM_SrgbToLab<true>)->Arg(71700)->UseRealTime();

BENCHMARK_MAIN();
