#include "qmix/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "qmix/amplitude.hpp"
#include "qmix/classical_em.hpp"
#include "qmix/quantum_em.hpp"
#include "qmix/rng.hpp"

namespace qmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

const char* axis_name(Eigen::Index j) { return j == 0 ? "x" : (j == 1 ? "y" : "z"); }

}  // namespace

void ScenarioSpec::validate() const {
  require(classes.size() >= 2, "scenario needs at least two classes");
  const Eigen::Index d = classes.front().center.size();
  require(d == 2 || d == 3, "scenario dimension must be 2 or 3");
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const ClassSpec& c = classes[k];
    const std::string tag = "class " + std::to_string(k + 1);
    require(c.center.size() == d && c.sigma.size() == d, tag + ": center and sigma must have the scenario dimension");
    require(c.center.allFinite(), tag + ": center must be finite");
    require((c.sigma.array() > 0.0).all() && c.sigma.allFinite(), tag + ": sigma must be positive");
    require(c.count >= 10, tag + ": count must be at least 10");
  }
  require(std::isfinite(theta), "theta must be finite");
  require(d == 2 || theta == 0.0, "theta applies to 2D scenarios only");
  require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be non-negative");
}

Eigen::Index ScenarioSpec::total() const {
  Eigen::Index n = 0;
  for (const auto& c : classes) n += c.count;
  return n;
}

Eigen::MatrixXd ScenarioSpec::covariance(std::size_t k) const {
  const Eigen::VectorXd var = classes.at(k).sigma.array().square();
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim(), dim());
  if (dim() == 2) {
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  }
  Eigen::MatrixXd c = r * var.asDiagonal() * r.transpose();
  return 0.5 * (c + c.transpose());
}

GaussianClass ScenarioSpec::truth(std::size_t k) const { return {classes.at(k).center, covariance(k)}; }

ScenarioSpec two_class_scenario(double separation, double sigma1, double sigma2, int n1, int n2) {
  ScenarioSpec s;
  s.classes.push_back({Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(sigma1, sigma1), n1});
  s.classes.push_back({Eigen::Vector2d(separation, separation), Eigen::Vector2d(sigma2, sigma2), n2});
  return s;
}

LabeledDataset generate(const ScenarioSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.dim();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-spec.epsilon, spec.epsilon);
  Points pts(spec.total(), d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(spec.total()));
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const ClassSpec& c = spec.classes[k];
    const Eigen::MatrixXd l = cholesky_factor(spec.covariance(k));
    for (int i = 0; i < c.count; ++i, ++row) {
      Eigen::VectorXd z(d);
      for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
      Eigen::VectorXd p = c.center + l * z;
      if (spec.epsilon > 0.0)
        for (Eigen::Index j = 0; j < d; ++j) p(j) += shift(rng);
      pts.row(row) = p.transpose();
      labels.push_back(static_cast<int>(k));
    }
  }
  return {Dataset(std::move(pts)), std::move(labels)};
}

FitSummary fit_engine(const Dataset& data, Engine engine, std::uint64_t init_seed, const ConvergenceConfig& cfg) {
  std::mt19937_64 rng(init_seed);
  FitSummary s;
  if (engine == Engine::Classical) {
    auto r = classical_fit(data, random_classical_init(data, 2, rng), cfg);
    for (int k = 0; k < 2; ++k) {
      s.mu[k] = r.params_final.classes[k].mu();
      s.cov[k] = r.params_final.classes[k].cov();
    }
    s.counts = r.n_per_class;
    s.objective = r.objective_trace.back();
    s.converged = r.converged;
    s.iterations = r.iterations;
  } else {
    QuantumFitConfig qc;
    qc.convergence = cfg;
    auto r = quantum_fit(data, random_quantum_init(data, rng), qc);
    for (int k = 0; k < 2; ++k) {
      s.mu[k] = r.params_final.cls(k).mu();
      s.cov[k] = r.params_final.cls(k).cov();
    }
    s.counts = r.n_per_class;
    s.objective = r.objective_trace.back();
    s.converged = r.converged;
    s.iterations = r.iterations;
    s.alpha1 = r.params_final.alpha1;
    s.alpha2 = r.params_final.alpha2;
    s.cos_phi = r.params_final.cos_phi;
  }
  return s;
}

bool match_labels(FitSummary& fit, const std::array<Eigen::VectorXd, 2>& truth_mu) {
  const double keep = (fit.mu[0] - truth_mu[0]).norm() + (fit.mu[1] - truth_mu[1]).norm();
  const double swap = (fit.mu[1] - truth_mu[0]).norm() + (fit.mu[0] - truth_mu[1]).norm();
  if (!(swap < keep)) return false;
  std::swap(fit.mu[0], fit.mu[1]);
  std::swap(fit.cov[0], fit.cov[1]);
  std::swap(fit.counts(0), fit.counts(1));
  std::swap(fit.alpha1, fit.alpha2);
  return true;
}

ParamStat param_stat(std::string name, double truth, const std::vector<double>& estimates) {
  require(!estimates.empty(), "no estimates for " + name);
  const double n = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= n;
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  return {std::move(name), truth, mean, std::abs(truth - mean), std::sqrt(ss / n)};
}

const ParamStat& TrialStats::at(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw Error(ErrorCode::InvalidArgument, "unknown parameter '" + name + "'");
}

std::vector<std::string> param_names(Eigen::Index dim) {
  std::vector<std::string> out;
  for (int k = 1; k <= 2; ++k)
    for (Eigen::Index j = 0; j < dim; ++j) out.push_back("mu" + std::to_string(k) + "_" + axis_name(j));
  for (int k = 1; k <= 2; ++k)
    for (Eigen::Index j = 0; j < dim; ++j) out.push_back("var" + std::to_string(k) + "_" + axis_name(j));
  out.push_back("n1");
  out.push_back("n2");
  return out;
}

namespace {

std::vector<double> estimate_row(const FitSummary& f) {
  std::vector<double> row;
  for (int k = 0; k < 2; ++k)
    for (Eigen::Index j = 0; j < f.mu[k].size(); ++j) row.push_back(f.mu[k](j));
  for (int k = 0; k < 2; ++k)
    for (Eigen::Index j = 0; j < f.cov[k].rows(); ++j) row.push_back(f.cov[k](j, j));
  row.push_back(f.counts(0));
  row.push_back(f.counts(1));
  return row;
}

std::vector<double> truth_row(const ScenarioSpec& spec) {
  std::vector<double> row;
  for (int k = 0; k < 2; ++k)
    for (Eigen::Index j = 0; j < spec.dim(); ++j) row.push_back(spec.classes[k].center(j));
  for (int k = 0; k < 2; ++k) {
    const Eigen::MatrixXd c = spec.covariance(k);
    for (Eigen::Index j = 0; j < spec.dim(); ++j) row.push_back(c(j, j));
  }
  row.push_back(spec.classes[0].count);
  row.push_back(spec.classes[1].count);
  return row;
}

struct TrialOutcome {
  std::optional<FitSummary> fit;
  std::string failure;
};

TrialOutcome one_trial(const ScenarioSpec& spec, Engine engine, const TrialConfig& cfg, std::uint64_t trial_seed) {
  TrialOutcome out;
  try {
    ScenarioSpec s = spec;
    s.seed = trial_seed;
    const LabeledDataset data = generate(s);
    std::string last_error;
    for (int r = 0; r < cfg.restarts; ++r) {
      try {
        FitSummary f = fit_engine(data.data, engine, derive_seed(trial_seed, 1 + static_cast<std::uint64_t>(r)),
                                  cfg.convergence);
        if (!out.fit || f.objective > out.fit->objective) out.fit = std::move(f);
      } catch (const Error& e) {
        last_error = std::string(to_string(e.code())) + ": " + e.what();
      }
    }
    if (!out.fit) out.failure = last_error;
  } catch (const std::exception& e) {
    out.failure = e.what();
  }
  return out;
}

}  // namespace

TrialStats run_trials(const ScenarioSpec& spec, Engine engine, const TrialConfig& cfg, std::uint64_t seed) {
  spec.validate();
  require(spec.classes.size() == 2, "trials need exactly two classes");
  require(cfg.trials >= 2, "trials must be at least 2");
  require(cfg.restarts >= 1, "restarts must be at least 1");
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cfg.trials));
  const int threads = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int t = 0; t < cfg.trials; ++t)
    outcomes[static_cast<std::size_t>(t)] = one_trial(spec, engine, cfg, derive_seed(seed, static_cast<std::uint64_t>(t)));

  TrialStats stats;
  stats.engine = engine;
  stats.trials = cfg.trials;
  stats.names = param_names(spec.dim());
  const std::array<Eigen::VectorXd, 2> truth_mu{spec.classes[0].center, spec.classes[1].center};
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    auto& o = outcomes[t];
    if (!o.fit) {
      stats.failures.push_back("trial " + std::to_string(t) + ": " + o.failure);
      continue;
    }
    match_labels(*o.fit, truth_mu);
    if (o.fit->converged) ++stats.converged;
    stats.estimates.push_back(estimate_row(*o.fit));
  }
  if (!stats.estimates.empty()) {
    const std::vector<double> truth = truth_row(spec);
    for (std::size_t j = 0; j < stats.names.size(); ++j) {
      std::vector<double> col;
      for (const auto& row : stats.estimates) col.push_back(row[j]);
      stats.params.push_back(param_stat(stats.names[j], truth[j], col));
    }
  }
  if (5 * stats.failures.size() > static_cast<std::size_t>(cfg.trials)) {
    std::string msg = std::to_string(stats.failures.size()) + " of " + std::to_string(cfg.trials) + " trials failed";
    throw TrialRunError(msg, std::move(stats));
  }
  return stats;
}

std::vector<OverlapRow> overlap_sweep(const ScenarioSpec& base, const std::vector<double>& separations,
                                      std::uint64_t seed, const ConvergenceConfig& cfg, bool fit_phase) {
  base.validate();
  require(base.classes.size() == 2, "overlap sweep needs exactly two classes");
  require(separations.size() >= 2, "overlap sweep needs at least two separations");
  std::vector<OverlapRow> rows;
  for (std::size_t j = 0; j < separations.size(); ++j) {
    ScenarioSpec s = base;
    s.classes[1].center = base.classes[0].center.array() + separations[j];
    s.seed = derive_seed(seed, j);
    const LabeledDataset data = generate(s);
    OverlapRow row;
    row.separation = separations[j];
    row.overlap = overlap(amplitude_column(data.data, s.truth(0)), amplitude_column(data.data, s.truth(1)));
    if (fit_phase) {
      FitSummary f = fit_engine(data.data, Engine::Quantum, derive_seed(s.seed, 1), cfg);
      match_labels(f, {s.classes[0].center, s.classes[1].center});
      row.cos_phi = f.cos_phi;
      row.alpha1 = f.alpha1;
      row.alpha2 = f.alpha2;
      row.converged = f.converged;
      row.fitted = true;
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Samples anchor + j step covering [lo, hi].
std::vector<double> anchored_axis(double anchor, double lo, double hi, double step) {
  const long below = static_cast<long>(std::ceil((anchor - lo) / step - 1e-9));
  const long above = static_cast<long>(std::ceil((hi - anchor) / step - 1e-9));
  std::vector<double> out;
  for (long j = -below; j <= above; ++j) out.push_back(anchor + static_cast<double>(j) * step);
  return out;
}

GaussianClass shift_x(const GaussianClass& c, double x) {
  Eigen::VectorXd mu = c.mu();
  mu(0) = x;
  return c.with_mu(std::move(mu));
}

double interference_value(const Dataset& data, const QuantumMixture2& mix) {
  return quantum_objective(data, mix, quantum_e_step(data, mix));
}

// Objective of the two-class model in its classical limit.
double limit_value(const Dataset& data, const GaussianClass& c1, const GaussianClass& c2, double a1) {
  if (!(a1 > 0.0 && a1 < 1.0)) return kNaN;
  try {
    return interference_value(data, QuantumMixture2::build(data, c1, c2, a1, std::sqrt(1.0 - a1 * a1)));
  } catch (const Error&) {
    return kNaN;
  }
}

std::size_t nearest(const std::vector<double>& axis, double v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < axis.size(); ++j)
    if (std::abs(axis[j] - v) < std::abs(axis[best] - v)) best = j;
  return best;
}

}  // namespace

LandscapeGrid landscape_scan(const Dataset& data, const ScenarioSpec& truth, Engine engine, const LandscapeConfig& cfg) {
  truth.validate();
  require(truth.classes.size() == 2, "landscape needs exactly two classes");
  require(truth.dim() == data.d(), "scenario and dataset dimensions differ");
  require(cfg.mu_step > 0.0 && cfg.alpha_step > 0.0 && cfg.true_alpha_step > 0.0, "landscape steps must be positive");
  const GaussianClass t1 = truth.truth(0), t2 = truth.truth(1);
  const double n = static_cast<double>(truth.total());
  const double a1_true = std::sqrt(truth.classes[0].count / n), a2_true = std::sqrt(truth.classes[1].count / n);
  const GaussianClass start1 = shift_x(t1, cfg.init_mu1x);

  LandscapeGrid g;
  g.engine = engine;
  std::vector<double> traj_x;
  GaussianClass f1 = t1, f2 = t2;

  if (engine == Engine::Quantum) {
    QuantumFitConfig qc;
    qc.convergence = cfg.convergence;
    auto r = quantum_fit(data, QuantumMixture2::build(data, start1, t2, a1_true, a2_true), qc);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : r.param_trace) {
      traj_x.push_back(p.class1.mu()(0));
      pairs.emplace_back(p.alpha1, p.cos_phi);
    }
    const QuantumMixture2& fin = r.params_final;
    traj_x.push_back(fin.class1.mu()(0));
    pairs.emplace_back(fin.alpha1, fin.cos_phi);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    for (const auto& [a, c] : pairs) {
      g.axis2.push_back(a);
      g.axis2_cos.push_back(c);
    }
    f1 = fin.class1;
    f2 = fin.class2;
    g.initial = r.objective_trace.front();
    g.final_value = r.objective_trace.back();
    g.final_mu1x = fin.class1.mu()(0);
    g.final_alpha1 = fin.alpha1;
    g.converged = r.converged;
    g.axis1 = anchored_axis(g.final_mu1x, *std::min_element(traj_x.begin(), traj_x.end()),
                            *std::max_element(traj_x.begin(), traj_x.end()), cfg.mu_step);
    g.objective.resize(static_cast<Eigen::Index>(g.axis1.size()), static_cast<Eigen::Index>(g.axis2.size()));
    for (std::size_t i = 0; i < g.axis1.size(); ++i) {
      const GaussianClass c1 = shift_x(f1, g.axis1[i]);
      for (std::size_t j = 0; j < g.axis2.size(); ++j) {
        double v = kNaN;
        try {
          v = interference_value(data, QuantumMixture2::from_phase(data, c1, f2, g.axis2[j], g.axis2_cos[j]));
        } catch (const Error&) {
        }
        g.objective(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      }
    }
    g.truth = exhaustive_alpha_search(data, t1, t2, cfg.true_alpha_step).objective;
  } else {
    Eigen::VectorXd priors(2);
    priors << a1_true * a1_true, 1.0 - a1_true * a1_true;
    auto r = classical_fit(data, ClassicalMixture({start1, t2}, priors), cfg.convergence);
    for (const auto& p : r.param_trace) traj_x.push_back(p.classes[0].mu()(0));
    const ClassicalMixture& fin = r.params_final;
    traj_x.push_back(fin.classes[0].mu()(0));
    f1 = fin.classes[0];
    f2 = fin.classes[1];
    const ClassicalMixture& ini = r.param_trace.front();
    g.initial = limit_value(data, ini.classes[0], ini.classes[1], std::sqrt(ini.priors(0)));
    g.final_mu1x = fin.classes[0].mu()(0);
    g.final_alpha1 = std::sqrt(fin.priors(0));
    g.final_value = limit_value(data, f1, f2, g.final_alpha1);
    g.converged = r.converged;
    g.axis1 = anchored_axis(g.final_mu1x, *std::min_element(traj_x.begin(), traj_x.end()),
                            *std::max_element(traj_x.begin(), traj_x.end()), cfg.mu_step);
    for (double a : anchored_axis(g.final_alpha1, cfg.alpha_step, 1.0 - cfg.alpha_step, cfg.alpha_step))
      if (a > 0.0 && a < 1.0) {
        g.axis2.push_back(a);
        g.axis2_cos.push_back(0.0);
      }
    g.objective.resize(static_cast<Eigen::Index>(g.axis1.size()), static_cast<Eigen::Index>(g.axis2.size()));
    for (std::size_t i = 0; i < g.axis1.size(); ++i) {
      const GaussianClass c1 = shift_x(f1, g.axis1[i]);
      for (std::size_t j = 0; j < g.axis2.size(); ++j)
        g.objective(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = limit_value(data, c1, f2, g.axis2[j]);
    }
    g.truth = limit_value(data, t1, t2, a1_true);
  }
  g.final_row = nearest(g.axis1, g.final_mu1x);
  g.final_col = nearest(g.axis2, g.final_alpha1);
  return g;
}

}  // namespace qmix
