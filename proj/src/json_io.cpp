#include "qmix/json_io.hpp"

#include <cmath>
#include <cstdlib>

#include "qmix/format.hpp"

namespace qmix {

Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(fmt_num(v).c_str(), nullptr);
}

Json vec_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

Json mat_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec_json(m.row(r).transpose()));
  return out;
}

Json to_json(const GaussianClass& c) { return {{"mu", vec_json(c.mu())}, {"cov", mat_json(c.cov())}}; }

Json to_json(const ClassicalMixture& m) {
  Json classes = Json::array();
  for (const auto& c : m.classes) classes.push_back(to_json(c));
  return {{"classes", classes}, {"priors", vec_json(m.priors)}};
}

Json to_json(const QuantumMixture2& m) {
  return {{"classes", Json::array({to_json(m.class1), to_json(m.class2)})},
          {"alpha1", num(m.alpha1)},
          {"alpha2", num(m.alpha2)},
          {"cos_phi", num(m.cos_phi)},
          {"overlap", num(m.total_overlap)}};
}

namespace {

template <class Params>
Json report_json(const FitReport<Params>& r, const char* engine, const char* objective) {
  Json trace = Json::array();
  for (double v : r.objective_trace) trace.push_back(num(v));
  Json counts = Json::array();
  for (const auto& c : r.count_trace) counts.push_back(vec_json(c));
  return {{"engine", engine},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"objective_kind", objective},
          {"objective", num(r.objective_trace.back())},
          {"params", to_json(r.params_final)},
          {"n_per_class", vec_json(r.n_per_class)},
          {"objective_trace", trace},
          {"count_trace", counts}};
}

}  // namespace

Json to_json(const FitReport<ClassicalMixture>& r) { return report_json(r, "classical", "log_likelihood"); }
Json to_json(const FitReport<QuantumMixture2>& r) { return report_json(r, "quantum", "interference_objective"); }

Json error_json(const Error& e) { return {{"error", to_string(e.code())}, {"message", e.what()}}; }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace qmix
