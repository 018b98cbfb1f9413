#pragma once

#include <string>

#include "json.hpp"
#include "qmix/classical_em.hpp"
#include "qmix/error.hpp"
#include "qmix/fit_report.hpp"
#include "qmix/quantum_em.hpp"

namespace qmix {

using Json = nlohmann::ordered_json;

// Value rounded to nine significant digits; null when not finite.
Json num(double v);
Json vec_json(const Eigen::VectorXd& v);
Json mat_json(const Eigen::MatrixXd& m);

Json to_json(const GaussianClass& c);
Json to_json(const ClassicalMixture& m);
Json to_json(const QuantumMixture2& m);
Json to_json(const FitReport<ClassicalMixture>& r);
Json to_json(const FitReport<QuantumMixture2>& r);
Json error_json(const Error& e);

// Two-space indented text with a trailing newline.
std::string dump(const Json& j);

}  // namespace qmix
