#pragma once

// JSON forms of specs, configs and reports. Readers throw ParseError with the
// offending key in the message; unknown keys are rejected.

#include <json.hpp>

#include "matshrink/estimators.hpp"
#include "matshrink/experiments.hpp"
#include "matshrink/priors.hpp"
#include "matshrink/risk.hpp"
#include "matshrink/superharmonic.hpp"

namespace matshrink {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);  // array of rows
Matrix matrix_from_json(const Json& j);

// {"family": "matrix_t"|"svs"|"stein"|"columnwise"|"flat", "alpha", "beta", "c"}
Json prior_to_json(const PriorSpec& prior);
PriorSpec prior_from_json(const Json& j);

// {"n_samples", "seed", "stream", "ess_floor", "force_importance_sampling"}
Json is_config_to_json(const ISConfig& cfg);
ISConfig is_config_from_json(const Json& j);

// {"kind": "mle"|"em"|"js"|"cjs"|"gshrink"|"gb", "c", "prior", "is"}
Json estimator_to_json(const EstimatorSpec& spec);
EstimatorSpec estimator_from_json(const Json& j);

// {"n", "p", "estimators", "spectra" | "preset", "n_reps", "seed", "output_dir", "workers"}
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const Json& j);

Json risk_report_to_json(const RiskReport& r);
Json sure_report_to_json(const SureReport& r);
Json sure_check_to_json(const SureCheckReport& r);
Json superharmonic_report_to_json(const SuperharmonicReport& r);
Json diagnostics_to_json(const BayesDiagnostics& d);

}  // namespace matshrink
