#pragma once

// Point estimators of the mean matrix M from a single observation X.

#include <optional>
#include <string>
#include <variant>

#include "matshrink/matcore.hpp"
#include "matshrink/priors.hpp"

namespace matshrink {

struct ISConfig {
    long n_samples = 10000;
    double ess_floor = 0.02;
    RngState seed{};
    // Use likelihood-proposal importance sampling even for radial priors.
    bool force_importance_sampling = false;
    // Test hook: draws Z are replaced by U Z V^T. Lets equivariance tests feed
    // rotated common random numbers.
    std::optional<Matrix> rotate_left;
    std::optional<Matrix> rotate_right;
    int workers = 1;
};

struct MleSpec {};
struct EfronMorrisSpec {};
// Non-positive-part James-Stein with constant np - 2.
struct JamesSteinSpec {};
struct ColumnwiseJsSpec {
    std::optional<double> c;  // default (n - 2)/p
};
struct GeneralizedShrinkageSpec {
    double c = 0.0;
};
struct GeneralizedBayesSpec {
    PriorSpec prior = SvsPrior{};
    ISConfig is;
};

using EstimatorSpec = std::variant<MleSpec, EfronMorrisSpec, JamesSteinSpec, ColumnwiseJsSpec,
                                   GeneralizedShrinkageSpec, GeneralizedBayesSpec>;

// "mle", "em", "js", "cjs", "gshrink", "gb"
std::string estimator_kind(const EstimatorSpec& spec);
// Human-readable label, e.g. "gb(svs)".
std::string estimator_label(const EstimatorSpec& spec);

bool is_bayes(const EstimatorSpec& spec);

// Throws RegimeViolation / InvalidArgument when the spec cannot be used at dims.
void validate(const EstimatorSpec& spec, ProblemDims dims);

struct BayesDiagnostics {
    // "importance_sampling", "radial_series" or "radial_quadrature"
    std::string method;
    long n_samples = 0;
    std::optional<double> ess;
    double ess_fraction = 1.0;
    bool low_ess = false;
    // entrywise Monte Carlo standard error of the posterior mean (zero for the
    // radial methods)
    Matrix std_error;
};

struct PosteriorMean {
    MeanMatrix mean;
    BayesDiagnostics diagnostics;
};

struct EstimateResult {
    MeanMatrix estimate;
    std::optional<BayesDiagnostics> diagnostics;
};

EstimateResult estimate(const EstimatorSpec& spec, const Observation& x);

MeanMatrix mle(const Observation& x);

// X (I - (n - p - 1)(X^T X)^{-1})
MeanMatrix efron_morris(const Observation& x, double rcond_min = kDefaultRcondMin);

// (1 - k / ||X||_F^2) X, k defaults to np - 2.
MeanMatrix james_stein(const Observation& x, std::optional<double> k = std::nullopt);

// Column i scaled by 1 - c / ||X_i||^2.
MeanMatrix columnwise_js(const Observation& x, std::optional<double> c = std::nullopt);

// X (I - c (X^T X)^{-1})
MeanMatrix generalized_shrinkage(const Observation& x, double c, double rcond_min = kDefaultRcondMin);

// Posterior mean under prior x likelihood. Radial priors (Stein, column-wise
// Stein) are reduced to one-dimensional noncentral chi-square moments; the
// other families use self-normalized importance sampling with proposal
// N(X, I, I), antithetic pairs and log-space weights.
PosteriorMean gb_posterior_mean(const PriorSpec& prior, const Observation& x, const ISConfig& cfg);

// Always importance sampling, whatever the family.
PosteriorMean gb_importance_sampling(const PriorSpec& prior, const Observation& x, const ISConfig& cfg);

// For U ~ noncentral chi-square(k, lambda) and f(u) = (u + beta)^{-c/2}:
// log E f(U). Throws InvalidArgument when the moment is infinite (beta = 0,
// c >= k).
double log_radial_moment(double k, double lambda, double c, double beta);

// E f(chi2'(k + 2, lambda)) / E f(chi2'(k, lambda)), the factor by which the
// posterior mean shrinks X under the radial prior f(||M||^2) in k dimensions.
double radial_shrinkage_factor(double k, double lambda, double c, double beta);

}  // namespace matshrink
