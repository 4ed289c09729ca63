#pragma once

// Matrix quadratic risk R(M, Mhat) = E (Mhat - M)^T (Mhat - M): Monte Carlo
// estimation, the unbiased risk estimate, and a few exact reference values.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "matshrink/estimators.hpp"
#include "matshrink/matcore.hpp"

namespace matshrink {

struct RiskReport {
    SymMatrix mean_risk;
    Vector eigenvalues;     // descending, of mean_risk
    Vector eig_std_errors;  // batch means
    long n_reps = 0;
    long n_batches = 0;
    double frobenius_risk = 0.0;  // trace(mean_risk)
    double frobenius_se = 0.0;
    RngState seed{};
    std::string estimator;
    // generalized Bayes only
    std::optional<double> min_ess_fraction;
    long low_ess_count = 0;
};

// X_r = M + Z_r with Z_r drawn from stream (seed, r). All specs see the same
// X_r. Standard errors come from max(2, floor(sqrt(n_reps))) contiguous
// batches. Results do not depend on `workers`.
std::vector<RiskReport> mc_risk_multi(const std::vector<EstimatorSpec>& specs, const MeanMatrix& m, long n_reps,
                                      RngState rng, int workers = 1);

RiskReport mc_risk(const EstimatorSpec& spec, const MeanMatrix& m, long n_reps, RngState rng, int workers = 1);

using MatrixFunction = std::function<Matrix(const Matrix&)>;

// (div g)_{ij} = sum_a d g_aj / d X_ai by central differences (2np calls).
// Default step 1e-4 (1 + ||X||_F).
Matrix matrix_divergence_fd(const MatrixFunction& g, const Observation& x, std::optional<double> h = std::nullopt);

enum class DivergenceMethod { closed_form, finite_difference };

std::string divergence_method_name(DivergenceMethod m);

struct SureReport {
    SymMatrix estimate;
    DivergenceMethod divergence_method = DivergenceMethod::closed_form;
};

// n I + div g + (div g)^T + g^T g at X with g = Mhat(X) - X. Closed forms for
// every non-Bayes estimator; force_fd switches to finite differences.
// Throws Unsupported for generalized Bayes specs.
SureReport sure(const EstimatorSpec& spec, const Observation& x, bool force_fd = false);

struct SureCheckReport {
    SymMatrix mean_sure;
    SymMatrix mean_risk;
    Matrix discrepancy;  // mean of SURE_r - L_r
    Matrix std_error;    // per entry, over replicates
    double max_abs_discrepancy = 0.0;
    double se_at_max = 0.0;
    double max_z = 0.0;  // max_ij |discrepancy| / std_error
    long n_reps = 0;
    DivergenceMethod divergence_method = DivergenceMethod::closed_form;

    bool within(double z) const { return max_z <= z; }
};

// Paired comparison on the same draws X_r as mc_risk.
SureCheckReport sure_unbiasedness_check(const EstimatorSpec& spec, const MeanMatrix& m, long n_reps, RngState rng,
                                        int workers = 1);

// (p + 1) I_p
SymMatrix em_exact_risk_at_zero(ProblemDims dims);

// np (1 - r/p)(1 - p/n)
double frobenius_reduction_bound(ProblemDims dims, int r);

struct SweepRow {
    SingularSpectrum sigma;
    RiskReport report;
    bool minimax_pass = false;  // lambda_1 <= n + 4 SE
};

std::vector<SweepRow> minimaxity_sweep(const EstimatorSpec& spec, ProblemDims dims,
                                       const std::vector<SingularSpectrum>& spectra, long n_reps, RngState rng,
                                       int workers = 1);

// CSV with columns sigma_1..sigma_p, lambda_1..lambda_p, se_1..se_p,
// frobenius, n_reps, seed and, when requested, minimax_pass.
void write_risk_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool with_minimax);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    // Throws ParseError naming the column when it is absent.
    std::size_t index_of(const std::string& column) const;
    std::vector<double> column(const std::string& name) const;
};

// Parses a numeric CSV with a header line and checks the risk schema.
CsvTable read_risk_csv(std::istream& in);

}  // namespace matshrink
