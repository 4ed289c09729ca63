#pragma once

// Shrinkage priors on the mean matrix: log densities, matrix gradients of the
// log density, and closed-form matrix Laplacians
//   (Lap f)_{ij} = sum_a d^2 f / dM_{ai} dM_{aj}.

#include <optional>
#include <string>
#include <variant>

#include "matshrink/matcore.hpp"

namespace matshrink {

// det(M^T M + beta I)^{-(alpha + n + p - 1)/2}. alpha defaults to -2p.
struct MatrixTPrior {
    std::optional<double> alpha;
    double beta = 0.0;
};

// det(M^T M)^{-(n - p - 1)/2}, i.e. MatrixTPrior{alpha = -2p, beta = 0}.
struct SvsPrior {};

// (||M||_F^2 + beta)^{-c/2}. c defaults to np - 2 (Stein's prior).
struct SteinFrobeniusPrior {
    std::optional<double> c;
    double beta = 0.0;
};

// prod_i (sum_a M_ai^2 + beta)^{-c/2}. c defaults to (n - 2)/p.
struct ColumnwiseSteinPrior {
    std::optional<double> c;
    double beta = 0.0;
};

struct FlatPrior {};

using PriorSpec = std::variant<MatrixTPrior, SvsPrior, SteinFrobeniusPrior, ColumnwiseSteinPrior, FlatPrior>;

// Log of a possibly improper density. Infinities are carried as a kind, never
// as floating-point inf in `value`.
class ExtendedLogDensity {
public:
    enum class Kind { finite, pos_infinity, neg_infinity };

    static ExtendedLogDensity finite(double v) { return ExtendedLogDensity(Kind::finite, v); }
    static ExtendedLogDensity pos_infinity() { return ExtendedLogDensity(Kind::pos_infinity, 0.0); }
    static ExtendedLogDensity neg_infinity() { return ExtendedLogDensity(Kind::neg_infinity, 0.0); }

    Kind kind() const noexcept { return kind_; }
    bool is_finite() const noexcept { return kind_ == Kind::finite; }
    // Throws NonFiniteEvaluation unless finite.
    double value() const;
    // +-inf as IEEE doubles, for callers that compare or exponentiate.
    double as_double() const noexcept;

private:
    ExtendedLogDensity(Kind k, double v) : kind_(k), value_(v) {}
    Kind kind_;
    double value_;
};

std::string family_name(const PriorSpec& prior);

// Throws InvalidArgument for negative beta or c.
void validate(const PriorSpec& prior);

// Concrete hyperparameters with dims-dependent defaults filled in.
struct ResolvedPrior {
    enum class Family { matrix_t, stein_frobenius, columnwise_stein, flat };
    Family family = Family::flat;
    // matrix_t: exponent k = alpha + n + p - 1 in det(S)^{-k/2}
    double k = 0.0;
    double alpha = 0.0;
    double c = 0.0;
    double beta = 0.0;
};

ResolvedPrior resolve(const PriorSpec& prior, ProblemDims dims);

bool claimed_matrix_superharmonic(const PriorSpec& prior, ProblemDims dims);

ExtendedLogDensity log_density(const PriorSpec& prior, const MeanMatrix& m);

// Matrix gradient of log pi at M. Throws SingularPoint on the singular set.
MeanMatrix grad_log_density(const PriorSpec& prior, const MeanMatrix& m);

// Lap pi(M), using the closed forms for each family.
SymMatrix matrix_laplacian_closed(const PriorSpec& prior, const MeanMatrix& m);

// Lap pi(M) / pi(M). Same closed forms without the density factor, so it stays
// finite where pi under- or overflows.
SymMatrix laplacian_over_density(const PriorSpec& prior, const MeanMatrix& m);

// log m(X) for the pseudo-Bayes rule X + grad log m(X), with m = pi.
ExtendedLogDensity pseudo_marginal_log(const PriorSpec& prior, const Observation& x);

// X + grad log pi(X).
MeanMatrix pseudo_bayes_estimate(const PriorSpec& prior, const Observation& x);

}  // namespace matshrink
