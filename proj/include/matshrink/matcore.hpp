#pragma once

// Core matrix types, seeded sampling and the small set of linear-algebra
// primitives shared by the estimators, priors and risk code.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include "matshrink/error.hpp"

namespace matshrink {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRcondMin = 1e-12;

// Shape (n, p) of the observation. Estimators that shrink through (X^T X)^{-1}
// are only defined when n - p - 1 > 0.
struct ProblemDims {
    int n = 1;
    int p = 1;

    ProblemDims() = default;
    ProblemDims(int rows, int cols);

    bool em_regime() const noexcept { return n - p - 1 > 0; }
    int em_constant() const noexcept { return n - p - 1; }

    friend bool operator==(const ProblemDims&, const ProblemDims&) = default;
};

namespace detail {
struct MeanTag;
struct ObservationTag;
void require_finite(const Matrix& m, const char* what);
}  // namespace detail

// Dense n x p real matrix with all entries finite. The tag keeps means and
// observations from being mixed up at call sites.
template <class Tag>
class DataMatrix {
public:
    explicit DataMatrix(Matrix entries) : entries_(std::move(entries))
    {
        if (entries_.rows() < 1 || entries_.cols() < 1) {
            throw InvalidArgument("matrix must have at least one row and one column");
        }
        detail::require_finite(entries_, "matrix");
    }

    static DataMatrix zeros(ProblemDims dims) { return DataMatrix(Matrix::Zero(dims.n, dims.p)); }

    ProblemDims dims() const { return {static_cast<int>(entries_.rows()), static_cast<int>(entries_.cols())}; }
    const Matrix& matrix() const noexcept { return entries_; }
    double operator()(Eigen::Index a, Eigen::Index i) const { return entries_(a, i); }

private:
    Matrix entries_;
};

using MeanMatrix = DataMatrix<detail::MeanTag>;
using Observation = DataMatrix<detail::ObservationTag>;

inline MeanMatrix as_mean(const Observation& x) { return MeanMatrix(x.matrix()); }
inline Observation as_observation(const MeanMatrix& m) { return Observation(m.matrix()); }

// Singular values sigma_1 >= ... >= sigma_p >= 0.
class SingularSpectrum {
public:
    SingularSpectrum() = default;
    explicit SingularSpectrum(std::vector<double> values);

    const std::vector<double>& values() const noexcept { return values_; }
    int size() const noexcept { return static_cast<int>(values_.size()); }
    double operator[](int i) const { return values_.at(static_cast<std::size_t>(i)); }

private:
    std::vector<double> values_;
};

// Symmetric p x p matrix; symmetrized as (S + S^T)/2 on construction.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& entries);

    static SymMatrix identity(int order, double scale = 1.0);
    static SymMatrix zero(int order);

    int order() const noexcept { return static_cast<int>(entries_.rows()); }
    const Matrix& matrix() const noexcept { return entries_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
    Matrix entries_;
};

// Key of an independent random stream. Equal keys give equal draws.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    friend bool operator==(const RngState&, const RngState&) = default;
};

// Random engine keyed by (seed, stream, substream). The three words are mixed
// through std::seed_seq, so nearby keys give unrelated sequences.
class Rng {
public:
    explicit Rng(RngState state, std::uint64_t substream = 0);

    double normal() { return normal_(engine_); }
    void fill_normal(Eigen::Ref<Matrix> out);
    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_;
};

// X = M + noise_scale * Z with Z i.i.d. N(0, 1). noise_scale = 0 is a test hook.
Observation sample_matrix_normal(const MeanMatrix& mean, Rng& rng, double noise_scale = 1.0);

// Cholesky factorization of X^T X with a conditioning guard, shared by every
// estimator that applies (X^T X)^{-1}.
class GramFactor {
public:
    GramFactor(const Matrix& x, double rcond_min = kDefaultRcondMin);

    const Matrix& gram() const noexcept { return gram_; }
    Matrix inverse() const;
    // (X^T X)^{-1} b
    Matrix solve(const Matrix& b) const { return llt_.solve(b); }
    double rcond() const noexcept { return rcond_; }

private:
    Matrix gram_;
    Eigen::LLT<Matrix> llt_;
    double rcond_ = 0.0;
};

// (X^T X)^{-1}. Throws SingularGram when the reciprocal condition estimate of
// X^T X falls below rcond_min.
SymMatrix gram_inverse(const Observation& x, double rcond_min = kDefaultRcondMin);

struct EigenDecomposition {
    Vector values;   // descending
    Matrix vectors;  // column k pairs with values[k]
};

EigenDecomposition sym_eig(const SymMatrix& s);
Vector sym_eigenvalues(const SymMatrix& s);

// A <= B in the Loewner order: min eig(B - A) >= -tol.
bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol = 0.0);

// M with M_ii = sigma_i on the leading p x p diagonal and zeros elsewhere.
MeanMatrix embed_spectrum(ProblemDims dims, const SingularSpectrum& sigma);

SingularSpectrum singular_values(const Matrix& m);

// Haar-distributed orthogonal k x k matrix.
Matrix random_orthogonal(int k, Rng& rng);

}  // namespace matshrink
