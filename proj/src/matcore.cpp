#include "matshrink/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace matshrink {

namespace detail {

void require_finite(const Matrix& m, const char* what)
{
    if (!m.allFinite()) {
        throw InvalidArgument(std::string(what) + " contains non-finite entries");
    }
}

}  // namespace detail

ProblemDims::ProblemDims(int rows, int cols) : n(rows), p(cols)
{
    if (rows < 1 || cols < 1) {
        throw InvalidArgument("ProblemDims: need n >= 1 and p >= 1, got n=" + std::to_string(rows) +
                              ", p=" + std::to_string(cols));
    }
}

SingularSpectrum::SingularSpectrum(std::vector<double> values) : values_(std::move(values))
{
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
            throw InvalidArgument("singular values must be finite and nonnegative");
        }
        if (i > 0 && values_[i] > values_[i - 1]) {
            throw InvalidArgument("singular values must be in descending order");
        }
    }
}

SymMatrix::SymMatrix(const Matrix& entries)
{
    if (entries.rows() != entries.cols()) {
        throw DimensionMismatch("SymMatrix needs a square matrix, got " + std::to_string(entries.rows()) + "x" +
                                std::to_string(entries.cols()));
    }
    entries_ = 0.5 * (entries + entries.transpose());
}

SymMatrix SymMatrix::identity(int order, double scale)
{
    return SymMatrix(scale * Matrix::Identity(order, order));
}

SymMatrix SymMatrix::zero(int order)
{
    return SymMatrix(Matrix::Zero(order, order));
}

Rng::Rng(RngState state, std::uint64_t substream)
{
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(state.seed), hi(state.seed), lo(state.stream), hi(state.stream), lo(substream),
                      hi(substream)};
    engine_.seed(seq);
}

void Rng::fill_normal(Eigen::Ref<Matrix> out)
{
    // column-major fill order is part of the reproducibility contract
    const Eigen::Index rows = out.rows();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        double* col = out.col(j).data();
        for (Eigen::Index i = 0; i < rows; ++i) {
            col[i] = normal_(engine_);
        }
    }
}

Observation sample_matrix_normal(const MeanMatrix& mean, Rng& rng, double noise_scale)
{
    Matrix x(mean.matrix().rows(), mean.matrix().cols());
    rng.fill_normal(x);
    x *= noise_scale;
    x += mean.matrix();
    return Observation(std::move(x));
}

GramFactor::GramFactor(const Matrix& x, double rcond_min)
{
    if (x.cols() > x.rows()) {
        throw SingularGram("X^T X is singular: p=" + std::to_string(x.cols()) + " exceeds n=" +
                           std::to_string(x.rows()));
    }
    gram_ = Matrix::Zero(x.cols(), x.cols());
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success) {
        throw SingularGram("X^T X is not positive definite");
    }
    rcond_ = llt_.rcond();
    if (!(rcond_ >= rcond_min)) {
        throw SingularGram("X^T X is ill-conditioned: rcond=" + std::to_string(rcond_));
    }
}

Matrix GramFactor::inverse() const
{
    Matrix inv = llt_.solve(Matrix::Identity(gram_.rows(), gram_.cols()));
    return 0.5 * (inv + inv.transpose());
}

SymMatrix gram_inverse(const Observation& x, double rcond_min)
{
    return SymMatrix(GramFactor(x.matrix(), rcond_min).inverse());
}

EigenDecomposition sym_eig(const SymMatrix& s)
{
    if (!s.matrix().allFinite()) {
        throw NonConvergence("sym_eig: input has non-finite entries");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s.matrix());
    if (solver.info() != Eigen::Success) {
        throw NonConvergence("sym_eig: eigensolver did not converge");
    }
    // Eigen returns ascending order
    EigenDecomposition out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

Vector sym_eigenvalues(const SymMatrix& s)
{
    if (!s.matrix().allFinite()) {
        throw NonConvergence("sym_eig: input has non-finite entries");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s.matrix(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NonConvergence("sym_eig: eigensolver did not converge");
    }
    return solver.eigenvalues().reverse();
}

bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol)
{
    if (a.order() != b.order()) {
        throw DimensionMismatch("loewner_leq: orders differ (" + std::to_string(a.order()) + " vs " +
                                std::to_string(b.order()) + ")");
    }
    const Vector eig = sym_eigenvalues(SymMatrix(b.matrix() - a.matrix()));
    return eig(eig.size() - 1) >= -tol;
}

MeanMatrix embed_spectrum(ProblemDims dims, const SingularSpectrum& sigma)
{
    if (sigma.size() != dims.p || dims.p > dims.n) {
        throw DimensionMismatch("embed_spectrum: need length(sigma) = p <= n, got length " +
                                std::to_string(sigma.size()) + " for n=" + std::to_string(dims.n) +
                                ", p=" + std::to_string(dims.p));
    }
    Matrix m = Matrix::Zero(dims.n, dims.p);
    for (int i = 0; i < dims.p; ++i) {
        m(i, i) = sigma[i];
    }
    return MeanMatrix(std::move(m));
}

SingularSpectrum singular_values(const Matrix& m)
{
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    std::vector<double> values(s.data(), s.data() + s.size());
    std::sort(values.begin(), values.end(), std::greater<>());
    for (double& v : values) {
        v = std::max(v, 0.0);
    }
    return SingularSpectrum(std::move(values));
}

Matrix random_orthogonal(int k, Rng& rng)
{
    Matrix g(k, k);
    rng.fill_normal(g);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    // sign fix on R's diagonal makes Q Haar distributed
    const Matrix& r = qr.matrixQR();
    for (int j = 0; j < k; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    return q;
}

}  // namespace matshrink
