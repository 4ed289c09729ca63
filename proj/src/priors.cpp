#include "matshrink/priors.hpp"

#include <cmath>
#include <limits>
#include <type_traits>

namespace matshrink {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kRangeSlack = 1e-12;

Matrix shifted_gram(const Matrix& m, double beta)
{
    Matrix s = m.transpose() * m;
    s.diagonal().array() += beta;
    return s;
}

Vector column_sq_norms(const Matrix& m, double beta)
{
    return (m.colwise().squaredNorm().array() + beta).matrix().transpose();
}

// -(k/2) * logdet(S) with the measure-zero singular set mapped to a marker.
ExtendedLogDensity neg_half_logdet(const Matrix& s, double k)
{
    if (k == 0.0) {
        return ExtendedLogDensity::finite(0.0);
    }
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
        return k > 0.0 ? ExtendedLogDensity::pos_infinity() : ExtendedLogDensity::neg_infinity();
    }
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    if (!std::isfinite(logdet)) {
        return k > 0.0 ? ExtendedLogDensity::pos_infinity() : ExtendedLogDensity::neg_infinity();
    }
    return ExtendedLogDensity::finite(-0.5 * k * logdet);
}

// Same for S = M^T M, via a rank-revealing QR of M so that the small singular
// values keep their relative accuracy (the Gram matrix squares the condition
// number).
ExtendedLogDensity neg_half_logdet_gram(const Matrix& m, double k)
{
    if (k == 0.0) {
        return ExtendedLogDensity::finite(0.0);
    }
    if (m.rows() < m.cols()) {
        return k > 0.0 ? ExtendedLogDensity::pos_infinity() : ExtendedLogDensity::neg_infinity();
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    if (qr.rank() < m.cols()) {
        return k > 0.0 ? ExtendedLogDensity::pos_infinity() : ExtendedLogDensity::neg_infinity();
    }
    const double logdet = 2.0 * qr.matrixR().diagonal().head(m.cols()).array().abs().log().sum();
    return ExtendedLogDensity::finite(-0.5 * k * logdet);
}

ExtendedLogDensity neg_half_c_log(double s, double c)
{
    if (c == 0.0) {
        return ExtendedLogDensity::finite(0.0);
    }
    if (s <= 0.0) {
        return ExtendedLogDensity::pos_infinity();
    }
    return ExtendedLogDensity::finite(-0.5 * c * std::log(s));
}

Matrix spd_inverse_or_throw(const Matrix& s, const char* what)
{
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
        throw SingularPoint(std::string(what) + ": M^T M + beta I is singular");
    }
    Matrix inv = llt.solve(Matrix::Identity(s.rows(), s.cols()));
    if (!inv.allFinite()) {
        throw SingularPoint(std::string(what) + ": M^T M + beta I is singular");
    }
    return 0.5 * (inv + inv.transpose());
}

}  // namespace

double ExtendedLogDensity::value() const
{
    if (kind_ != Kind::finite) {
        throw NonFiniteEvaluation("log density is infinite at this point");
    }
    return value_;
}

double ExtendedLogDensity::as_double() const noexcept
{
    switch (kind_) {
    case Kind::pos_infinity:
        return std::numeric_limits<double>::infinity();
    case Kind::neg_infinity:
        return -std::numeric_limits<double>::infinity();
    case Kind::finite:
        break;
    }
    return value_;
}

std::string family_name(const PriorSpec& prior)
{
    return std::visit(Overloaded{
                          [](const MatrixTPrior&) { return std::string("matrix_t"); },
                          [](const SvsPrior&) { return std::string("svs"); },
                          [](const SteinFrobeniusPrior&) { return std::string("stein"); },
                          [](const ColumnwiseSteinPrior&) { return std::string("columnwise"); },
                          [](const FlatPrior&) { return std::string("flat"); },
                      },
                      prior);
}

void validate(const PriorSpec& prior)
{
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidArgument(std::string("prior hyperparameter ") + name + " must be finite and >= 0");
        }
    };
    std::visit(Overloaded{
                   [&](const MatrixTPrior& t) {
                       check(t.beta, "beta");
                       if (t.alpha && !std::isfinite(*t.alpha)) {
                           throw InvalidArgument("prior hyperparameter alpha must be finite");
                       }
                   },
                   [](const SvsPrior&) {},
                   [&](const SteinFrobeniusPrior& s) {
                       check(s.beta, "beta");
                       if (s.c) check(*s.c, "c");
                   },
                   [&](const ColumnwiseSteinPrior& s) {
                       check(s.beta, "beta");
                       if (s.c) check(*s.c, "c");
                   },
                   [](const FlatPrior&) {},
               },
               prior);
}

ResolvedPrior resolve(const PriorSpec& prior, ProblemDims dims)
{
    validate(prior);
    const double n = dims.n;
    const double p = dims.p;
    ResolvedPrior r;
    std::visit(Overloaded{
                   [&](const MatrixTPrior& t) {
                       r.family = ResolvedPrior::Family::matrix_t;
                       r.alpha = t.alpha.value_or(-2.0 * p);
                       r.k = r.alpha + n + p - 1.0;
                       r.beta = t.beta;
                   },
                   [&](const SvsPrior&) {
                       r.family = ResolvedPrior::Family::matrix_t;
                       r.alpha = -2.0 * p;
                       r.k = n - p - 1.0;
                       r.beta = 0.0;
                   },
                   [&](const SteinFrobeniusPrior& s) {
                       r.family = ResolvedPrior::Family::stein_frobenius;
                       r.c = s.c.value_or(n * p - 2.0);
                       r.beta = s.beta;
                   },
                   [&](const ColumnwiseSteinPrior& s) {
                       r.family = ResolvedPrior::Family::columnwise_stein;
                       r.c = s.c.value_or((n - 2.0) / p);
                       r.beta = s.beta;
                   },
                   [&](const FlatPrior&) { r.family = ResolvedPrior::Family::flat; },
               },
               prior);
    if (r.c < 0.0) {
        throw InvalidArgument("prior hyperparameter c resolved to a negative value for these dims");
    }
    return r;
}

bool claimed_matrix_superharmonic(const PriorSpec& prior, ProblemDims dims)
{
    const double n = dims.n;
    const double p = dims.p;
    const ResolvedPrior r = resolve(prior, dims);
    if (std::holds_alternative<SvsPrior>(prior)) {
        return dims.em_regime();
    }
    switch (r.family) {
    case ResolvedPrior::Family::matrix_t:
        return r.alpha >= -n - p + 1.0 - kRangeSlack && r.alpha <= -2.0 * p + kRangeSlack && r.beta >= 0.0;
    case ResolvedPrior::Family::stein_frobenius:
        return r.c >= 0.0 && r.c <= n - 2.0 + kRangeSlack;
    case ResolvedPrior::Family::columnwise_stein:
        return r.c >= 0.0 && r.c <= (n - 2.0) / p + kRangeSlack;
    case ResolvedPrior::Family::flat:
        return true;
    }
    return false;
}

ExtendedLogDensity log_density(const PriorSpec& prior, const MeanMatrix& m)
{
    const ResolvedPrior r = resolve(prior, m.dims());
    const Matrix& mm = m.matrix();
    switch (r.family) {
    case ResolvedPrior::Family::matrix_t:
        if (r.beta == 0.0) {
            return neg_half_logdet_gram(mm, r.k);
        }
        return neg_half_logdet(shifted_gram(mm, r.beta), r.k);
    case ResolvedPrior::Family::stein_frobenius:
        return neg_half_c_log(mm.squaredNorm() + r.beta, r.c);
    case ResolvedPrior::Family::columnwise_stein: {
        const Vector s = column_sq_norms(mm, r.beta);
        double total = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const ExtendedLogDensity term = neg_half_c_log(s(i), r.c);
            if (!term.is_finite()) {
                return term;
            }
            total += term.value();
        }
        return ExtendedLogDensity::finite(total);
    }
    case ResolvedPrior::Family::flat:
        return ExtendedLogDensity::finite(0.0);
    }
    throw InternalError("log_density: unknown prior family");
}

MeanMatrix grad_log_density(const PriorSpec& prior, const MeanMatrix& m)
{
    const ResolvedPrior r = resolve(prior, m.dims());
    const Matrix& mm = m.matrix();
    switch (r.family) {
    case ResolvedPrior::Family::matrix_t: {
        if (r.k == 0.0) {
            return MeanMatrix(Matrix::Zero(mm.rows(), mm.cols()));
        }
        const Matrix s_inv = spd_inverse_or_throw(shifted_gram(mm, r.beta), "grad_log_density");
        return MeanMatrix(-r.k * mm * s_inv);
    }
    case ResolvedPrior::Family::stein_frobenius: {
        if (r.c == 0.0) {
            return MeanMatrix(Matrix::Zero(mm.rows(), mm.cols()));
        }
        const double s = mm.squaredNorm() + r.beta;
        if (s <= 0.0) {
            throw SingularPoint("grad_log_density: ||M||_F^2 + beta = 0");
        }
        return MeanMatrix(-r.c / s * mm);
    }
    case ResolvedPrior::Family::columnwise_stein: {
        if (r.c == 0.0) {
            return MeanMatrix(Matrix::Zero(mm.rows(), mm.cols()));
        }
        const Vector s = column_sq_norms(mm, r.beta);
        if ((s.array() <= 0.0).any()) {
            throw SingularPoint("grad_log_density: a column has zero norm and beta = 0");
        }
        Matrix g = mm;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            g.col(i) *= -r.c / s(i);
        }
        return MeanMatrix(std::move(g));
    }
    case ResolvedPrior::Family::flat:
        return MeanMatrix(Matrix::Zero(mm.rows(), mm.cols()));
    }
    throw InternalError("grad_log_density: unknown prior family");
}

SymMatrix laplacian_over_density(const PriorSpec& prior, const MeanMatrix& m)
{
    const ResolvedPrior r = resolve(prior, m.dims());
    const Matrix& mm = m.matrix();
    const double n = static_cast<double>(mm.rows());
    const double p = static_cast<double>(mm.cols());
    const auto order = static_cast<Eigen::Index>(p);

    switch (r.family) {
    case ResolvedPrior::Family::matrix_t: {
        if (r.k == 0.0) {
            return SymMatrix::zero(static_cast<int>(order));
        }
        const Matrix s_inv = spd_inverse_or_throw(shifted_gram(mm, r.beta), "matrix_laplacian_closed");
        Matrix bracket = 2.0 * (r.alpha + 2.0 * p) * s_inv;
        if (r.beta != 0.0) {
            bracket -= 2.0 * (r.alpha + n + p) * r.beta * (s_inv * s_inv);
            bracket -= 2.0 * r.beta * s_inv.trace() * s_inv;
        }
        return SymMatrix(0.5 * r.k * bracket);
    }
    case ResolvedPrior::Family::stein_frobenius: {
        if (r.c == 0.0) {
            return SymMatrix::zero(static_cast<int>(order));
        }
        const double s = mm.squaredNorm() + r.beta;
        if (s <= 0.0) {
            throw SingularPoint("matrix_laplacian_closed: ||M||_F^2 + beta = 0");
        }
        Matrix inner = -(r.c + 2.0) * (mm.transpose() * mm);
        inner.diagonal().array() += n * s;
        return SymMatrix(-r.c / (s * s) * inner);
    }
    case ResolvedPrior::Family::columnwise_stein: {
        if (r.c == 0.0) {
            return SymMatrix::zero(static_cast<int>(order));
        }
        const Vector s = column_sq_norms(mm, r.beta);
        if ((s.array() <= 0.0).any()) {
            throw SingularPoint("matrix_laplacian_closed: a column has zero norm and beta = 0");
        }
        const Vector inv_s = s.cwiseInverse();
        Matrix a = inv_s.asDiagonal() * (mm.transpose() * mm) * inv_s.asDiagonal();
        Matrix bracket = r.c * a;
        bracket.diagonal() -= (n - 2.0) * a.diagonal();
        bracket.diagonal() -= n * r.beta * inv_s.cwiseAbs2();
        return SymMatrix(r.c * bracket);
    }
    case ResolvedPrior::Family::flat:
        return SymMatrix::zero(static_cast<int>(order));
    }
    throw InternalError("laplacian_over_density: unknown prior family");
}

SymMatrix matrix_laplacian_closed(const PriorSpec& prior, const MeanMatrix& m)
{
    const SymMatrix ratio = laplacian_over_density(prior, m);
    const ExtendedLogDensity logpi = log_density(prior, m);
    if (!logpi.is_finite()) {
        throw SingularPoint("matrix_laplacian_closed: density is not finite at M");
    }
    return SymMatrix(std::exp(logpi.value()) * ratio.matrix());
}

ExtendedLogDensity pseudo_marginal_log(const PriorSpec& prior, const Observation& x)
{
    return log_density(prior, as_mean(x));
}

MeanMatrix pseudo_bayes_estimate(const PriorSpec& prior, const Observation& x)
{
    return MeanMatrix(x.matrix() + grad_log_density(prior, as_mean(x)).matrix());
}

}  // namespace matshrink
