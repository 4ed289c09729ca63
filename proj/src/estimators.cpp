#include "matshrink/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "matshrink/parallel.hpp"

namespace matshrink {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr long kChunkPairs = 512;

}  // namespace

std::string estimator_kind(const EstimatorSpec& spec)
{
    return std::visit(Overloaded{
                          [](const MleSpec&) { return std::string("mle"); },
                          [](const EfronMorrisSpec&) { return std::string("em"); },
                          [](const JamesSteinSpec&) { return std::string("js"); },
                          [](const ColumnwiseJsSpec&) { return std::string("cjs"); },
                          [](const GeneralizedShrinkageSpec&) { return std::string("gshrink"); },
                          [](const GeneralizedBayesSpec&) { return std::string("gb"); },
                      },
                      spec);
}

std::string estimator_label(const EstimatorSpec& spec)
{
    if (const auto* gb = std::get_if<GeneralizedBayesSpec>(&spec)) {
        return "gb(" + family_name(gb->prior) + ")";
    }
    return estimator_kind(spec);
}

bool is_bayes(const EstimatorSpec& spec)
{
    return std::holds_alternative<GeneralizedBayesSpec>(spec);
}

void validate(const EstimatorSpec& spec, ProblemDims dims)
{
    auto need_em_regime = [&](const char* who) {
        if (!dims.em_regime()) {
            throw RegimeViolation(std::string(who) + " needs n - p - 1 > 0, got n=" + std::to_string(dims.n) +
                                  ", p=" + std::to_string(dims.p));
        }
    };
    std::visit(Overloaded{
                   [](const MleSpec&) {},
                   [&](const EfronMorrisSpec&) { need_em_regime("Efron-Morris estimator"); },
                   [](const JamesSteinSpec&) {},
                   [](const ColumnwiseJsSpec& s) {
                       if (s.c && (!std::isfinite(*s.c) || *s.c < 0.0)) {
                           throw InvalidArgument("column-wise James-Stein constant must be finite and >= 0");
                       }
                   },
                   [&](const GeneralizedShrinkageSpec& s) {
                       if (!std::isfinite(s.c) || s.c < 0.0) {
                           throw InvalidArgument("generalized shrinkage constant must be finite and >= 0");
                       }
                       if (dims.p > dims.n) {
                           throw RegimeViolation("generalized shrinkage needs p <= n");
                       }
                   },
                   [&](const GeneralizedBayesSpec& s) {
                       validate(s.prior);
                       if (std::holds_alternative<SvsPrior>(s.prior)) {
                           need_em_regime("SVS generalized Bayes estimator");
                       }
                       if (s.is.n_samples < 100) {
                           throw InvalidArgument("importance sampling needs n_samples >= 100");
                       }
                       if (!(s.is.ess_floor > 0.0 && s.is.ess_floor <= 1.0)) {
                           throw InvalidArgument("ess_floor must lie in (0, 1]");
                       }
                   },
               },
               spec);
}

MeanMatrix mle(const Observation& x)
{
    return MeanMatrix(x.matrix());
}

MeanMatrix generalized_shrinkage(const Observation& x, double c, double rcond_min)
{
    if (!std::isfinite(c) || c < 0.0) {
        throw InvalidArgument("generalized shrinkage constant must be finite and >= 0");
    }
    if (c == 0.0) {
        return MeanMatrix(x.matrix());
    }
    const GramFactor g(x.matrix(), rcond_min);
    // X (I - c G^{-1}) = X - c X G^{-1}; G^{-1} X^T = solve(X^T)
    return MeanMatrix(x.matrix() - c * g.solve(x.matrix().transpose()).transpose());
}

MeanMatrix efron_morris(const Observation& x, double rcond_min)
{
    const ProblemDims dims = x.dims();
    if (!dims.em_regime()) {
        throw RegimeViolation("Efron-Morris estimator needs n - p - 1 > 0, got n=" + std::to_string(dims.n) +
                              ", p=" + std::to_string(dims.p));
    }
    return generalized_shrinkage(x, dims.em_constant(), rcond_min);
}

MeanMatrix james_stein(const Observation& x, std::optional<double> k)
{
    const ProblemDims dims = x.dims();
    const double kk = k.value_or(static_cast<double>(dims.n) * dims.p - 2.0);
    const double s = x.matrix().squaredNorm();
    if (s == 0.0) {
        throw SingularPoint("James-Stein estimator is undefined at X = 0");
    }
    return MeanMatrix((1.0 - kk / s) * x.matrix());
}

MeanMatrix columnwise_js(const Observation& x, std::optional<double> c)
{
    const ProblemDims dims = x.dims();
    const double cc = c.value_or((dims.n - 2.0) / dims.p);
    if (!std::isfinite(cc) || cc < 0.0) {
        throw InvalidArgument("column-wise James-Stein constant must be finite and >= 0");
    }
    Matrix out = x.matrix();
    for (Eigen::Index i = 0; i < out.cols(); ++i) {
        const double s = out.col(i).squaredNorm();
        if (s == 0.0) {
            throw ZeroColumn("column " + std::to_string(i) + " of X is zero");
        }
        out.col(i) *= 1.0 - cc / s;
    }
    return MeanMatrix(std::move(out));
}

namespace {

// log det of the symmetric p x p matrix whose lower triangle is stored
// row-major in a (a[i*p + j], j <= i), by an in-place Cholesky; -inf when it is
// not positive definite.
double chol_logdet(double* a, Eigen::Index p)
{
    double prod = 1.0;
    double logdet = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        double d = a[j * p + j];
        for (Eigen::Index k = 0; k < j; ++k) {
            d -= a[j * p + k] * a[j * p + k];
        }
        if (!(d > 0.0)) {
            return kNegInf;
        }
        const double l = std::sqrt(d);
        a[j * p + j] = l;
        prod *= d;
        if (prod > 1e150 || prod < 1e-150) {
            logdet += std::log(prod);
            prod = 1.0;
        }
        for (Eigen::Index i = j + 1; i < p; ++i) {
            double v = a[i * p + j];
            for (Eigen::Index k = 0; k < j; ++k) {
                v -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = v / l;
        }
    }
    return logdet + std::log(prod);
}

// Log prior weights of the antithetic pair X + Z, X - Z.
class PairLogWeight {
public:
    PairLogWeight(const PriorSpec& prior, const Matrix& x) : prior_(prior), x_(x)
    {
        r_ = resolve(prior, MeanMatrix(x).dims());
        if (r_.family == ResolvedPrior::Family::matrix_t) {
            xtx_ = x.transpose() * x;
            xtx_.diagonal().array() += r_.beta;
            plus_buf_.resize(static_cast<std::size_t>(x.cols() * x.cols()));
            minus_buf_.resize(plus_buf_.size());
        }
    }

    void operator()(const Matrix& z, double& plus, double& minus)
    {
        switch (r_.family) {
        case ResolvedPrior::Family::flat:
            plus = minus = 0.0;
            return;
        case ResolvedPrior::Family::matrix_t: {
            if (r_.k == 0.0) {
                plus = minus = 0.0;
                return;
            }
            // G(X +- Z) = X^T X + Z^T Z +- (X^T Z + Z^T X), lower triangles only
            const Eigen::Index n = x_.rows();
            const Eigen::Index p = x_.cols();
            const double* xd = x_.data();
            const double* zd = z.data();
            for (Eigen::Index i = 0; i < p; ++i) {
                const double* xi = xd + i * n;
                const double* zi = zd + i * n;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const double* xj = xd + j * n;
                    const double* zj = zd + j * n;
                    double cross = 0.0;
                    double zz = 0.0;
                    for (Eigen::Index a = 0; a < n; ++a) {
                        cross += xi[a] * zj[a] + xj[a] * zi[a];
                        zz += zi[a] * zj[a];
                    }
                    const double base = xtx_(i, j) + zz;
                    plus_buf_[static_cast<std::size_t>(i * p + j)] = base + cross;
                    minus_buf_[static_cast<std::size_t>(i * p + j)] = base - cross;
                }
            }
            plus = from_logdet(chol_logdet(plus_buf_.data(), p));
            minus = from_logdet(chol_logdet(minus_buf_.data(), p));
            return;
        }
        default:
            plus = log_density(prior_, MeanMatrix(x_ + z)).as_double();
            minus = log_density(prior_, MeanMatrix(x_ - z)).as_double();
            return;
        }
    }

private:
    double from_logdet(double logdet) const
    {
        if (logdet == kNegInf) {
            return r_.k > 0.0 ? std::numeric_limits<double>::infinity() : kNegInf;
        }
        return -0.5 * r_.k * logdet;
    }

    const PriorSpec& prior_;
    const Matrix& x_;
    ResolvedPrior r_;
    Matrix xtx_;
    std::vector<double> plus_buf_, minus_buf_;
};

// Sums over one chunk of antithetic pairs, all weights scaled by e^{-shift}.
// With W = w+ + w-, D = w+ - w- the pair numerator is N = W X + D Z.
struct ChunkSums {
    double shift = kNegInf;
    double sum_w = 0.0;    // individual weights
    double sum_w2 = 0.0;   // individual weights squared
    double sum_pw2 = 0.0;  // W^2
    Matrix sum_dz;         // D Z
    Matrix sum_wdz;        // W D Z
    Matrix sum_d2z2;       // D^2 Z.^2
    long pairs = 0;

    void rescale(double new_shift)
    {
        if (shift == kNegInf) {
            shift = new_shift;
            return;
        }
        const double f = std::exp(shift - new_shift);
        sum_w *= f;
        sum_dz *= f;
        sum_w2 *= f * f;
        sum_pw2 *= f * f;
        sum_wdz *= f * f;
        sum_d2z2 *= f * f;
        shift = new_shift;
    }
};

ChunkSums combine(ChunkSums a, ChunkSums b)
{
    if (a.shift == kNegInf && a.pairs == 0) {
        return b;
    }
    if (b.shift == kNegInf && b.pairs == 0) {
        return a;
    }
    const double s = std::max(a.shift, b.shift);
    if (s != kNegInf) {
        a.rescale(s);
        b.rescale(s);
    }
    a.sum_w += b.sum_w;
    a.sum_w2 += b.sum_w2;
    a.sum_pw2 += b.sum_pw2;
    a.sum_dz += b.sum_dz;
    a.sum_wdz += b.sum_wdz;
    a.sum_d2z2 += b.sum_d2z2;
    a.pairs += b.pairs;
    return a;
}

ChunkSums run_chunk(const PriorSpec& prior, const Matrix& x, const ISConfig& cfg, std::uint64_t chunk,
                    long n_pairs)
{
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    ChunkSums acc;
    acc.sum_dz = Matrix::Zero(n, p);
    acc.sum_wdz = Matrix::Zero(n, p);
    acc.sum_d2z2 = Matrix::Zero(n, p);
    acc.pairs = n_pairs;

    Rng rng(cfg.seed, 1 + chunk);
    PairLogWeight log_weight(prior, x);
    Matrix z(n, p);
    Matrix raw(n, p);
    for (long k = 0; k < n_pairs; ++k) {
        if (cfg.rotate_left || cfg.rotate_right) {
            rng.fill_normal(raw);
            z = raw;
            if (cfg.rotate_left) z = (*cfg.rotate_left) * z;
            if (cfg.rotate_right) z = z * cfg.rotate_right->transpose();
        } else {
            rng.fill_normal(z);
        }
        double lp = 0.0;
        double lm = 0.0;
        log_weight(z, lp, lm);
        if (std::isnan(lp) || std::isnan(lm) || lp == std::numeric_limits<double>::infinity() ||
            lm == std::numeric_limits<double>::infinity()) {
            throw InternalError("importance sampling drew a point where the prior density is infinite");
        }
        const double top = std::max(lp, lm);
        if (top == kNegInf) {
            continue;
        }
        if (top > acc.shift) {
            acc.rescale(top);
        }
        const double wp = std::exp(lp - acc.shift);
        const double wm = std::exp(lm - acc.shift);
        const double w = wp + wm;
        const double d = wp - wm;
        acc.sum_w += w;
        acc.sum_w2 += wp * wp + wm * wm;
        acc.sum_pw2 += w * w;
        const double wd = w * d;
        const double d2 = d * d;
        const double* zd = z.data();
        double* s1 = acc.sum_dz.data();
        double* s2 = acc.sum_wdz.data();
        double* s3 = acc.sum_d2z2.data();
        for (Eigen::Index e = 0; e < z.size(); ++e) {
            s1[e] += d * zd[e];
            s2[e] += wd * zd[e];
            s3[e] += d2 * zd[e] * zd[e];
        }
    }
    return acc;
}

void check_rotation(const ISConfig& cfg, ProblemDims dims)
{
    if (cfg.rotate_left && (cfg.rotate_left->rows() != dims.n || cfg.rotate_left->cols() != dims.n)) {
        throw DimensionMismatch("rotate_left must be n x n");
    }
    if (cfg.rotate_right && (cfg.rotate_right->rows() != dims.p || cfg.rotate_right->cols() != dims.p)) {
        throw DimensionMismatch("rotate_right must be p x p");
    }
}

PosteriorMean radial_posterior_mean(const ResolvedPrior& r, const Observation& x)
{
    const Matrix& xm = x.matrix();
    Matrix out = xm;
    if (r.family == ResolvedPrior::Family::stein_frobenius) {
        const double k = static_cast<double>(xm.size());
        out *= radial_shrinkage_factor(k, xm.squaredNorm(), r.c, r.beta);
    } else {
        const double k = static_cast<double>(xm.rows());
        for (Eigen::Index i = 0; i < xm.cols(); ++i) {
            out.col(i) *= radial_shrinkage_factor(k, xm.col(i).squaredNorm(), r.c, r.beta);
        }
    }
    BayesDiagnostics diag;
    diag.method = r.beta == 0.0 ? "radial_series" : "radial_quadrature";
    diag.std_error = Matrix::Zero(xm.rows(), xm.cols());
    return {MeanMatrix(std::move(out)), std::move(diag)};
}

}  // namespace

PosteriorMean gb_importance_sampling(const PriorSpec& prior, const Observation& x, const ISConfig& cfg)
{
    validate(prior);
    if (cfg.n_samples < 100) {
        throw InvalidArgument("importance sampling needs n_samples >= 100");
    }
    check_rotation(cfg, x.dims());
    const Matrix& xm = x.matrix();
    const long n_pairs = (cfg.n_samples + 1) / 2;
    const long n_chunks = (n_pairs + kChunkPairs - 1) / kChunkPairs;

    std::vector<ChunkSums> chunks(static_cast<std::size_t>(n_chunks));
    parallel_for(chunks.size(), cfg.workers, [&](std::size_t c) {
        const long begin = static_cast<long>(c) * kChunkPairs;
        const long count = std::min(kChunkPairs, n_pairs - begin);
        chunks[c] = run_chunk(prior, xm, cfg, c, count);
    });
    const ChunkSums total = pairwise_reduce(std::move(chunks), combine);
    if (!(total.sum_w > 0.0)) {
        throw InternalError("all importance weights vanished");
    }

    const Matrix shift = total.sum_dz / total.sum_w;  // posterior mean minus X
    Matrix mean = xm + shift;
    // delta-method variance over pairs: sum_p (N_p - W_p mean)^2 / (sum W)^2 with
    // N_p - W_p mean = D_p Z_p - W_p shift
    Matrix num = total.sum_d2z2 - 2.0 * shift.cwiseProduct(total.sum_wdz) + total.sum_pw2 * shift.cwiseAbs2();
    num = num.cwiseMax(0.0);

    BayesDiagnostics diag;
    diag.method = "importance_sampling";
    diag.n_samples = 2 * n_pairs;
    diag.ess = total.sum_w * total.sum_w / total.sum_w2;
    diag.ess_fraction = *diag.ess / static_cast<double>(diag.n_samples);
    diag.low_ess = diag.ess_fraction < cfg.ess_floor;
    diag.std_error = num.cwiseSqrt() / total.sum_w;
    return {MeanMatrix(std::move(mean)), std::move(diag)};
}

PosteriorMean gb_posterior_mean(const PriorSpec& prior, const Observation& x, const ISConfig& cfg)
{
    const ResolvedPrior r = resolve(prior, x.dims());
    const bool radial = r.family == ResolvedPrior::Family::stein_frobenius ||
                        r.family == ResolvedPrior::Family::columnwise_stein;
    if (radial && !cfg.force_importance_sampling) {
        return radial_posterior_mean(r, x);
    }
    return gb_importance_sampling(prior, x, cfg);
}

EstimateResult estimate(const EstimatorSpec& spec, const Observation& x)
{
    validate(spec, x.dims());
    return std::visit(Overloaded{
                          [&](const MleSpec&) { return EstimateResult{mle(x), std::nullopt}; },
                          [&](const EfronMorrisSpec&) { return EstimateResult{efron_morris(x), std::nullopt}; },
                          [&](const JamesSteinSpec&) { return EstimateResult{james_stein(x), std::nullopt}; },
                          [&](const ColumnwiseJsSpec& s) {
                              return EstimateResult{columnwise_js(x, s.c), std::nullopt};
                          },
                          [&](const GeneralizedShrinkageSpec& s) {
                              return EstimateResult{generalized_shrinkage(x, s.c), std::nullopt};
                          },
                          [&](const GeneralizedBayesSpec& s) {
                              PosteriorMean pm = gb_posterior_mean(s.prior, x, s.is);
                              return EstimateResult{std::move(pm.mean), std::move(pm.diagnostics)};
                          },
                      },
                      spec);
}

}  // namespace matshrink
