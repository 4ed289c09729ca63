#include "matshrink/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "matshrink/parallel.hpp"

namespace matshrink {

namespace {

struct BatchPlan {
    long n_batches;
    long n_reps;
    long begin(long b) const { return static_cast<long>((static_cast<long long>(b) * n_reps) / n_batches); }
    long end(long b) const { return begin(b + 1); }
};

BatchPlan plan_batches(long n_reps)
{
    if (n_reps < 2) {
        throw InvalidArgument("n_reps must be >= 2, got " + std::to_string(n_reps));
    }
    const long b = std::max(2L, static_cast<long>(std::floor(std::sqrt(static_cast<double>(n_reps)))));
    return {b, n_reps};
}

Observation draw_replicate(const MeanMatrix& m, RngState rng, long r)
{
    Rng gen(RngState{rng.seed, static_cast<std::uint64_t>(r)}, 0);
    return sample_matrix_normal(m, gen);
}

// Bayes specs get an importance-sampling stream per replicate.
EstimatorSpec spec_for_replicate(const EstimatorSpec& spec, long r)
{
    EstimatorSpec out = spec;
    if (auto* gb = std::get_if<GeneralizedBayesSpec>(&out)) {
        gb->is.seed = RngState{gb->is.seed.seed, static_cast<std::uint64_t>(r)};
        gb->is.workers = 1;
    }
    return out;
}

Matrix fill_upper(Matrix lower)
{
    lower.triangularView<Eigen::StrictlyUpper>() = lower.transpose();
    return lower;
}

double sample_sd(const std::vector<double>& v)
{
    const double m = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= m;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / (m - 1.0));
}

struct SpecBatch {
    Matrix loss_sum;  // lower triangle
    double min_ess = std::numeric_limits<double>::infinity();
    long low_ess = 0;
    bool bayes_is = false;
};

}  // namespace

std::vector<RiskReport> mc_risk_multi(const std::vector<EstimatorSpec>& specs, const MeanMatrix& m, long n_reps,
                                      RngState rng, int workers)
{
    if (specs.empty()) {
        throw InvalidArgument("mc_risk: no estimators given");
    }
    const ProblemDims dims = m.dims();
    for (const auto& s : specs) {
        validate(s, dims);
    }
    const BatchPlan plan = plan_batches(n_reps);
    const Eigen::Index p = dims.p;
    const std::size_t n_specs = specs.size();

    std::vector<std::vector<SpecBatch>> batches(static_cast<std::size_t>(plan.n_batches));
    parallel_for(batches.size(), workers, [&](std::size_t b) {
        std::vector<SpecBatch> acc(n_specs);
        for (auto& a : acc) {
            a.loss_sum = Matrix::Zero(p, p);
        }
        Matrix err(dims.n, p);
        for (long r = plan.begin(static_cast<long>(b)); r < plan.end(static_cast<long>(b)); ++r) {
            const Observation x = draw_replicate(m, rng, r);
            for (std::size_t s = 0; s < n_specs; ++s) {
                const EstimateResult est = is_bayes(specs[s]) ? estimate(spec_for_replicate(specs[s], r), x)
                                                              : estimate(specs[s], x);
                err.noalias() = est.estimate.matrix() - m.matrix();
                acc[s].loss_sum.selfadjointView<Eigen::Lower>().rankUpdate(err.transpose());
                if (est.diagnostics && est.diagnostics->ess) {
                    acc[s].bayes_is = true;
                    acc[s].min_ess = std::min(acc[s].min_ess, est.diagnostics->ess_fraction);
                    if (est.diagnostics->low_ess) {
                        ++acc[s].low_ess;
                    }
                }
            }
        }
        batches[b] = std::move(acc);
    });

    std::vector<RiskReport> reports;
    reports.reserve(n_specs);
    for (std::size_t s = 0; s < n_specs; ++s) {
        std::vector<Matrix> sums;
        std::vector<std::vector<double>> batch_eigs(static_cast<std::size_t>(p));
        std::vector<double> batch_traces;
        RiskReport rep;
        for (long b = 0; b < plan.n_batches; ++b) {
            const SpecBatch& sb = batches[static_cast<std::size_t>(b)][s];
            const Matrix full = fill_upper(sb.loss_sum);
            sums.push_back(full);
            const double count = static_cast<double>(plan.end(b) - plan.begin(b));
            const SymMatrix batch_mean(full / count);
            const Vector eig = sym_eigenvalues(batch_mean);
            for (Eigen::Index i = 0; i < p; ++i) {
                batch_eigs[static_cast<std::size_t>(i)].push_back(eig(i));
            }
            batch_traces.push_back(batch_mean.matrix().trace());
            if (sb.bayes_is) {
                rep.min_ess_fraction = std::min(rep.min_ess_fraction.value_or(sb.min_ess), sb.min_ess);
            }
            rep.low_ess_count += sb.low_ess;
        }
        const Matrix total = pairwise_reduce(std::move(sums), [](Matrix a, Matrix b) { return Matrix(a + b); });
        rep.mean_risk = SymMatrix(total / static_cast<double>(n_reps));
        rep.eigenvalues = sym_eigenvalues(rep.mean_risk);
        rep.eig_std_errors.resize(p);
        const double root_b = std::sqrt(static_cast<double>(plan.n_batches));
        for (Eigen::Index i = 0; i < p; ++i) {
            rep.eig_std_errors(i) = sample_sd(batch_eigs[static_cast<std::size_t>(i)]) / root_b;
        }
        rep.frobenius_risk = rep.mean_risk.matrix().trace();
        rep.frobenius_se = sample_sd(batch_traces) / root_b;
        rep.n_reps = n_reps;
        rep.n_batches = plan.n_batches;
        rep.seed = rng;
        rep.estimator = estimator_label(specs[s]);
        reports.push_back(std::move(rep));
    }
    return reports;
}

RiskReport mc_risk(const EstimatorSpec& spec, const MeanMatrix& m, long n_reps, RngState rng, int workers)
{
    return std::move(mc_risk_multi({spec}, m, n_reps, rng, workers).front());
}

Matrix matrix_divergence_fd(const MatrixFunction& g, const Observation& x, std::optional<double> h)
{
    const Matrix& x0 = x.matrix();
    const double step = h.value_or(1e-4 * (1.0 + x0.norm()));
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw InvalidArgument("finite-difference step must be positive");
    }
    const Eigen::Index n = x0.rows();
    const Eigen::Index p = x0.cols();
    Matrix div = Matrix::Zero(p, p);
    Matrix y = x0;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index i = 0; i < p; ++i) {
            y(a, i) = x0(a, i) + step;
            const Matrix gp = g(y);
            y(a, i) = x0(a, i) - step;
            const Matrix gm = g(y);
            y(a, i) = x0(a, i);
            if (gp.rows() != n || gp.cols() != p || gm.rows() != n || gm.cols() != p) {
                throw DimensionMismatch("matrix_divergence_fd: g must return an n x p matrix");
            }
            if (!gp.allFinite() || !gm.allFinite()) {
                throw NonFiniteEvaluation("matrix_divergence_fd: g is not finite near X");
            }
            div.row(i) += (gp.row(a) - gm.row(a)) / (2.0 * step);
        }
    }
    return div;
}

std::string divergence_method_name(DivergenceMethod m)
{
    return m == DivergenceMethod::closed_form ? "closed_form" : "finite_difference";
}

SureReport sure(const EstimatorSpec& spec, const Observation& x, bool force_fd)
{
    if (is_bayes(spec)) {
        throw Unsupported("SURE is not available for generalized Bayes estimators");
    }
    const ProblemDims dims = x.dims();
    validate(spec, dims);
    const Matrix& xm = x.matrix();
    const double n = dims.n;
    const double p = dims.p;

    if (force_fd) {
        auto g = [&spec](const Matrix& y) {
            return Matrix(estimate(spec, Observation(y)).estimate.matrix() - y);
        };
        const Matrix div = matrix_divergence_fd(g, x);
        const Matrix gx = g(xm);
        Matrix s = div + div.transpose() + gx.transpose() * gx;
        s.diagonal().array() += n;
        return {SymMatrix(s), DivergenceMethod::finite_difference};
    }

    Matrix s = Matrix::Identity(dims.p, dims.p) * n;
    auto shrink_through_gram = [&](double c) {
        // g = -c X G^{-1}: div g = -c (n - p - 1) G^{-1}, g^T g = c^2 G^{-1}
        const GramFactor gf(xm);
        s += (c * c - 2.0 * c * (n - p - 1.0)) * gf.inverse();
    };
    if (std::holds_alternative<MleSpec>(spec)) {
        // g = 0
    } else if (std::holds_alternative<EfronMorrisSpec>(spec)) {
        shrink_through_gram(n - p - 1.0);
    } else if (const auto* gs = std::get_if<GeneralizedShrinkageSpec>(&spec)) {
        if (gs->c != 0.0) {
            shrink_through_gram(gs->c);
        }
    } else if (std::holds_alternative<JamesSteinSpec>(spec)) {
        // g = -k X / s: div g = -k (n/s I - 2 G/s^2), g^T g = k^2 G / s^2
        const double k = n * p - 2.0;
        const double sq = xm.squaredNorm();
        if (sq == 0.0) {
            throw SingularPoint("James-Stein estimator is undefined at X = 0");
        }
        const Matrix gram = xm.transpose() * xm;
        s.diagonal().array() -= 2.0 * k * n / sq;
        s += (4.0 * k + k * k) / (sq * sq) * gram;
    } else if (const auto* cj = std::get_if<ColumnwiseJsSpec>(&spec)) {
        // g_i = -c X_i / s_i: div g = -c (n - 2) diag(1/s_i), (g^T g)_ij = c^2 X_i^T X_j / (s_i s_j)
        const double c = cj->c.value_or((n - 2.0) / p);
        const Vector sq = xm.colwise().squaredNorm().transpose();
        if ((sq.array() == 0.0).any()) {
            throw ZeroColumn("a column of X is zero");
        }
        const Vector inv = sq.cwiseInverse();
        s.diagonal() -= 2.0 * c * (n - 2.0) * inv;
        s += c * c * (inv.asDiagonal() * (xm.transpose() * xm) * inv.asDiagonal());
    } else {
        throw Unsupported("no closed-form divergence for estimator " + estimator_label(spec));
    }
    return {SymMatrix(s), DivergenceMethod::closed_form};
}

namespace {

struct SureBatch {
    Matrix sure_sum, loss_sum, d_sum, d2_sum;
};

}  // namespace

SureCheckReport sure_unbiasedness_check(const EstimatorSpec& spec, const MeanMatrix& m, long n_reps, RngState rng,
                                        int workers)
{
    if (is_bayes(spec)) {
        throw Unsupported("SURE is not available for generalized Bayes estimators");
    }
    const ProblemDims dims = m.dims();
    validate(spec, dims);
    const BatchPlan plan = plan_batches(n_reps);
    const Eigen::Index p = dims.p;

    std::vector<SureBatch> batches(static_cast<std::size_t>(plan.n_batches));
    DivergenceMethod method = DivergenceMethod::closed_form;
    parallel_for(batches.size(), workers, [&](std::size_t b) {
        SureBatch acc{Matrix::Zero(p, p), Matrix::Zero(p, p), Matrix::Zero(p, p), Matrix::Zero(p, p)};
        for (long r = plan.begin(static_cast<long>(b)); r < plan.end(static_cast<long>(b)); ++r) {
            const Observation x = draw_replicate(m, rng, r);
            const Matrix err = estimate(spec, x).estimate.matrix() - m.matrix();
            const Matrix loss = err.transpose() * err;
            const Matrix s = sure(spec, x).estimate.matrix();
            const Matrix d = s - loss;
            acc.sure_sum += s;
            acc.loss_sum += loss;
            acc.d_sum += d;
            acc.d2_sum += d.cwiseAbs2();
        }
        batches[b] = std::move(acc);
    });

    auto add = [](SureBatch a, SureBatch b) {
        a.sure_sum += b.sure_sum;
        a.loss_sum += b.loss_sum;
        a.d_sum += b.d_sum;
        a.d2_sum += b.d2_sum;
        return a;
    };
    const SureBatch total = pairwise_reduce(std::move(batches), add);
    const double nr = static_cast<double>(n_reps);

    SureCheckReport rep;
    rep.n_reps = n_reps;
    rep.divergence_method = method;
    rep.mean_sure = SymMatrix(total.sure_sum / nr);
    rep.mean_risk = SymMatrix(total.loss_sum / nr);
    rep.discrepancy = total.d_sum / nr;
    const Matrix var = ((total.d2_sum - nr * rep.discrepancy.cwiseAbs2()) / (nr - 1.0)).cwiseMax(0.0);
    rep.std_error = (var / nr).cwiseSqrt();
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double d = std::abs(rep.discrepancy(i, j));
            const double se = rep.std_error(i, j);
            if (d > rep.max_abs_discrepancy) {
                rep.max_abs_discrepancy = d;
                rep.se_at_max = se;
            }
            const double z = se > 0.0 ? d / se : (d > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            rep.max_z = std::max(rep.max_z, z);
        }
    }
    return rep;
}

SymMatrix em_exact_risk_at_zero(ProblemDims dims)
{
    if (!dims.em_regime()) {
        throw RegimeViolation("exact Efron-Morris risk needs n - p - 1 > 0");
    }
    return SymMatrix::identity(dims.p, dims.p + 1.0);
}

double frobenius_reduction_bound(ProblemDims dims, int r)
{
    if (r < 0 || r > dims.p) {
        throw InvalidArgument("rank r must satisfy 0 <= r <= p");
    }
    const double n = dims.n;
    const double p = dims.p;
    return n * p * (1.0 - r / p) * (1.0 - p / n);
}

std::vector<SweepRow> minimaxity_sweep(const EstimatorSpec& spec, ProblemDims dims,
                                       const std::vector<SingularSpectrum>& spectra, long n_reps, RngState rng,
                                       int workers)
{
    if (spectra.empty()) {
        throw InvalidArgument("minimaxity_sweep: no spectra given");
    }
    std::vector<SweepRow> rows;
    rows.reserve(spectra.size());
    for (const auto& sigma : spectra) {
        const MeanMatrix m = embed_spectrum(dims, sigma);
        SweepRow row{sigma, mc_risk(spec, m, n_reps, rng, workers), false};
        row.minimax_pass = row.report.eigenvalues(0) <= dims.n + 4.0 * row.report.eig_std_errors(0);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_risk_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool with_minimax)
{
    if (rows.empty()) {
        throw InvalidArgument("write_risk_csv: no rows");
    }
    const int p = static_cast<int>(rows.front().report.eigenvalues.size());
    for (int i = 1; i <= p; ++i) out << "sigma_" << i << ',';
    for (int i = 1; i <= p; ++i) out << "lambda_" << i << ',';
    for (int i = 1; i <= p; ++i) out << "se_" << i << ',';
    out << "frobenius,n_reps,seed";
    if (with_minimax) out << ",minimax_pass";
    out << '\n';
    for (const auto& row : rows) {
        if (row.sigma.size() != p || row.report.eigenvalues.size() != p) {
            throw DimensionMismatch("write_risk_csv: rows disagree on p");
        }
        for (int i = 0; i < p; ++i) out << fmt(row.sigma[i]) << ',';
        for (int i = 0; i < p; ++i) out << fmt(row.report.eigenvalues(i)) << ',';
        for (int i = 0; i < p; ++i) out << fmt(row.report.eig_std_errors(i)) << ',';
        out << fmt(row.report.frobenius_risk) << ',' << row.report.n_reps << ',' << row.report.seed.seed;
        if (with_minimax) out << ',' << (row.minimax_pass ? 1 : 0);
        out << '\n';
    }
}

std::size_t CsvTable::index_of(const std::string& column) const
{
    const auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) {
        throw ParseError("missing CSV column '" + column + "'");
    }
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> CsvTable::column(const std::string& name) const
{
    const std::size_t k = index_of(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
}

CsvTable read_risk_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty CSV");
    }
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            t.columns.push_back(cell);
        }
    }
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
            }
        }
        if (row.size() != t.columns.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.columns.size()) +
                             " fields, got " + std::to_string(row.size()));
        }
        t.rows.push_back(std::move(row));
    }
    int p = 0;
    while (std::find(t.columns.begin(), t.columns.end(), "sigma_" + std::to_string(p + 1)) != t.columns.end()) {
        ++p;
    }
    if (p == 0) {
        throw ParseError("missing CSV column 'sigma_1'");
    }
    for (int i = 1; i <= p; ++i) {
        t.index_of("lambda_" + std::to_string(i));
        t.index_of("se_" + std::to_string(i));
    }
    t.index_of("frobenius");
    t.index_of("n_reps");
    t.index_of("seed");
    return t;
}

}  // namespace matshrink
