#include "matshrink/superharmonic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "matshrink/parallel.hpp"

namespace matshrink {

double default_fd_step(const Matrix& x)
{
    return 1e-4 * (1.0 + x.norm());
}

namespace {

double checked_eval(const ScalarFunction& f, const Matrix& y)
{
    const double v = f(y);
    if (!std::isfinite(v)) {
        throw NonFiniteEvaluation("finite-difference stencil hit a non-finite value");
    }
    return v;
}

double resolve_step(const MeanMatrix& x, std::optional<double> h)
{
    const double step = h.value_or(default_fd_step(x.matrix()));
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw InvalidArgument("finite-difference step must be positive");
    }
    return step;
}

}  // namespace

SymMatrix matrix_laplacian_fd(const ScalarFunction& f, const MeanMatrix& x, std::optional<double> h)
{
    const double step = resolve_step(x, h);
    const Matrix& x0 = x.matrix();
    const Eigen::Index n = x0.rows();
    const Eigen::Index p = x0.cols();
    const double f0 = checked_eval(f, x0);

    Matrix lap = Matrix::Zero(p, p);
    Matrix y = x0;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index i = 0; i < p; ++i) {
            y(a, i) = x0(a, i) + step;
            const double fp = checked_eval(f, y);
            y(a, i) = x0(a, i) - step;
            const double fm = checked_eval(f, y);
            y(a, i) = x0(a, i);
            lap(i, i) += (fp - 2.0 * f0 + fm) / (step * step);

            for (Eigen::Index j = i + 1; j < p; ++j) {
                double acc = 0.0;
                for (int si : {1, -1}) {
                    for (int sj : {1, -1}) {
                        y(a, i) = x0(a, i) + si * step;
                        y(a, j) = x0(a, j) + sj * step;
                        acc += si * sj * checked_eval(f, y);
                    }
                }
                y(a, i) = x0(a, i);
                y(a, j) = x0(a, j);
                const double d = acc / (4.0 * step * step);
                lap(i, j) += d;
                lap(j, i) += d;
            }
        }
    }
    return SymMatrix(lap);
}

double vectorized_laplacian_fd(const ScalarFunction& f, const MeanMatrix& x, std::optional<double> h)
{
    const double step = resolve_step(x, h);
    const Matrix& x0 = x.matrix();
    const double f0 = checked_eval(f, x0);
    // accumulate per column first so the summation order matches the trace
    Vector diag = Vector::Zero(x0.cols());
    Matrix y = x0;
    for (Eigen::Index a = 0; a < x0.rows(); ++a) {
        for (Eigen::Index i = 0; i < x0.cols(); ++i) {
            y(a, i) = x0(a, i) + step;
            const double fp = checked_eval(f, y);
            y(a, i) = x0(a, i) - step;
            const double fm = checked_eval(f, y);
            y(a, i) = x0(a, i);
            diag(i) += (fp - 2.0 * f0 + fm) / (step * step);
        }
    }
    return diag.sum();
}

SphereAverage sphere_average(const ScalarFunction& f, const MeanMatrix& x, const SpherePerturbation& pert,
                             RngState rng)
{
    if (pert.n_nodes < 2) {
        throw InvalidArgument("sphere_average: n_nodes must be >= 2");
    }
    const Matrix& x0 = x.matrix();
    if (pert.rho.size() != x0.cols()) {
        throw DimensionMismatch("sphere_average: rho has length " + std::to_string(pert.rho.size()) +
                                " but X has " + std::to_string(x0.cols()) + " columns");
    }
    SphereAverage out;
    if (pert.rho.squaredNorm() == 0.0) {
        out.estimate = f(x0);
        out.evaluations = 1;
        return out;
    }

    const int n = static_cast<int>(x0.rows());
    const int frames = std::max(2, (pert.n_nodes + n - 1) / n);
    Rng gen(rng);
    std::vector<double> frame_means;
    frame_means.reserve(static_cast<std::size_t>(frames));
    Matrix y(x0.rows(), x0.cols());
    for (int fr = 0; fr < frames; ++fr) {
        const Matrix q = random_orthogonal(n, gen);
        double sum = 0.0;
        int finite = 0;
        for (int k = 0; k < n; ++k) {
            for (double sign : {1.0, -1.0}) {
                y.noalias() = x0 + sign * q.col(k) * pert.rho.transpose();
                const double v = f(y);
                ++out.evaluations;
                if (std::isfinite(v)) {
                    sum += v;
                    ++finite;
                } else {
                    ++out.non_finite;
                }
            }
        }
        if (finite > 0) {
            frame_means.push_back(sum / finite);
        }
    }
    if (static_cast<double>(out.non_finite) > 1e-3 * static_cast<double>(out.evaluations)) {
        throw NonFiniteEvaluation("sphere_average: " + std::to_string(out.non_finite) + " of " +
                                  std::to_string(out.evaluations) + " nodes were non-finite");
    }
    const double m = static_cast<double>(frame_means.size());
    double mean = 0.0;
    for (double v : frame_means) {
        mean += v;
    }
    mean /= m;
    double ss = 0.0;
    for (double v : frame_means) {
        ss += (v - mean) * (v - mean);
    }
    out.estimate = mean;
    out.std_error = m > 1.0 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
    return out;
}

std::string verdict_name(Verdict v)
{
    switch (v) {
    case Verdict::certified_nsd:
        return "CERTIFIED_NSD";
    case Verdict::violation_found:
        return "VIOLATION_FOUND";
    case Verdict::inconclusive:
        return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

namespace {

Matrix gradient_fd(const ScalarFunction& f, const Matrix& x, double h)
{
    Matrix g(x.rows(), x.cols());
    Matrix y = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index a = 0; a < x.rows(); ++a) {
            y(a, j) = x(a, j) + h;
            const double fp = checked_eval(f, y);
            y(a, j) = x(a, j) - h;
            const double fm = checked_eval(f, y);
            y(a, j) = x(a, j);
            g(a, j) = (fp - fm) / (2.0 * h);
        }
    }
    return g;
}

// Default step shrunk to 1e-4 of the local length scale |f| / ||grad f||, so
// that points close to a singular set still get a resolved stencil. A few
// rounds because the first gradient is taken with the unshrunk step.
double local_fd_step(const ScalarFunction& f, const Matrix& x, double fx)
{
    const double base = default_fd_step(x);
    double h = base;
    for (int round = 0; round < 4; ++round) {
        const double gnorm = gradient_fd(f, x, h).norm();
        if (!(gnorm > 0.0) || fx == 0.0) {
            break;
        }
        const double next = std::min(base, 1e-4 * std::abs(fx) / gnorm);
        if (next >= 0.5 * h) {
            h = std::min(h, next);
            break;
        }
        h = next;
    }
    return h;
}

struct LaplacianEval {
    Matrix lap;
    // squared norm of grad log f in prior mode; enters the tolerance scale
    double grad_sq = 0.0;
    double fd_error = 0.0;
};

// Laplacian at step h, with ||Lap_h - Lap_2h||_F as its error estimate.
LaplacianEval laplacian_with_error(const ScalarFunction& f, const MeanMatrix& x, double h)
{
    LaplacianEval ev;
    ev.lap = matrix_laplacian_fd(f, x, h).matrix();
    ev.fd_error = (ev.lap - matrix_laplacian_fd(f, x, 2.0 * h).matrix()).norm();
    return ev;
}

struct PointSetup {
    bool skip = false;
    std::string reason;
    // f relative to its value at the point in prior mode, f itself otherwise
    ScalarFunction sphere_f;
    double f_ref = 0.0;
    std::function<LaplacianEval()> laplacian;
};

struct TaskResult {
    bool skipped = false;
    std::string skip_reason;
    std::optional<LaplacianResult> laplacian;
    std::string laplacian_skip;
    bool sphere_ran = false;
    bool sphere_failed = false;
    std::string sphere_failure;
    long non_finite = 0;
    std::optional<SphereViolation> violation;
};

SuperharmonicReport run_certify(const std::vector<MeanMatrix>& points,
                                const std::vector<SpherePerturbation>& perturbations, const CertifyOptions& options,
                                RngState rng, bool closed_form,
                                const std::function<PointSetup(const MeanMatrix&)>& setup)
{
    if (points.empty()) {
        throw InvalidArgument("certify: need at least one test point");
    }
    const std::size_t n_perts = perturbations.size();
    const std::size_t per_point = std::max<std::size_t>(1, n_perts);
    const double lap_tol = closed_form ? options.tol : options.fd_tol;
    std::vector<TaskResult> results(points.size() * per_point);

    parallel_for(results.size(), options.workers, [&](std::size_t task) {
        const std::size_t i = task / per_point;
        const std::size_t j = task % per_point;
        TaskResult& r = results[task];
        const PointSetup s = setup(points[i]);
        if (s.skip) {
            r.skipped = true;
            r.skip_reason = s.reason;
            return;
        }
        if (j == 0) {
            try {
                const LaplacianEval ev = s.laplacian();
                const SymMatrix lap(ev.lap);
                const Vector eig = sym_eigenvalues(lap);
                LaplacianResult lr;
                lr.point_index = i;
                lr.max_eigenvalue = eig(0);
                lr.scale = 1.0 + lap.matrix().norm() + ev.grad_sq;
                lr.fd_error = ev.fd_error;
                lr.violation = lr.max_eigenvalue > lap_tol * lr.scale + lr.fd_error;
                r.laplacian = lr;
            } catch (const SingularPoint& e) {
                r.laplacian_skip = e.what();
            } catch (const NonFiniteEvaluation& e) {
                r.laplacian_skip = e.what();
            }
        }
        if (n_perts == 0) {
            return;
        }
        const SpherePerturbation& pert = perturbations[j];
        try {
            const SphereAverage avg =
                sphere_average(s.sphere_f, points[i], pert, RngState{rng.seed, (rng.stream << 32) ^ task});
            r.sphere_ran = true;
            r.non_finite = avg.non_finite;
            const double excess = avg.estimate - s.f_ref;
            const double threshold =
                options.sphere_z * avg.std_error + options.sphere_floor * std::max(1.0, std::abs(s.f_ref));
            if (excess > threshold) {
                SphereViolation v;
                v.point_index = i;
                v.perturbation_index = j;
                v.x = points[i].matrix();
                v.rho = pert.rho;
                v.l_estimate = avg.estimate;
                v.f_value = s.f_ref;
                v.std_error = avg.std_error;
                r.violation = v;
            }
        } catch (const NonFiniteEvaluation& e) {
            r.sphere_failed = true;
            r.sphere_failure = e.what();
        }
    });

    SuperharmonicReport report;
    report.laplacian_method = closed_form ? "closed_form" : "finite_difference";
    report.assumptions.push_back(
        "lower semicontinuity of f is assumed, not checked; the verdict is a sampled certificate, not a proof");
    report.max_laplacian_eigenvalue = -std::numeric_limits<double>::infinity();
    bool any_violation = false;
    bool sphere_trouble = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const TaskResult& head = results[i * per_point];
        if (head.skipped) {
            report.skipped.push_back({i, head.skip_reason});
            continue;
        }
        ++report.points_tested;
        if (head.laplacian) {
            const LaplacianResult& lr = *head.laplacian;
            report.laplacian_results.push_back(lr);
            const double rel = lr.max_eigenvalue / lr.scale;
            if (rel > report.max_laplacian_eigenvalue) {
                report.max_laplacian_eigenvalue = rel;
                report.worst_point = points[i].matrix();
            }
            any_violation = any_violation || lr.violation;
        } else {
            report.skipped.push_back({i, "laplacian: " + head.laplacian_skip});
        }
        for (std::size_t j = 0; j < n_perts; ++j) {
            const TaskResult& r = results[i * per_point + j];
            if (r.sphere_ran) {
                ++report.sphere_tests;
                report.non_finite_nodes += r.non_finite;
            }
            if (r.sphere_failed) {
                sphere_trouble = true;
                report.skipped.push_back({i, "sphere " + std::to_string(j) + ": " + r.sphere_failure});
            }
            if (r.violation) {
                report.sphere_violations.push_back(*r.violation);
                any_violation = true;
            }
        }
    }
    if (report.laplacian_results.empty()) {
        report.max_laplacian_eigenvalue = 0.0;
    }
    if (any_violation) {
        report.verdict = Verdict::violation_found;
    } else if (report.points_tested == 0 || sphere_trouble) {
        report.verdict = Verdict::inconclusive;
    } else {
        report.verdict = Verdict::certified_nsd;
    }
    return report;
}

}  // namespace

SuperharmonicReport certify(const PriorSpec& prior, const std::vector<MeanMatrix>& test_points,
                            const std::vector<SpherePerturbation>& perturbations, const CertifyOptions& options,
                            RngState rng)
{
    validate(prior);
    const bool closed = options.use_closed_form;
    auto setup = [&](const MeanMatrix& x) {
        PointSetup s;
        const ExtendedLogDensity lx = log_density(prior, x);
        if (!lx.is_finite()) {
            s.skip = true;
            s.reason = lx.kind() == ExtendedLogDensity::Kind::pos_infinity ? "density is +inf at this point"
                                                                           : "density is 0 at this point";
            return s;
        }
        const double l0 = lx.value();
        s.f_ref = 1.0;
        s.sphere_f = [&prior, l0](const Matrix& y) {
            return std::exp(log_density(prior, MeanMatrix(y)).as_double() - l0);
        };
        if (closed) {
            s.laplacian = [&prior, x] {
                return LaplacianEval{laplacian_over_density(prior, x).matrix(),
                                     grad_log_density(prior, x).matrix().squaredNorm()};
            };
        } else {
            s.laplacian = [f = s.sphere_f, x, h = options.fd_step] {
                const double step = h ? *h : local_fd_step(f, x.matrix(), 1.0);
                LaplacianEval ev = laplacian_with_error(f, x, step);
                ev.grad_sq = gradient_fd(f, x.matrix(), step).squaredNorm();
                return ev;
            };
        }
        return s;
    };
    return run_certify(test_points, perturbations, options, rng, closed, setup);
}

SuperharmonicReport certify(const ScalarFunction& f, const std::vector<MeanMatrix>& test_points,
                            const std::vector<SpherePerturbation>& perturbations, const CertifyOptions& options,
                            RngState rng)
{
    auto setup = [&](const MeanMatrix& x) {
        PointSetup s;
        const double fx = f(x.matrix());
        if (!std::isfinite(fx)) {
            s.skip = true;
            s.reason = "f is not finite at this point";
            return s;
        }
        s.f_ref = fx;
        s.sphere_f = f;
        s.laplacian = [&f, x, fx, h = options.fd_step] {
            const double step = h ? *h : local_fd_step(f, x.matrix(), fx);
            return laplacian_with_error(f, x, step);
        };
        return s;
    };
    return run_certify(test_points, perturbations, options, rng, false, setup);
}

std::vector<MeanMatrix> default_test_points(ProblemDims dims, RngState rng, int per_scale)
{
    Rng gen(rng);
    const int n = dims.n;
    const int p = dims.p;
    std::vector<MeanMatrix> pts;
    for (double scale : {0.1, 1.0, 10.0}) {
        for (int k = 0; k < per_scale; ++k) {
            Matrix m(n, p);
            gen.fill_normal(m);
            pts.emplace_back(scale * m);
        }
    }
    {
        Matrix u(n, 1), v(p, 1);
        gen.fill_normal(u);
        gen.fill_normal(v);
        pts.emplace_back(u * v.transpose());
    }
    if (p >= 2) {
        Matrix a(n, p - 1), b(p - 1, p);
        gen.fill_normal(a);
        gen.fill_normal(b);
        pts.emplace_back(a * b);
    }
    if (p <= n) {
        for (double scale : {1.0, 5.0}) {
            const Matrix u = random_orthogonal(n, gen).leftCols(p);
            const Matrix v = random_orthogonal(p, gen);
            Vector sigma = Vector::Constant(p, scale);
            sigma(p - 1) = 1e-3;
            pts.emplace_back(u * sigma.asDiagonal() * v.transpose());
        }
    }
    Matrix first_col = Matrix::Zero(n, p);
    first_col.col(0).setOnes();
    pts.emplace_back(first_col);
    pts.emplace_back(Matrix::Ones(n, p));
    return pts;
}

std::vector<SpherePerturbation> default_perturbations(int p, RngState rng, int n_nodes)
{
    Rng gen(rng, 1);
    std::vector<SpherePerturbation> out;
    Vector e1 = Vector::Zero(p);
    e1(0) = 1.0;
    out.push_back({e1, n_nodes});
    out.push_back({Vector::Ones(p), n_nodes});
    Vector r(p);
    for (int i = 0; i < p; ++i) {
        r(i) = gen.normal();
    }
    out.push_back({r / r.norm(), n_nodes});
    for (int i = 0; i < p; ++i) {
        r(i) = gen.normal();
    }
    out.push_back({3.0 * r / r.norm(), n_nodes});
    return out;
}

}  // namespace matshrink
