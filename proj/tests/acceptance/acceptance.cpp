// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Monte Carlo sizes and seeds are fixed; see README for expected runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "matshrink/estimators.hpp"
#include "matshrink/experiments.hpp"
#include "matshrink/priors.hpp"
#include "matshrink/risk.hpp"
#include "matshrink/superharmonic.hpp"
#include "support/oracles.hpp"

using namespace matshrink;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += "[FAIL] ";
        }
        detail += what + "; ";
    }
};

std::string sci(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::string fmt(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string vec(const Vector& v, int digits = 4)
{
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i), digits);
    return s + ")";
}

int workers()
{
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

MeanMatrix spectrum(ProblemDims d, std::vector<double> head)
{
    head.resize(static_cast<std::size_t>(d.p), 0.0);
    return embed_spectrum(d, SingularSpectrum(head));
}

// Well-conditioned random X: U diag(s) V^T with s in [1, 3].
Matrix well_conditioned(int n, int p, std::mt19937_64& gen)
{
    std::uniform_real_distribution<double> unif(1.0, 3.0);
    const Matrix u = oracle::orthogonal(n, gen).leftCols(p);
    const Matrix v = oracle::orthogonal(p, gen);
    Vector s(p);
    for (int i = 0; i < p; ++i) s(i) = unif(gen);
    return u * s.asDiagonal() * v.transpose();
}

Outcome exact_risk()
{
    Outcome o;
    const RiskReport r = mc_risk(EfronMorrisSpec{}, MeanMatrix::zeros({5, 3}), 100000, RngState{20240501, 0}, workers());
    bool ok = true;
    for (int i = 0; i < 3; ++i) ok = ok && std::abs(r.eigenvalues(i) - 4.0) <= 0.1;
    o.require(ok, "EM at O, n=5 p=3: eigenvalues " + vec(r.eigenvalues) + " vs 4 +- 0.1, batch SE " +
                      vec(r.eig_std_errors));
    return o;
}

Outcome mle_constant()
{
    Outcome o;
    const ProblemDims d{5, 3};
    for (const auto& head : {std::vector<double>{0, 0, 0}, {10, 0, 0}, {10, 5, 1}}) {
        const RiskReport r = mc_risk(MleSpec{}, spectrum(d, head), 100000, RngState{20240502, 0}, workers());
        bool ok = true;
        for (int i = 0; i < 3; ++i) ok = ok && std::abs(r.eigenvalues(i) - 5.0) <= 0.1;
        o.require(ok, "sigma " + vec(Eigen::Map<const Vector>(head.data(), 3), 0) + ": " + vec(r.eigenvalues));
    }
    return o;
}

Outcome sure_closed_form()
{
    Outcome o;
    std::mt19937_64 gen(20240503);
    const int n = 5, p = 3;
    const double c = n - p - 1.0;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Matrix x = well_conditioned(n, p, gen);
        const Matrix ginv = (x.transpose() * x).inverse();
        const Matrix div = matrix_divergence_fd(
            [&](const Matrix& y) { return Matrix(-c * y * (y.transpose() * y).inverse()); }, Observation(x));
        worst = std::max(worst, oracle::rel_err(div, -c * c * ginv));
    }
    o.require(worst <= 1e-5, "max relative error " + sci(worst) + " over 20 points (tol 1e-5)");
    return o;
}

Outcome sure_unbiased()
{
    Outcome o;
    const MeanMatrix m = spectrum({5, 3}, {5, 2, 0});
    for (const EstimatorSpec& spec : {EstimatorSpec{EfronMorrisSpec{}}, EstimatorSpec{JamesSteinSpec{}},
                                      EstimatorSpec{ColumnwiseJsSpec{}}}) {
        const SureCheckReport r = sure_unbiasedness_check(spec, m, 100000, RngState{20240504, 0}, workers());
        o.require(r.within(4.0), estimator_label(spec) + ": max |SURE - L| " + fmt(r.max_abs_discrepancy) +
                                     " at SE " + fmt(r.se_at_max) + ", max z " + fmt(r.max_z, 2));
    }
    return o;
}

Outcome laplacian_closed_form()
{
    Outcome o;
    std::mt19937_64 gen(20240505);
    const int n = 5, p = 3;
    std::vector<PriorSpec> priors;
    for (double beta : {0.5, 1.0, 5.0})
        for (double alpha : {-n - p + 1.0, -2.0 * p}) priors.push_back(MatrixTPrior{alpha, beta});
    priors.push_back(SteinFrobeniusPrior{});
    priors.push_back(ColumnwiseSteinPrior{});
    double worst = 0.0;
    for (const PriorSpec& prior : priors) {
        auto dens = [&](const Matrix& y) { return std::exp(log_density(prior, MeanMatrix(y)).value()); };
        for (int t = 0; t < 50; ++t) {
            const MeanMatrix x(oracle::gaussian(n, p, gen));
            const Matrix closed = matrix_laplacian_closed(prior, x).matrix();
            const Matrix fd = matrix_laplacian_fd(dens, x).matrix();
            worst = std::max(worst, oracle::rel_err(fd, closed));
        }
    }
    o.require(worst <= 1e-4, "max relative error " + sci(worst) + " over " +
                                 std::to_string(priors.size()) + " priors x 50 points (tol 1e-4)");
    return o;
}

Outcome nsd_certification()
{
    Outcome o;
    const std::uint64_t seed = 20240506;
    for (auto [n, p] : {std::pair{5, 3}, std::pair{10, 4}}) {
        const ProblemDims d{n, p};
        const auto pts = default_test_points(d, RngState{seed, 1});
        const auto perts = default_perturbations(p, RngState{seed, 2});
        std::vector<std::pair<std::string, PriorSpec>> cases = {{"svs", SvsPrior{}}};
        for (double alpha : {-n - p + 1.0, -2.0 * p})
            for (double beta : {0.0, 10.0})
                cases.push_back({"matrix_t(" + fmt(alpha, 0) + "," + fmt(beta, 0) + ")", MatrixTPrior{alpha, beta}});
        for (const auto& [name, prior] : cases) {
            CertifyOptions opt;
            opt.workers = workers();
            const auto rep = certify(prior, pts, perts, opt, RngState{seed, 3});
            o.require(rep.verdict == Verdict::certified_nsd,
                      name + " n=" + std::to_string(n) + " p=" + std::to_string(p) + ": " + verdict_name(rep.verdict));
        }

        Matrix first = Matrix::Zero(n, p);
        first.col(0).setOnes();
        CertifyOptions opt;
        opt.workers = workers();
        const auto stein = certify(SteinFrobeniusPrior{}, {MeanMatrix(first)}, perts, opt, RngState{seed, 4});
        o.require(stein.verdict == Verdict::violation_found,
                  "stein c=np-2 at first-column-ones, n=" + std::to_string(n) + ": " + verdict_name(stein.verdict));
        const auto col = certify(ColumnwiseSteinPrior{(n - 2.0) / p + 0.5, 0.0}, {MeanMatrix(Matrix::Ones(n, p))},
                                 perts, opt, RngState{seed, 5});
        o.require(col.verdict == Verdict::violation_found,
                  "columnwise c=(n-2)/p+0.5 at all-ones, n=" + std::to_string(n) + ": " + verdict_name(col.verdict));
    }
    return o;
}

const Panel& panel_named(const std::vector<Panel>& panels, const std::string& name)
{
    for (const auto& p : panels)
        if (p.name == name) return p;
    throw InternalError("no panel " + name);
}

Outcome figure1()
{
    Outcome o;
    FigureOverrides ov;
    ov.seed = 20240507;
    const auto panels = figure_panels("fig1", ov);
    const Panel& svs = panel_named(panels, "fig1_svs");
    const Panel& stein = panel_named(panels, "fig1_stein");
    const ProblemDims d{5, 3};
    const long reps = 100000;

    auto check = [&](const Panel& panel, std::vector<double> head, const Vector& target, double tol, int count) {
        const RiskReport r = mc_risk(panel.spec, spectrum(d, head), reps, RngState{ov.seed, 0}, workers());
        bool ok = true;
        for (int i = 0; i < count; ++i) ok = ok && std::abs(r.eigenvalues(i) - target(i)) <= tol;
        o.require(ok, panel.name + " at " + vec(Eigen::Map<const Vector>(head.data(), 3), 0) + ": " +
                          vec(r.eigenvalues) + " SE " + vec(r.eig_std_errors) + " vs " + vec(target, 3) +
                          " +- " + fmt(tol, 1));
    };
    check(svs, {10, 0, 0}, Vector::Map(std::vector<double>{4.996, 4.019, 4.005}.data(), 3), 0.2, 3);
    check(svs, {10, 10, 0}, Vector::Map(std::vector<double>{4.993, 4.968, 4.013}.data(), 3), 0.2, 3);
    check(stein, {10, 0, 0}, Vector::Constant(1, 5.665), 0.3, 1);
    return o;
}

Outcome figure2()
{
    Outcome o;
    FigureOverrides ov;
    ov.seed = 20240508;
    const Panel stein = panel_named(figure_panels("fig2", ov), "fig2_stein");
    const ProblemDims d{5, 3};
    const RiskReport w = mc_risk(stein.spec, spectrum(d, {5, 0, 0}), 100000, RngState{ov.seed, 0}, workers());
    o.require(w.eigenvalues(0) - 5.0 > 4.0 * w.eig_std_errors(0),
              "lambda_1 at (5,0,0) = " + fmt(w.eigenvalues(0)) + " exceeds 5 by " +
                  fmt((w.eigenvalues(0) - 5.0) / w.eig_std_errors(0), 1) + " SE");
    o.require(std::abs(w.eigenvalues(0) - 5.757) <= 0.3, "vs 5.757 +- 0.3");
    const RiskReport z = mc_risk(stein.spec, spectrum(d, {0, 0, 0}), 100000, RngState{ov.seed, 0}, workers());
    bool ok = true;
    for (int i = 0; i < 3; ++i) ok = ok && std::abs(z.eigenvalues(i) - 0.67) <= 0.15;
    o.require(ok, "at (0,0,0): " + vec(z.eigenvalues) + " vs 0.67 +- 0.15");
    return o;
}

Outcome figure4()
{
    Outcome o;
    FigureOverrides ov;
    ov.seed = 20240509;
    ov.panel_filter = "fig4_n100_";
    const long reps = 10000;
    long worst_point = 0;
    double worst_z = -INFINITY;
    std::string worst_name;
    for (const Panel& panel : figure_panels("fig4", ov)) {
        const auto rows = minimaxity_sweep(panel.spec, panel.dims, panel.grid, reps, RngState{ov.seed, 0}, workers());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i].report;
            const double z = (r.eigenvalues(0) - panel.dims.n) / r.eig_std_errors(0);
            if (z > worst_z) {
                worst_z = z;
                worst_point = static_cast<long>(i);
                worst_name = panel.name;
            }
            if (!rows[i].minimax_pass) {
                o.require(false, panel.name + " sigma_1=" + fmt(rows[i].sigma.values()[0], 0) +
                                     ": lambda_1 " + fmt(r.eigenvalues(0)) + " > n + 4 SE");
            }
        }
        if (panel.name == "fig4_n100_p10") {
            const double l0 = rows.front().report.eigenvalues(0);
            const double l30 = rows.back().report.eigenvalues(0);
            o.require(std::abs(l0 - 11.197) <= 1.0, "p=10 sigma_1=0: lambda_1 " + fmt(l0, 3) + " vs 11.197 +- 1");
            o.require(std::abs(l30 - 91.12) <= 2.0, "p=10 sigma_1=30: lambda_1 " + fmt(l30, 3) + " vs 91.12 +- 2");
        }
    }
    o.require(true, "largest (lambda_1 - n)/SE over n=100 sweeps " + fmt(worst_z, 2) + " (" + worst_name +
                        ", point " + std::to_string(worst_point) + ")");
    return o;
}

Outcome frobenius_bound()
{
    Outcome o;
    FigureOverrides ov;
    ov.seed = 20240510;
    ov.panel_filter = "fig3_em";
    const Panel panel = figure_panels("fig3", ov).front();
    const double bound = frobenius_reduction_bound(panel.dims, 5);
    const double np = static_cast<double>(panel.dims.n) * panel.dims.p;
    for (const auto& sigma : panel.grid) {
        const double s1 = sigma.values()[0];
        if (s1 != 20.0 && s1 != 50.0) continue;
        const RiskReport r =
            mc_risk(panel.spec, embed_spectrum(panel.dims, sigma), 10000, RngState{ov.seed, 0}, workers());
        const double reduction = np - r.frobenius_risk;
        o.require(reduction >= bound - 4.0 * r.frobenius_se,
                  "sigma_1=" + fmt(s1, 0) + ": np - trace = " + fmt(reduction, 2) + " vs " + fmt(bound, 0) +
                      " - 4 SE (SE " + fmt(r.frobenius_se, 2) + ")");
    }
    return o;
}

Outcome property_suites()
{
    Outcome o;
    std::mt19937_64 gen(20240511);

    {
        // orthogonal equivariance
        double worst = 0.0;
        double worst_bayes_z = 0.0;
        const int n = 6, p = 3;
        for (int t = 0; t < 20; ++t) {
            const Matrix x = oracle::gaussian(n, p, gen, 2.0);
            const Matrix u = oracle::orthogonal(n, gen);
            const Matrix v = oracle::orthogonal(p, gen);
            const Observation ox(x), rx(u * x * v.transpose());
            for (const EstimatorSpec& spec : {EstimatorSpec{MleSpec{}}, EstimatorSpec{EfronMorrisSpec{}},
                                              EstimatorSpec{JamesSteinSpec{}},
                                              EstimatorSpec{GeneralizedShrinkageSpec{1.5}}}) {
                const Matrix a = estimate(spec, rx).estimate.matrix();
                const Matrix b = u * estimate(spec, ox).estimate.matrix() * v.transpose();
                worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
            }
            for (const PriorSpec& prior :
                 {PriorSpec{SvsPrior{}}, PriorSpec{MatrixTPrior{-7.0, 1.0}}, PriorSpec{SteinFrobeniusPrior{}}}) {
                ISConfig cfg;
                cfg.n_samples = 2000;
                cfg.seed = RngState{20240511, static_cast<std::uint64_t>(t)};
                const PosteriorMean b = gb_posterior_mean(prior, ox, cfg);
                cfg.rotate_left = u;
                cfg.rotate_right = v;
                const PosteriorMean a = gb_posterior_mean(prior, rx, cfg);
                const Matrix diff = (a.mean.matrix() - u * b.mean.matrix() * v.transpose()).cwiseAbs();
                const double se = std::max(b.diagnostics.std_error.maxCoeff(), 1e-300);
                worst_bayes_z = std::max(worst_bayes_z, diff.maxCoeff() <= 1e-9 ? 0.0 : diff.maxCoeff() / se);
            }
        }
        o.require(worst <= 1e-9, "equivariance, closed-form max deviation " + sci(worst));
        o.require(worst_bayes_z <= 3.0, "equivariance, generalized Bayes deviation " + fmt(worst_bayes_z, 3) + " SE");
    }

    {
        // Loewner order axioms
        bool ok = true;
        for (int t = 0; t < 200; ++t) {
            const int p = 2 + t % 4;
            const SymMatrix a(oracle::gaussian(p, p, gen));
            const Matrix g1 = oracle::gaussian(p, p, gen), g2 = oracle::gaussian(p, p, gen);
            const SymMatrix b(a.matrix() + g1 * g1.transpose());
            const SymMatrix c(b.matrix() + g2 * g2.transpose());
            ok = ok && loewner_leq(a, a, 0.0) && loewner_leq(a, b) && loewner_leq(b, c) && loewner_leq(a, c);
            const SymMatrix a2(a.matrix() + 1e-14 * Matrix::Identity(p, p));
            ok = ok && loewner_leq(a2, a, 1e-12) && loewner_leq(a, a2, 1e-12);
            if (loewner_leq(b, a, 1e-12)) ok = ok && (a.matrix() - b.matrix()).norm() < 1e-10;
        }
        o.require(ok, "Loewner order reflexive, antisymmetric, transitive on 200 samples");
    }

    {
        // pseudo-Bayes identity
        double worst = 0.0;
        for (auto [n, p] : {std::pair{5, 3}, std::pair{20, 6}}) {
            for (int t = 0; t < 50; ++t) {
                const Observation x(oracle::gaussian(n, p, gen, 1.0 + t % 4));
                const Matrix pb = pseudo_bayes_estimate(SvsPrior{}, x).matrix();
                worst = std::max(worst, (pb - efron_morris(x).matrix()).cwiseAbs().maxCoeff());
            }
        }
        o.require(worst <= 1e-10, "X + grad log pi_SVS(X) = EM(X), max deviation " + sci(worst));
    }

    {
        // trace identity of the finite-difference Laplacians
        const std::vector<ScalarFunction> fs = {
            [](const Matrix& y) { return std::exp(-0.1 * y.squaredNorm()); },
            [](const Matrix& y) { return std::log(1.0 + (y.transpose() * y).determinant()); },
            [](const Matrix& y) { return std::sin(y(0, 0)) * std::cos(y(1, 1)) + y.cwiseAbs2().sum(); },
            [](const Matrix& y) {
                return std::exp(log_density(MatrixTPrior{-6.0, 1.0}, MeanMatrix(y)).value());
            },
        };
        bool ok = true;
        double worst = 0.0;
        for (const auto& f : fs) {
            for (int t = 0; t < 20; ++t) {
                const MeanMatrix x(oracle::gaussian(5, 3, gen));
                const double tr = matrix_laplacian_fd(f, x).matrix().trace();
                const double vec_lap = vectorized_laplacian_fd(f, x);
                const double rel = std::abs(tr - vec_lap) / (1 + std::abs(vec_lap));
                worst = std::max(worst, rel);
                ok = ok && rel <= 1e-8;
            }
        }
        o.require(ok, "trace identity, max |tr - vec| / (1 + |vec|) " + sci(worst));
    }

    {
        // Taylor consistency of sphere averages
        const int n = 5, p = 3;
        const PriorSpec prior = MatrixTPrior{-6.0, 1.0};
        auto f = [&](const Matrix& y) { return std::exp(log_density(prior, MeanMatrix(y)).value()); };
        double worst_ratio = INFINITY;
        for (int t = 0; t < 10; ++t) {
            const MeanMatrix x(oracle::gaussian(n, p, gen));
            Vector dir = oracle::gaussian(p, 1, gen).col(0);
            dir.normalize();
            const Matrix lap = matrix_laplacian_closed(prior, x).matrix();
            const double fx = f(x.matrix());
            auto residual = [&](double r) {
                const Vector rho = r * dir;
                const SphereAverage avg =
                    sphere_average(f, x, {rho, 2000}, RngState{20240512, static_cast<std::uint64_t>(t)});
                return std::abs(avg.estimate - fx - rho.dot(lap * rho) / (2.0 * n));
            };
            worst_ratio = std::min(worst_ratio, residual(1e-2) / residual(5e-3));
        }
        o.require(worst_ratio > 6.0, "Taylor residual shrink factor from |rho|=1e-2 to 5e-3, min " +
                                         fmt(worst_ratio, 2) + " (need > 6)");
    }
    return o;
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"exact-risk check", exact_risk},
        {"MLE constant risk", mle_constant},
        {"SURE closed form", sure_closed_form},
        {"SURE unbiasedness", sure_unbiased},
        {"Laplacian closed form", laplacian_closed_form},
        {"NSD certification", nsd_certification},
        {"figure 1 golden points", figure1},
        {"figure 2 non-minimaxity witness", figure2},
        {"figure 4 endpoints", figure4},
        {"Frobenius bound", frobenius_bound},
        {"property suites", property_suites},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += out.pass ? 0 : 1;
        std::printf("%s  %s  [%.1f s]  %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), secs, out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
