#include <doctest.h>

#include <cmath>
#include <sstream>

#include "matshrink/risk.hpp"
#include "support/oracles.hpp"

using namespace matshrink;

namespace {

std::vector<EstimatorSpec> closed_form_specs()
{
    return {MleSpec{}, EfronMorrisSpec{}, JamesSteinSpec{}, ColumnwiseJsSpec{}, ColumnwiseJsSpec{0.4},
            GeneralizedShrinkageSpec{2.0}};
}

bool eigenvalues_near(const RiskReport& r, const Vector& target, double z)
{
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        if (std::abs(r.eigenvalues(i) - target(i)) > z * r.eig_std_errors(i)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("MLE has constant risk n I")
{
    std::mt19937_64 gen(1);
    for (int t = 0; t < 3; ++t) {
        const MeanMatrix m(oracle::gaussian(6, 3, gen, 5.0 * t));
        const RiskReport r = mc_risk(MleSpec{}, m, 20000, RngState{11, static_cast<std::uint64_t>(t)});
        CHECK(eigenvalues_near(r, Vector::Constant(3, 6.0), 4.5));
        CHECK(r.n_batches == 141);
        CHECK(r.frobenius_risk == doctest::Approx(r.mean_risk.matrix().trace()));
    }
}

TEST_CASE("Efron-Morris risk at the origin is (p + 1) I")
{
    // n - p - 3 > 0 here, so the loss has finite variance and batch errors are
    // trustworthy
    const ProblemDims d{10, 3};
    const RiskReport r = mc_risk(EfronMorrisSpec{}, MeanMatrix::zeros(d), 40000, RngState{5, 0});
    CHECK(eigenvalues_near(r, Vector::Constant(3, 4.0), 4.5));
    CHECK((em_exact_risk_at_zero(d).matrix() - 4.0 * Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK_THROWS_AS(em_exact_risk_at_zero(ProblemDims{4, 3}), RegimeViolation);
}

TEST_CASE("James-Stein matrix risk at the origin is (2/p) I")
{
    // Frobenius risk np - (np - 2)^2 E[1 / chi2_np] = 2, split evenly by symmetry
    const ProblemDims d{5, 3};
    const RiskReport r = mc_risk(JamesSteinSpec{}, MeanMatrix::zeros(d), 40000, RngState{6, 0});
    CHECK(eigenvalues_near(r, Vector::Constant(3, 2.0 / 3.0), 4.5));
    CHECK(std::abs(r.frobenius_risk - 2.0) < 4.5 * r.frobenius_se);
}

TEST_CASE("mc_risk reproducibility, common random numbers and workers")
{
    const MeanMatrix m = embed_spectrum({5, 3}, SingularSpectrum({3, 1, 0}));
    const RiskReport a = mc_risk(EfronMorrisSpec{}, m, 3000, RngState{1, 0});
    const RiskReport b = mc_risk(EfronMorrisSpec{}, m, 3000, RngState{1, 0}, 4);
    CHECK(a.mean_risk.matrix() == b.mean_risk.matrix());
    CHECK(a.eig_std_errors == b.eig_std_errors);
    const auto multi = mc_risk_multi({MleSpec{}, EfronMorrisSpec{}, EfronMorrisSpec{}}, m, 3000, RngState{1, 0});
    CHECK(multi[1].mean_risk.matrix() == a.mean_risk.matrix());
    CHECK(multi[2].mean_risk.matrix() == a.mean_risk.matrix());
    CHECK(multi[0].estimator == "mle");
    const RiskReport c = mc_risk(EfronMorrisSpec{}, m, 3000, RngState{2, 0});
    CHECK(c.mean_risk.matrix() != a.mean_risk.matrix());
    CHECK_THROWS_AS(mc_risk(EfronMorrisSpec{}, MeanMatrix::zeros({4, 3}), 100, RngState{}), RegimeViolation);
}

TEST_CASE("mc_risk for generalized Bayes records ESS")
{
    GeneralizedBayesSpec gb;
    gb.is.n_samples = 500;
    const RiskReport r = mc_risk(gb, embed_spectrum({5, 3}, SingularSpectrum({2, 0, 0})), 50, RngState{3, 0});
    REQUIRE(r.min_ess_fraction.has_value());
    CHECK(*r.min_ess_fraction > 0.0);
    CHECK(*r.min_ess_fraction <= 1.0);
    CHECK(r.estimator == "gb(svs)");
}

TEST_CASE("matrix_divergence_fd of linear maps")
{
    // g(X) = X A has divergence n A
    std::mt19937_64 gen(2);
    const Matrix a = oracle::gaussian(3, 3, gen);
    const Observation x(oracle::gaussian(5, 3, gen));
    const Matrix div = matrix_divergence_fd([&](const Matrix& y) { return Matrix(y * a); }, x);
    CHECK((div - 5.0 * a).norm() < 1e-8);
}

TEST_CASE("Efron-Morris divergence matches the closed form")
{
    std::mt19937_64 gen(3);
    for (auto [n, p] : {std::pair{5, 3}, std::pair{9, 4}}) {
        const double c = n - p - 1.0;
        for (int t = 0; t < 20; ++t) {
            const Matrix x = oracle::gaussian(n, p, gen, 2.0) + 3.0 * Matrix::Identity(n, p);
            const Matrix ginv = (x.transpose() * x).inverse();
            const Matrix div = matrix_divergence_fd([&](const Matrix& y) {
                return Matrix(-c * y * (y.transpose() * y).inverse());
            }, Observation(x));
            CHECK(oracle::rel_err(div, -c * c * ginv) < 1e-5);
        }
    }
}

TEST_CASE("closed-form SURE matches finite differences")
{
    std::mt19937_64 gen(4);
    for (const EstimatorSpec& spec : closed_form_specs()) {
        CAPTURE(estimator_label(spec));
        for (int t = 0; t < 20; ++t) {
            const Observation x(oracle::gaussian(5, 3, gen, 1.0 + t % 3) + 2.0 * Matrix::Identity(5, 3));
            const SureReport closed = sure(spec, x);
            const SureReport fd = sure(spec, x, true);
            CHECK(closed.divergence_method == DivergenceMethod::closed_form);
            CHECK(fd.divergence_method == DivergenceMethod::finite_difference);
            CHECK(oracle::rel_err(fd.estimate.matrix(), closed.estimate.matrix()) < 1e-6);
        }
    }
    CHECK(sure(MleSpec{}, Observation(Matrix::Ones(5, 3))).estimate.matrix() == 5.0 * Matrix::Identity(3, 3));
    CHECK_THROWS_AS(sure(GeneralizedBayesSpec{}, Observation(Matrix::Ones(5, 3))), Unsupported);
    CHECK_THROWS_AS(sure_unbiasedness_check(GeneralizedBayesSpec{}, MeanMatrix::zeros({5, 3}), 10, RngState{}),
                    Unsupported);
}

TEST_CASE("SURE is unbiased")
{
    // n = 10 keeps the loss variance finite for Efron-Morris
    const ProblemDims d{10, 3};
    const MeanMatrix m = embed_spectrum(d, SingularSpectrum({5, 2, 0}));
    for (const EstimatorSpec& spec : closed_form_specs()) {
        CAPTURE(estimator_label(spec));
        const SureCheckReport rep = sure_unbiasedness_check(spec, m, 20000, RngState{9, 0});
        CHECK(rep.within(4.5));
        CHECK(rep.n_reps == 20000);
    }
    const SureCheckReport mle_rep = sure_unbiasedness_check(MleSpec{}, m, 2000, RngState{9, 0});
    CHECK(mle_rep.mean_sure.matrix() == 10.0 * Matrix::Identity(3, 3));
}

TEST_CASE("SURE paired with mc_risk on the same draws")
{
    const MeanMatrix m = embed_spectrum({10, 3}, SingularSpectrum({4, 0, 0}));
    const SureCheckReport rep = sure_unbiasedness_check(EfronMorrisSpec{}, m, 2000, RngState{4, 0});
    const RiskReport r = mc_risk(EfronMorrisSpec{}, m, 2000, RngState{4, 0});
    CHECK((rep.mean_risk.matrix() - r.mean_risk.matrix()).norm() < 1e-10 * r.mean_risk.matrix().norm());
}

TEST_CASE("frobenius_reduction_bound")
{
    CHECK(frobenius_reduction_bound({100, 20}, 5) == doctest::Approx(1200.0));
    CHECK(frobenius_reduction_bound({5, 3}, 0) == doctest::Approx(6.0));
    CHECK(frobenius_reduction_bound({5, 3}, 3) == 0.0);
    CHECK_THROWS_AS(frobenius_reduction_bound({5, 3}, 4), InvalidArgument);
    CHECK_THROWS_AS(frobenius_reduction_bound({5, 3}, -1), InvalidArgument);
}

TEST_CASE("minimaxity_sweep and the risk CSV")
{
    const ProblemDims d{10, 3};
    const std::vector<SingularSpectrum> grid = {SingularSpectrum({0, 0, 0}), SingularSpectrum({5, 0, 0}),
                                                SingularSpectrum({10, 2, 0})};
    const auto rows = minimaxity_sweep(EfronMorrisSpec{}, d, grid, 2000, RngState{7, 0});
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) CHECK(row.minimax_pass);

    std::stringstream ss;
    write_risk_csv(ss, rows, true);
    const CsvTable table = read_risk_csv(ss);
    CHECK(table.rows.size() == 3);
    CHECK(table.columns.front() == "sigma_1");
    CHECK(table.column("sigma_1")[1] == 5.0);
    CHECK(table.column("lambda_1")[2] == rows[2].report.eigenvalues(0));
    CHECK(table.column("se_3")[0] == rows[0].report.eig_std_errors(2));
    CHECK(table.column("n_reps")[0] == 2000.0);
    CHECK(table.column("minimax_pass")[0] == 1.0);
    CHECK_THROWS_AS(table.index_of("lambda_9"), ParseError);

    std::stringstream bad("sigma_1,lambda_1\n1,2\n");
    CHECK_THROWS_AS(read_risk_csv(bad), ParseError);
    std::stringstream ragged;
    write_risk_csv(ragged, rows, false);
    std::string text = ragged.str();
    text += "1,2\n";
    std::stringstream ragged_in(text);
    CHECK_THROWS_AS(read_risk_csv(ragged_in), ParseError);
}

TEST_CASE("risk spectra depend only on singular values")
{
    std::mt19937_64 gen(12);
    const ProblemDims d{10, 3};
    const MeanMatrix m = embed_spectrum(d, SingularSpectrum({6, 2, 1}));
    const Matrix u = oracle::orthogonal(10, gen);
    const Matrix v = oracle::orthogonal(3, gen);
    const MeanMatrix rotated(u * m.matrix() * v.transpose());
    for (const EstimatorSpec& spec : {EstimatorSpec{EfronMorrisSpec{}}, EstimatorSpec{JamesSteinSpec{}}}) {
        const RiskReport a = mc_risk(spec, m, 20000, RngState{3, 0});
        const RiskReport b = mc_risk(spec, rotated, 20000, RngState{4, 0});
        for (int i = 0; i < 3; ++i) {
            const double se = std::hypot(a.eig_std_errors(i), b.eig_std_errors(i));
            CHECK(std::abs(a.eigenvalues(i) - b.eigenvalues(i)) < 4.0 * se);
        }
    }
}

TEST_CASE("Efron-Morris risk is dominated by n I")
{
    const ProblemDims d{10, 3};
    for (const auto& sigma : {SingularSpectrum({0, 0, 0}), SingularSpectrum({3, 0, 0}), SingularSpectrum({10, 5, 1}),
                              SingularSpectrum({30, 30, 30})}) {
        const RiskReport r = mc_risk(EfronMorrisSpec{}, embed_spectrum(d, sigma), 10000, RngState{8, 0});
        const double slack = 4.0 * r.eig_std_errors.maxCoeff();
        CHECK(loewner_leq(r.mean_risk, SymMatrix::identity(3, 10.0 + slack)));
    }
}

TEST_CASE("generalized shrinkage SURE and the minimax range")
{
    std::mt19937_64 gen(13);
    const int n = 6, p = 3;
    const double edge = 2.0 * (n - p - 1);
    for (int t = 0; t < 50; ++t) {
        const Observation x(oracle::gaussian(n, p, gen, 0.3 + t % 5));
        for (double c : {0.0, 1.0, edge / 2, edge}) {
            const Matrix s = sure(GeneralizedShrinkageSpec{c}, x).estimate.matrix();
            CHECK(sym_eigenvalues(SymMatrix(s))(0) <= n + 1e-9 * s.norm());
        }
        const Matrix out = sure(GeneralizedShrinkageSpec{edge + 1.0}, x).estimate.matrix();
        CHECK(sym_eigenvalues(SymMatrix(out))(0) > n);
    }
}
