#pragma once

// Numerical checks of matrix superharmonicity: finite-difference matrix
// Laplacians, sphere averages over rank-one perturbations X + e rho^T, and a
// certifier that combines both over a set of test points.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "matshrink/matcore.hpp"
#include "matshrink/priors.hpp"

namespace matshrink {

using ScalarFunction = std::function<double(const Matrix&)>;

// h = 1e-4 * (1 + ||X||_F)
double default_fd_step(const Matrix& x);

// (Lap f)_{ij} = sum_a d^2 f / dX_ai dX_aj by central differences: 3-point
// stencil on the diagonal, 4-point cross stencil for mixed partials.
SymMatrix matrix_laplacian_fd(const ScalarFunction& f, const MeanMatrix& x, std::optional<double> h = std::nullopt);

// sum_{a,i} d^2 f / dX_ai^2 with the same diagonal stencil, so it equals the
// trace of matrix_laplacian_fd up to summation order.
double vectorized_laplacian_fd(const ScalarFunction& f, const MeanMatrix& x, std::optional<double> h = std::nullopt);

struct SpherePerturbation {
    Vector rho;
    // antithetic node pairs (e, -e) per average
    int n_nodes = 20000;
};

struct SphereAverage {
    double estimate = 0.0;
    double std_error = 0.0;
    long evaluations = 0;
    long non_finite = 0;
};

// Average of f(X + e rho^T) over the unit sphere in R^n. Nodes come in random
// orthonormal frames {+-q_1, ..., +-q_n} (Q Haar distributed), which is
// unbiased for every f and exact for polynomials of degree <= 3 in e. The
// standard error is taken over frames. Non-finite nodes are dropped and
// counted; more than 0.1% of them raises NonFiniteEvaluation.
SphereAverage sphere_average(const ScalarFunction& f, const MeanMatrix& x, const SpherePerturbation& pert,
                             RngState rng);

enum class Verdict { certified_nsd, violation_found, inconclusive };

std::string verdict_name(Verdict v);

struct LaplacianResult {
    std::size_t point_index = 0;
    double max_eigenvalue = 0.0;  // of Lap f / f in prior mode, Lap f otherwise
    // 1 + ||Lap||_F, plus ||grad log pi||_F^2 in prior mode (the size of the
    // terms that cancel inside Lap pi / pi)
    double scale = 1.0;
    // finite differences only: ||Lap_h - Lap_2h||_F, added to the threshold
    double fd_error = 0.0;
    bool violation = false;
};

struct SphereViolation {
    std::size_t point_index = 0;
    std::size_t perturbation_index = 0;
    Matrix x;
    Vector rho;
    double l_estimate = 0.0;
    double f_value = 0.0;
    double std_error = 0.0;
};

struct SkippedPoint {
    std::size_t point_index = 0;
    std::string reason;
};

struct SuperharmonicReport {
    int points_tested = 0;
    int sphere_tests = 0;
    // largest relative eigenvalue max_eig / scale over all Laplacian tests
    double max_laplacian_eigenvalue = 0.0;
    std::optional<Matrix> worst_point;
    std::string laplacian_method;  // "closed_form" or "finite_difference"
    std::vector<LaplacianResult> laplacian_results;
    std::vector<SphereViolation> sphere_violations;
    std::vector<SkippedPoint> skipped;
    long non_finite_nodes = 0;
    Verdict verdict = Verdict::inconclusive;
    std::vector<std::string> assumptions;
};

struct CertifyOptions {
    double tol = 1e-10;     // closed-form Laplacian: lambda_max <= tol * scale
    double fd_tol = 1e-5;   // finite-difference Laplacian
    double sphere_z = 4.0;  // violation when L - f(X) > sphere_z * SE + floor
    double sphere_floor = 1e-12;
    bool use_closed_form = true;
    // default: 1e-4 * min(1 + ||X||_F, |f| / ||grad f||_F) per point
    std::optional<double> fd_step;
    int workers = 1;
};

// Prior mode. Everything is evaluated relative to pi(X): the Laplacian test
// uses Lap pi / pi, the sphere test averages pi(Y) / pi(X) against 1, so
// densities far below or above double range are handled. Points where
// pi = +inf are skipped and listed.
SuperharmonicReport certify(const PriorSpec& prior, const std::vector<MeanMatrix>& test_points,
                            const std::vector<SpherePerturbation>& perturbations, const CertifyOptions& options,
                            RngState rng);

// Black-box mode: finite-difference Laplacian of f itself.
SuperharmonicReport certify(const ScalarFunction& f, const std::vector<MeanMatrix>& test_points,
                            const std::vector<SpherePerturbation>& perturbations, const CertifyOptions& options,
                            RngState rng);

// Gaussian points at scales {0.1, 1, 10} (per_scale each), rank-one and
// rank-(p-1) points, points with smallest singular value 1e-3, the
// first-column-ones point and the all-ones point.
std::vector<MeanMatrix> default_test_points(ProblemDims dims, RngState rng, int per_scale = 5);

// rho = e_1, the all-ones vector, a random unit vector and a random vector of
// norm 3.
std::vector<SpherePerturbation> default_perturbations(int p, RngState rng, int n_nodes = 20000);

}  // namespace matshrink
