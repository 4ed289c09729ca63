#pragma once

// Independent reference computations for the unit tests. None of these call
// the code under test for the quantity being checked.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian(int rows, int cols, std::mt19937_64& gen, double scale = 1.0)
{
    std::normal_distribution<double> nd;
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = scale * nd(gen);
    return m;
}

// Haar orthogonal via Gram-Schmidt on a Gaussian matrix.
inline Matrix orthogonal(int k, std::mt19937_64& gen)
{
    Matrix q = gaussian(k, k, gen);
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
        q.col(j).normalize();
    }
    return q;
}

// Eigenvalues of [[a, b], [b, c]], descending, by the quadratic formula.
inline std::pair<double, double> eig2(double a, double b, double c)
{
    const double mid = 0.5 * (a + c);
    const double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    return {mid + rad, mid - rad};
}

// Determinant by cofactor expansion (small matrices only).
inline double det_cofactor(const Matrix& a)
{
    const int k = static_cast<int>(a.rows());
    if (k == 1) return a(0, 0);
    if (k == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
        Matrix minor(k - 1, k - 1);
        for (int r = 1; r < k; ++r) {
            int cc = 0;
            for (int c = 0; c < k; ++c) {
                if (c == j) continue;
                minor(r - 1, cc++) = a(r, c);
            }
        }
        total += ((j % 2 == 0) ? 1.0 : -1.0) * a(0, j) * det_cofactor(minor);
    }
    return total;
}

// Efron-Morris through the SVD: U diag(s_i - c / s_i) V^T.
inline Matrix shrink_singular_values(const Matrix& x, double c)
{
    Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = svd.singularValues();
    for (int i = 0; i < s.size(); ++i) s(i) = s(i) - c / s(i);
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

// Central-difference gradient of a scalar function of a matrix.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double h)
{
    Matrix g(x.rows(), x.cols());
    Matrix y = x;
    for (int j = 0; j < x.cols(); ++j) {
        for (int i = 0; i < x.rows(); ++i) {
            y(i, j) = x(i, j) + h;
            const double fp = f(y);
            y(i, j) = x(i, j) - h;
            const double fm = f(y);
            y(i, j) = x(i, j);
            g(i, j) = (fp - fm) / (2.0 * h);
        }
    }
    return g;
}

// Monte Carlo E[(U + beta)^{-c/2}] for U ~ noncentral chi-square(k, lambda),
// with standard error.
inline std::pair<double, double> noncentral_moment_mc(int k, double lambda, double c, double beta, long draws,
                                                      std::mt19937_64& gen)
{
    std::normal_distribution<double> nd;
    const double shift = std::sqrt(lambda);
    double s1 = 0.0, s2 = 0.0;
    for (long d = 0; d < draws; ++d) {
        double u = 0.0;
        for (int i = 0; i < k; ++i) {
            const double z = nd(gen) + (i == 0 ? shift : 0.0);
            u += z * z;
        }
        const double v = std::pow(u + beta, -0.5 * c);
        s1 += v;
        s2 += v * v;
    }
    const double mean = s1 / draws;
    const double var = (s2 / draws - mean * mean) / (draws - 1.0);
    return {mean, std::sqrt(std::max(var, 0.0))};
}

// Plain self-normalized importance sampling for a posterior mean, no antithetic
// pairs, no chunking: E[M pi(M)] / E[pi(M)] with M ~ N(X, I).
inline Matrix plain_is_posterior_mean(const std::function<double(const Matrix&)>& log_prior, const Matrix& x,
                                      long draws, std::mt19937_64& gen)
{
    std::vector<double> lw(static_cast<std::size_t>(draws));
    std::vector<Matrix> ms;
    ms.reserve(static_cast<std::size_t>(draws));
    double top = -INFINITY;
    for (long d = 0; d < draws; ++d) {
        ms.push_back(x + gaussian(static_cast<int>(x.rows()), static_cast<int>(x.cols()), gen));
        lw[static_cast<std::size_t>(d)] = log_prior(ms.back());
        top = std::max(top, lw[static_cast<std::size_t>(d)]);
    }
    Matrix num = Matrix::Zero(x.rows(), x.cols());
    double den = 0.0;
    for (long d = 0; d < draws; ++d) {
        const double w = std::exp(lw[static_cast<std::size_t>(d)] - top);
        num += w * ms[static_cast<std::size_t>(d)];
        den += w;
    }
    return num / den;
}

inline double rel_err(const Matrix& a, const Matrix& b)
{
    const double denom = std::max(b.norm(), 1e-300);
    return (a - b).norm() / denom;
}

}  // namespace oracle
