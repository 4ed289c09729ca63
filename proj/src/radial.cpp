// Moments of (U + beta)^{-c/2} for U noncentral chi-square. Posterior means
// under priors that depend on M only through ||M||^2 (or through the column
// norms) reduce to ratios of these.

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "matshrink/estimators.hpp"

namespace matshrink {

namespace {

double log_add(double a, double b)
{
    if (a == -std::numeric_limits<double>::infinity()) {
        return b;
    }
    if (b == -std::numeric_limits<double>::infinity()) {
        return a;
    }
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// beta = 0: Poisson mixture of central chi-square inverse moments,
// E chi2_nu^{-c/2} = 2^{-c/2} Gamma((nu - c)/2) / Gamma(nu/2).
double log_moment_series(double k, double lambda, double c)
{
    const double mu = 0.5 * lambda;
    auto term = [&](double j) {
        const double log_pois = mu > 0.0 ? j * std::log(mu) - mu - std::lgamma(j + 1.0) : (j == 0.0 ? 0.0 : -INFINITY);
        return log_pois - 0.5 * c * std::log(2.0) + std::lgamma(0.5 * (k + 2.0 * j - c)) -
               std::lgamma(0.5 * (k + 2.0 * j));
    };
    constexpr double kDrop = 45.0;  // relative contribution below e^-45 is ignored
    constexpr long kMaxTerms = 50'000'000;

    const double j0 = std::floor(mu);
    const double peak = term(j0);
    double total = peak;
    long used = 1;
    for (double j = j0 + 1.0;; j += 1.0) {
        const double t = term(j);
        total = log_add(total, t);
        if (t < peak - kDrop && t < total - kDrop) {
            break;
        }
        if (++used > kMaxTerms) {
            throw NonConvergence("radial moment series did not converge");
        }
    }
    for (double j = j0 - 1.0; j >= 0.0; j -= 1.0) {
        const double t = term(j);
        total = log_add(total, t);
        if (t < total - kDrop) {
            break;
        }
        if (++used > kMaxTerms) {
            throw NonConvergence("radial moment series did not converge");
        }
    }
    return total;
}

// beta > 0: (u + beta)^{-c/2} = Gamma(c/2)^{-1} int_0^inf t^{c/2-1} e^{-(u+beta)t} dt
// together with E e^{-tU} = (1 + 2t)^{-k/2} exp(-lambda t / (1 + 2t)).
// The variable is rescaled by tau = 1/(1 + lambda + beta) so the mass sits near
// s = O(1).
double log_moment_quadrature(double k, double lambda, double c, double beta)
{
    const double tau = 1.0 / (1.0 + lambda + beta);
    auto integrand = [&](double s) {
        if (s <= 0.0) {
            return 0.0;
        }
        const double t = tau * s;
        const double log_g = (0.5 * c - 1.0) * std::log(s) - beta * t - 0.5 * k * std::log1p(2.0 * t) -
                             lambda * t / (1.0 + 2.0 * t);
        return std::exp(log_g);
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    double error = 0.0;
    double l1 = 0.0;
    const double value = integrator.integrate(integrand, 1e-12, &error, &l1);
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw NonConvergence("radial moment quadrature failed");
    }
    return 0.5 * c * std::log(tau) + std::log(value) - std::lgamma(0.5 * c);
}

}  // namespace

double log_radial_moment(double k, double lambda, double c, double beta)
{
    if (!(k > 0.0) || !(lambda >= 0.0) || !(c >= 0.0) || !(beta >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("log_radial_moment: need k > 0, lambda >= 0, c >= 0, beta >= 0");
    }
    if (c == 0.0) {
        return 0.0;
    }
    if (beta == 0.0) {
        if (c >= k) {
            throw InvalidArgument("posterior is improper: the prior exponent c = " + std::to_string(c) +
                                  " is not below the dimension " + std::to_string(k));
        }
        return log_moment_series(k, lambda, c);
    }
    return log_moment_quadrature(k, lambda, c, beta);
}

double radial_shrinkage_factor(double k, double lambda, double c, double beta)
{
    if (c == 0.0) {
        return 1.0;
    }
    return std::exp(log_radial_moment(k + 2.0, lambda, c, beta) - log_radial_moment(k, lambda, c, beta));
}

}  // namespace matshrink
