#pragma once

namespace ttr {

/// Digamma function, accurate to ~1e-13 for x > 0 (recurrence into the
/// asymptotic region, then the standard Bernoulli series).
double digamma(double x);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Upper-tail probability of a chi-square variable with k degrees of freedom.
double chi_square_upper_tail(double x, double k);

/// Quantile of chi-square with k degrees of freedom (bisection on the tail).
double chi_square_quantile(double prob, double k);

/// Standard normal quantile (Wichura's AS 241, double precision).
double normal_quantile(double prob);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace ttr
