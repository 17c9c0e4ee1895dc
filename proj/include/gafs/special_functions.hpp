#pragma once

// Distribution functions needed by the outlier threshold and the univariate
// filters. Series / continued-fraction evaluations of the incomplete gamma
// and beta functions.

namespace gafs::stats {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double chi_square_cdf(double df, double x);

/// Inverse of chi_square_cdf by bisection; |cdf(result) - p| < 1e-6.
double chi_square_quantile(double df, double p);

/// Upper tail P(F > f) of the F(d1, d2) distribution.
double f_survival(double d1, double d2, double f);

}  // namespace gafs::stats
