#pragma once

namespace vimlop {

/// Regularized lower incomplete gamma function P(a, x).
double regularized_gamma_p(double a, double x);

double chi2_cdf(double x, int dof);

/// Inverse chi-square CDF; throws Error(kDomain) for p outside (0,1) or dof < 1.
double chi2_inv(double p, int dof);

double normal_cdf(double x);

/// Standard normal quantile; throws Error(kDomain) for p outside (0,1).
double normal_quantile(double p);

/// Standard deviation 1/sqrt(kappa) of the normal approximation to von Mises(kappa).
double von_mises_sigma(double kappa);

}  // namespace vimlop
