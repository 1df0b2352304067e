#include "vimlop/distributions.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "vimlop/error.hpp"

namespace vimlop {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10000;

// Series expansion, converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), used for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw Error(ErrorCode::kDomain, "gamma shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw Error(ErrorCode::kDomain, fmt::format("chi-square dof must be >= 1, got {}", dof));
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_inv(double p, int dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kDomain, fmt::format("chi2_inv probability must lie in (0,1), got {}", p));
  }
  if (dof < 1) throw Error(ErrorCode::kDomain, fmt::format("chi-square dof must be >= 1, got {}", dof));

  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(dof));
  while (chi2_cdf(hi, dof) < p) {
    lo = hi;
    hi *= 2.0;
  }
  // Bisection to a tight bracket, then Newton polish on the density.
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  const double k = 0.5 * dof;
  for (int i = 0; i < 3 && x > 0.0; ++i) {
    const double log_pdf = (k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k);
    const double pdf = std::exp(log_pdf);
    if (!(pdf > 0.0) || !std::isfinite(pdf)) break;
    const double next = x - (chi2_cdf(x, dof) - p) / pdf;
    if (!(next > lo && next < hi)) break;
    x = next;
  }
  return x;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::kDomain, fmt::format("normal quantile probability must lie in (0,1), got {}", p));
  }
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  double x = 0.5 * (lo + hi);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  if (pdf > 1e-300) x -= (normal_cdf(x) - p) / pdf;
  return x;
}

double von_mises_sigma(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::kDomain, fmt::format("von Mises concentration must be positive, got {}", kappa));
  }
  return 1.0 / std::sqrt(kappa);
}

}  // namespace vimlop
