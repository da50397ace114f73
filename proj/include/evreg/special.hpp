#pragma once

namespace evreg::special {

// Euler-Mascheroni constant.
inline constexpr double kEuler = 0.57721566490153286060651209008240243;

double digamma(double x);
double trigamma(double x);

// First and second derivatives of the gamma function, built from
// psi and psi' so that Gamma'(x) = Gamma(x) psi(x) and
// Gamma''(x) = Gamma(x) (psi(x)^2 + psi'(x)).
double gamma(double x);
double gamma1(double x);
double gamma2(double x);

// Standard normal distribution function and its inverse.
double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace evreg::special
