#include "evreg/special.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "evreg/error.hpp"

namespace evreg::special {

namespace {

void require_finite(double x, const char* fn) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be finite");
  }
}

}  // namespace

double digamma(double x) {
  require_finite(x, "digamma");
  if (x <= 0.0 && x == std::floor(x)) throw DomainError("digamma: pole at non-positive integer");
  return boost::math::digamma(x);
}

double trigamma(double x) {
  require_finite(x, "trigamma");
  if (x <= 0.0 && x == std::floor(x)) throw DomainError("trigamma: pole at non-positive integer");
  return boost::math::trigamma(x);
}

double gamma(double x) {
  require_finite(x, "gamma");
  if (x <= 0.0 && x == std::floor(x)) throw DomainError("gamma: pole at non-positive integer");
  return boost::math::tgamma(x);
}

double gamma1(double x) { return gamma(x) * digamma(x); }

double gamma2(double x) {
  const double psi = digamma(x);
  return gamma(x) * (psi * psi + trigamma(x));
}

double normal_cdf(double x) {
  if (std::isnan(x)) throw DomainError("normal_cdf: NaN argument");
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace evreg::special
