#include "evreg/evd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "evreg/error.hpp"
#include "evreg/special.hpp"

namespace evreg {

std::string_view to_string(Tail tail) { return tail == Tail::Max ? "max" : "min"; }

Tail parse_tail(std::string_view text) {
  if (text == "max") return Tail::Max;
  if (text == "min") return Tail::Min;
  throw DomainError("unknown family '" + std::string(text) + "' (expected max or min)");
}

void GumbelParams::validate() const {
  if (!std::isfinite(mu)) throw DomainError("Gumbel location must be finite");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("Gumbel dispersion must be finite and positive");
  }
}

GumbelParams reflect(const GumbelParams& p) {
  return {-p.mu, p.sigma, p.tail == Tail::Max ? Tail::Min : Tail::Max};
}

namespace {

double max_log_density(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return -std::log(sigma) - z - std::exp(-z);
}

double max_cdf(double y, double mu, double sigma) {
  return std::exp(-std::exp(-(y - mu) / sigma));
}

}  // namespace

double log_density(double y, const GumbelParams& p) {
  p.validate();
  if (!std::isfinite(y)) throw DomainError("log_density: y must be finite");
  // Min is evaluated through the reflected Max law so the duality is exact.
  if (p.tail == Tail::Max) return max_log_density(y, p.mu, p.sigma);
  return max_log_density(-y, -p.mu, p.sigma);
}

double cdf(double y, const GumbelParams& p) {
  p.validate();
  if (std::isnan(y)) throw DomainError("cdf: y is NaN");
  if (p.tail == Tail::Max) return max_cdf(y, p.mu, p.sigma);
  // P(Y <= y) = P(-Y >= -y) = 1 - F_max(-y; -mu); written with expm1 for the lower tail.
  return -std::expm1(-std::exp((y - p.mu) / p.sigma));
}

double quantile(double u, const GumbelParams& p) {
  p.validate();
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile: u must lie in (0, 1)");
  u = std::clamp(u, 1e-300, 1.0 - 1e-16);
  if (p.tail == Tail::Max) return p.mu - p.sigma * std::log(-std::log(u));
  return p.mu + p.sigma * std::log(-std::log1p(-u));
}

double sample(Rng& rng, const GumbelParams& p) { return quantile(rng.uniform(), p); }

double mean(const GumbelParams& p) {
  p.validate();
  return p.tail == Tail::Max ? p.mu + special::kEuler * p.sigma
                             : p.mu - special::kEuler * p.sigma;
}

double variance(const GumbelParams& p) {
  p.validate();
  return p.sigma * p.sigma * std::numbers::pi * std::numbers::pi / 6.0;
}

}  // namespace evreg
