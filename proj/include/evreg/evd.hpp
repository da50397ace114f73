#pragma once

#include <cstdint>
#include <string_view>

#include "evreg/rng.hpp"

namespace evreg {

enum class Tail { Max, Min };

std::string_view to_string(Tail tail);
Tail parse_tail(std::string_view text);

// Location/dispersion of a single type I extreme value (Gumbel) law.
struct GumbelParams {
  double mu = 0.0;
  double sigma = 1.0;
  Tail tail = Tail::Max;

  // Throws DomainError unless mu is finite and sigma is finite and positive.
  void validate() const;

  friend bool operator==(const GumbelParams&, const GumbelParams&) = default;
};

// (mu, sigma, Max) <-> (-mu, sigma, Min): y ~ EV_min(mu, sigma) iff -y ~ EV_max(-mu, sigma).
GumbelParams reflect(const GumbelParams& p);

double log_density(double y, const GumbelParams& p);
double cdf(double y, const GumbelParams& p);

// Inverse distribution function. u is saturated to [1e-300, 1 - 1e-16]
// before taking logs, so values at the extreme ends of (0, 1) map to
// large-but-finite quantiles.
double quantile(double u, const GumbelParams& p);

// One inverse-cdf draw; consumes exactly one uniform from the stream.
double sample(Rng& rng, const GumbelParams& p);

double mean(const GumbelParams& p);
double variance(const GumbelParams& p);

}  // namespace evreg
