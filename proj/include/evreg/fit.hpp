#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "evreg/inference.hpp"
#include "evreg/model.hpp"

namespace evreg {

// Greater: H1 is nu > nu0. Less: H1 is nu < nu0.
enum class Direction { Greater, Less };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view text);

struct HypothesisSpec {
  std::size_t param = 0;
  double null_value = 0.0;
  Direction direction = Direction::Greater;
};

struct Restriction {
  std::size_t param = 0;
  double value = 0.0;
};

struct FitOptions {
  int max_iterations = 500;
  // Converged when sup|score| <= gradient_tolerance * max(1, |loglik|).
  double gradient_tolerance = 1e-8;
  // Stall detector on the accepted step length.
  double step_tolerance = 1e-12;
};

struct FitResult {
  Eigen::VectorXd theta_hat;
  double loglik_hat = 0.0;
  LikelihoodState state;
  bool converged = false;
  int iterations = 0;
  // sup-norm of the (projected, for restricted fits) score at theta_hat.
  double grad_norm = 0.0;
  // sqrt(diag(I^{-1})) over the free coordinates; 0 at a fixed coordinate.
  Eigen::VectorXd se;
  std::optional<Restriction> restricted_to;
  std::string message;
};

// Least-squares start for the location, method-of-moments start for the
// dispersion (sigma0 = sqrt(6 s^2) / pi), Power exponents at 1.
Eigen::VectorXd default_init(const BoundModel& model);

// Quasi-Newton (BFGS) maximisation with Armijo backtracking. Throws
// EvaluationError if the likelihood is not finite at the start point; a run
// that hits max_iterations comes back with converged == false.
FitResult fit_full(const BoundModel& model, const std::optional<Eigen::VectorXd>& init = std::nullopt,
                   const FitOptions& options = {});

// Maximises over the remaining coordinates with theta[hyp.param] fixed at
// hyp.null_value exactly.
FitResult fit_restricted(const BoundModel& model, const HypothesisSpec& hyp,
                         const std::optional<Eigen::VectorXd>& init = std::nullopt,
                         const FitOptions& options = {});

}  // namespace evreg
