#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evreg/fit.hpp"
#include "evreg/inference.hpp"
#include "evreg/model.hpp"

namespace evreg {

// R is the signed likelihood ratio statistic; the others are its adjusted
// versions R + log|U/R| / R for different choices of U:
//   Rstar   exact sample-space derivatives (linear homoskedastic models only)
//   R0star  orthogonal-parameter approximation (see ortho.hpp)
//   Rbar    expected covariances
//   Rhat    empirical covariances
//   Rtilde  approximate ancillary directions
enum class Statistic { R, R0star, Rbar, Rhat, Rtilde, Rstar };

inline constexpr std::array<Statistic, 6> kAllStatistics = {
    Statistic::R, Statistic::R0star, Statistic::Rbar, Statistic::Rhat, Statistic::Rtilde, Statistic::Rstar};

std::string_view to_string(Statistic s);
Statistic parse_statistic(std::string_view text);
// "all" or a comma-separated list of names; throws std::invalid_argument.
std::vector<Statistic> parse_statistic_list(std::string_view text);

// |R| below this is treated as R == 0: the adjustment has a removable
// singularity there, so every adjusted statistic is reported as R.
inline constexpr double kNearZeroR = 1e-4;

// Diagonals comparing the unrestricted (hat) and restricted (tilde) fits.
struct CrossFitDiagonals {
  Eigen::VectorXd c;       // sigma_hat / sigma_tilde
  Eigen::VectorXd d;       // (mu_hat - mu_tilde) / sigma_tilde
  Eigen::VectorXd dbreve;  // exp(-d)
  Eigen::VectorXd m;       // Gamma(1 + c)
  Eigen::VectorXd n;       // Gamma'(1 + c)
  Eigen::VectorXd p;       // Gamma''(1 + c)
};

CrossFitDiagonals cross_fit_diagonals(const DiagonalBundle& hat, const DiagonalBundle& tilde);

// q, Upsilon and the information matrix whose determinant scales U in the
// covariance-based approximations. U drops row nu of upsilon.
struct CovarianceTerms {
  Eigen::VectorXd q;
  Eigen::MatrixXd upsilon;
  Eigen::MatrixXd information;
};

// Closed-form expectations under theta_hat. upsilon = E[U(theta_hat) U(theta_tilde)'],
// rows indexed by the score at theta_hat; information is I(theta_hat).
CovarianceTerms skovgaard_terms(const DiagonalBundle& hat, const DiagonalBundle& tilde);
// Per-observation sums. upsilon = sum_t s_t(theta_tilde) s_t(theta_hat)',
// rows indexed by the score at theta_tilde; information is the empirical
// sum_t s_t(theta_hat) s_t(theta_hat)'.
CovarianceTerms severini_terms(const DiagonalBundle& hat, const DiagonalBundle& tilde);

// dl/dy_t at the bundle's parameter point (length n).
Eigen::VectorXd response_gradient(const DiagonalBundle& b);
// d^2 l / d theta d y' ((k+m) x n).
Eigen::MatrixXd response_theta_gradient(const DiagonalBundle& b);
// -(dF/dtheta_j)/f, the n x (k+m) ancillary direction matrix.
Eigen::MatrixXd ancillary_directions(const DiagonalBundle& b);

// sgn(nu_hat - nu0) sqrt(2 (l_hat - l_tilde)). Throws InconsistentFits when
// l_hat < l_tilde beyond optimizer tolerance.
double signed_lr(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp);

// R + log|U/R| / R; returns R itself when |R| < kNearZeroR. Throws
// std::domain_error when U == 0 or either argument is not finite.
double adjust(double r, double u);

// Exact U for linear location / constant identity-link dispersion models
// using the residual ancillary. Throws UnsupportedModel otherwise.
double barndorff_u(const BoundModel& model, const FitResult& full, const FitResult& restr,
                   const HypothesisSpec& hyp);
double skovgaard_u(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp);
double severini_u(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp);
double fraser_u(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp);

// Greater: 1 - Phi(stat); Less: Phi(stat).
double p_value(double stat, Direction direction);

struct StatisticResult {
  std::optional<double> value;
  std::optional<double> p_value;
  std::optional<double> u;
  bool near_zero = false;
  bool unsupported = false;
  std::string error;

  bool ok() const { return value.has_value(); }
};

struct TestReport {
  HypothesisSpec hypothesis;
  std::string parameter;
  double r = 0.0;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd theta_tilde;
  double loglik_hat = 0.0;
  double loglik_tilde = 0.0;
  bool full_converged = false;
  bool restricted_converged = false;
  std::map<Statistic, StatisticResult> statistics;
};

struct TestOptions {
  FitOptions fit;
  std::optional<Eigen::VectorXd> init;
};

// Fits the full and restricted models once and computes the requested
// statistics. A failure in one statistic is recorded in its entry and does
// not affect the others; fit failures propagate as exceptions.
TestReport run_tests(const BoundModel& model, const HypothesisSpec& hyp,
                     const std::vector<Statistic>& which, const TestOptions& options = {});

// Same, reusing existing fits.
TestReport run_tests(const BoundModel& model, const FitResult& full, const FitResult& restr,
                     const HypothesisSpec& hyp, const std::vector<Statistic>& which);

}  // namespace evreg
