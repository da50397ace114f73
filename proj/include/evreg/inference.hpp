#pragma once

#include <Eigen/Dense>

#include "evreg/model.hpp"

namespace evreg {

// Per-observation quantities at one parameter point. Vectors stand for the
// diagonals of the n x n matrices they name; X and Z are the derivative
// matrices of the location and dispersion predictors.
struct DiagonalBundle {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;   // Phi
  Eigen::VectorXd z;       // (y - mu) / sigma
  Eigen::VectorXd zbreve;  // exp(-z)
  Eigen::VectorXd t;       // 1 / g'(mu)
  Eigen::VectorXd h;       // 1 / h'(sigma)
  Eigen::VectorXd ell;     // per-observation log-likelihood
  Eigen::MatrixXd X;       // n x k
  Eigen::MatrixXd Z;       // n x m

  Eigen::Index n() const { return z.size(); }
};

struct LikelihoodState {
  Eigen::VectorXd theta;
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd observed;  // J
  Eigen::MatrixXd expected;  // I
  DiagonalBundle bundle;
  Eigen::MatrixXd perobs;  // n x (k+m), row t = d l_t / d theta
};

// Gamma''(2) = (1 - Euler)^2 + pi^2/6 - 1; enters the dispersion block of I.
double gamma2_at_two();

// Throws EvaluationError if any sigma_t is not finite and positive, or if
// exp(-z_t) overflows.
DiagonalBundle make_bundle(const BoundModel& model, const Eigen::VectorXd& theta);

// Sum of per-observation log densities. Returns -inf when exp(-z_t)
// overflows; throws EvaluationError for invalid dispersions.
double loglik(const BoundModel& model, const Eigen::VectorXd& theta);
double loglik(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta);

Eigen::MatrixXd per_observation_scores(const DiagonalBundle& b);
Eigen::VectorXd score(const BoundModel& model, const Eigen::VectorXd& theta);
Eigen::VectorXd score(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta);

Eigen::MatrixXd observed_info(const BoundModel& model, const Eigen::VectorXd& theta);
Eigen::MatrixXd observed_info(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta);

Eigen::MatrixXd expected_info(const DiagonalBundle& b);
Eigen::MatrixXd expected_info(const BoundModel& model, const Eigen::VectorXd& theta);
Eigen::MatrixXd expected_info(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta);

// Everything at once; throws EvaluationError where loglik would be -inf.
LikelihoodState evaluate(const BoundModel& model, const Eigen::VectorXd& theta);

// Column sums of the per-observation score rows, accumulated in row order.
Eigen::VectorXd sum_rows(const Eigen::MatrixXd& perobs);

}  // namespace evreg
