#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "evreg/fit.hpp"
#include "evreg/inference.hpp"
#include "evreg/model.hpp"

namespace evreg {

// Linear reparameterization theta = M vartheta making the interest
// coordinate r (a location coefficient) orthogonal to the rest at `anchor`:
//   theta_r = vartheta_r,   theta_j = vartheta_j - vartheta_r w_j  (j != r)
// with w = I_{(r)(r)}^{-1} I_{(r)r}. vartheta keeps the coordinate order of
// theta, so vartheta = (beta_r, kappa, tau) with kappa and tau in the slots
// of beta_(r) and gamma. w splits into A (the beta entries) and B (the gamma
// entries).
struct OrthogonalizedModel {
  std::size_t interest = 0;
  Eigen::VectorXd anchor;
  Eigen::VectorXd w;         // zero at index interest
  Eigen::MatrixXd jacobian;  // M = d theta / d vartheta, det M = 1
  std::size_t k = 0;

  Eigen::VectorXd a() const { return removed(w.head(static_cast<Eigen::Index>(k))); }
  Eigen::VectorXd b() const { return w.tail(w.size() - static_cast<Eigen::Index>(k)); }

  Eigen::VectorXd to_theta(const Eigen::VectorXd& vartheta) const;
  Eigen::VectorXd to_vartheta(const Eigen::VectorXd& theta) const;

 private:
  Eigen::VectorXd removed(const Eigen::VectorXd& beta) const;
};

// Throws UnsupportedModel when the interest parameter is a dispersion
// coefficient, ConditioningError when I_{(r)(r)} is singular at the anchor.
OrthogonalizedModel orthogonalize(const BoundModel& model, const HypothesisSpec& hyp,
                                  const Eigen::VectorXd& anchor);

struct ReparamLikelihood {
  double loglik = 0.0;
  double interest_score = 0.0;  // l*_{beta_r}
  Eigen::VectorXd score;
  Eigen::MatrixXd observed;     // M' J M
  Eigen::MatrixXd expected;     // M' I M
  double interest_expected = 0.0;  // I*_{beta_r beta_r}
};

ReparamLikelihood reparam_likelihood(const BoundModel& model, const OrthogonalizedModel& om,
                                     const Eigen::VectorXd& vartheta);

// Where A and B are evaluated.
enum class Anchor { Restricted, Unrestricted };

// U0 in the orthogonal parameterization; the sign is that of R.
double r0_u(const BoundModel& model, const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp,
            Anchor anchor = Anchor::Restricted);
double r0_statistic(const BoundModel& model, const FitResult& full, const FitResult& restr,
                    const HypothesisSpec& hyp, Anchor anchor = Anchor::Restricted);

}  // namespace evreg
