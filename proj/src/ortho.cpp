#include "evreg/ortho.hpp"

#include <cmath>
#include <sstream>

#include "evreg/error.hpp"
#include "evreg/hots.hpp"

namespace evreg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd OrthogonalizedModel::removed(const Eigen::VectorXd& beta) const {
  const auto r = static_cast<Index>(interest);
  VectorXd out(beta.size() - 1);
  out.head(r) = beta.head(r);
  out.tail(beta.size() - r - 1) = beta.tail(beta.size() - r - 1);
  return out;
}

Eigen::VectorXd OrthogonalizedModel::to_theta(const Eigen::VectorXd& vartheta) const {
  return jacobian * vartheta;
}

Eigen::VectorXd OrthogonalizedModel::to_vartheta(const Eigen::VectorXd& theta) const {
  VectorXd out = theta + theta(static_cast<Index>(interest)) * w;
  out(static_cast<Index>(interest)) = theta(static_cast<Index>(interest));
  return out;
}

OrthogonalizedModel orthogonalize(const BoundModel& model, const HypothesisSpec& hyp,
                                  const Eigen::VectorXd& anchor) {
  const Index p = static_cast<Index>(model.num_params());
  const auto r = static_cast<Index>(hyp.param);
  if (hyp.param >= model.k()) {
    throw UnsupportedModel("orthogonal reparameterization needs the interest parameter in the location block");
  }
  const MatrixXd info = expected_info(model, anchor);

  std::vector<Index> rest;
  for (Index j = 0; j < p; ++j) {
    if (j != r) rest.push_back(j);
  }
  const Index q = p - 1;
  MatrixXd nn(q, q);
  VectorXd nr(q);
  for (Index i = 0; i < q; ++i) {
    nr(i) = info(rest[i], r);
    for (Index j = 0; j < q; ++j) nn(i, j) = info(rest[i], rest[j]);
  }
  const Eigen::LDLT<MatrixXd> ldlt(nn);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
    throw ConditioningError("nuisance block of the expected information is singular at the anchor");
  }
  const VectorXd sol = ldlt.solve(nr);

  OrthogonalizedModel om;
  om.interest = hyp.param;
  om.anchor = anchor;
  om.k = model.k();
  om.w = VectorXd::Zero(p);
  for (Index i = 0; i < q; ++i) om.w(rest[i]) = sol(i);
  om.jacobian = MatrixXd::Identity(p, p);
  om.jacobian.col(r) -= om.w;
  return om;
}

ReparamLikelihood reparam_likelihood(const BoundModel& model, const OrthogonalizedModel& om,
                                     const Eigen::VectorXd& vartheta) {
  const VectorXd theta = om.to_theta(vartheta);
  const LikelihoodState st = evaluate(model, theta);
  const MatrixXd& m = om.jacobian;
  const auto r = static_cast<Index>(om.interest);
  ReparamLikelihood out;
  out.loglik = st.loglik;
  out.score = m.transpose() * st.score;
  out.interest_score = out.score(r);
  out.observed = m.transpose() * st.observed * m;
  out.expected = m.transpose() * st.expected * m;
  out.interest_expected = out.expected(r, r);
  return out;
}

namespace {

MatrixXd drop_index(const MatrixXd& a, Index idx) {
  std::vector<Index> keep;
  for (Index j = 0; j < a.rows(); ++j) {
    if (j != idx) keep.push_back(j);
  }
  MatrixXd out(keep.size(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (std::size_t j = 0; j < keep.size(); ++j) out(i, j) = a(keep[i], keep[j]);
  }
  return out;
}

double checked_det(const MatrixXd& a, const char* what) {
  const double d = a.size() == 0 ? 1.0 : Eigen::PartialPivLU<MatrixXd>(a).determinant();
  if (!(d > 0.0) || !std::isfinite(d)) {
    std::ostringstream msg;
    msg << what << " is not positive definite (determinant " << d << ")";
    throw ConditioningError(msg.str());
  }
  return d;
}

}  // namespace

double r0_u(const BoundModel& model, const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp,
            Anchor anchor) {
  const OrthogonalizedModel om =
      orthogonalize(model, hyp, anchor == Anchor::Restricted ? restr.theta_hat : full.theta_hat);
  const auto r = static_cast<Index>(hyp.param);
  const ReparamLikelihood hat = reparam_likelihood(model, om, om.to_vartheta(full.theta_hat));
  const ReparamLikelihood tilde = reparam_likelihood(model, om, om.to_vartheta(restr.theta_hat));
  const double det_jpsi = checked_det(drop_index(tilde.observed, r), "nuisance block of J* at theta_tilde");
  const double det_j = checked_det(hat.observed, "J* at theta_hat");
  if (!(hat.interest_expected > 0.0) || !(tilde.interest_expected > 0.0)) {
    throw ConditioningError("interest block of I* is not positive");
  }
  const double mag = std::abs(tilde.interest_score) *
                     std::sqrt(det_jpsi * hat.interest_expected / (det_j * tilde.interest_expected));
  const double r_stat = signed_lr(full, restr, hyp);
  return r_stat < 0.0 ? -mag : mag;
}

double r0_statistic(const BoundModel& model, const FitResult& full, const FitResult& restr,
                    const HypothesisSpec& hyp, Anchor anchor) {
  const double r = signed_lr(full, restr, hyp);
  if (std::abs(r) < kNearZeroR) return r;
  return adjust(r, r0_u(model, full, restr, hyp, anchor));
}

}  // namespace evreg
