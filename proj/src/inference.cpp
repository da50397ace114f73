#include "evreg/inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "evreg/error.hpp"
#include "evreg/special.hpp"

namespace evreg {

double gamma2_at_two() {
  static const double value = special::gamma2(2.0);
  return value;
}

namespace {

struct PointEval {
  DiagonalBundle bundle;
  Eigen::VectorXd t2;     // d^2 mu / d eta^2
  Eigen::VectorXd h2;     // d^2 sigma / d delta^2
  Eigen::MatrixXd xcurv;  // d^2 eta / d beta_j^2
  Eigen::MatrixXd zcurv;
  bool overflow = false;
};

PointEval evaluate_point(const BoundModel& model, const Eigen::VectorXd& theta) {
  const auto k = static_cast<Eigen::Index>(model.k());
  const auto m = static_cast<Eigen::Index>(model.m());
  if (theta.size() != k + m) {
    throw std::invalid_argument("theta has " + std::to_string(theta.size()) + " entries, expected " +
                                std::to_string(k + m));
  }
  const Link& g = model.spec().location_link;
  const Link& hl = model.spec().dispersion_link;
  PredictorEval loc = model.location().evaluate(theta.head(k));
  PredictorEval disp = model.dispersion().evaluate(theta.tail(m));

  const Eigen::Index n = static_cast<Eigen::Index>(model.n());
  PointEval out;
  DiagonalBundle& b = out.bundle;
  b.mu.resize(n);
  b.sigma.resize(n);
  b.z.resize(n);
  b.zbreve.resize(n);
  b.t.resize(n);
  b.h.resize(n);
  b.ell.resize(n);
  out.t2.resize(n);
  out.h2.resize(n);
  const Eigen::VectorXd& y = model.y();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = loc.value(i);
    const double delta = disp.value(i);
    const double mu = g.inverse(eta);
    const double sigma = hl.inverse(delta);
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) {
      throw EvaluationError("invalid location/dispersion at observation " + std::to_string(i));
    }
    const double z = (y(i) - mu) / sigma;
    const double w = std::exp(-z);
    if (!std::isfinite(w)) out.overflow = true;
    b.mu(i) = mu;
    b.sigma(i) = sigma;
    b.z(i) = z;
    b.zbreve(i) = w;
    b.t(i) = g.inverse_d1(eta);
    b.h(i) = hl.inverse_d1(delta);
    b.ell(i) = -std::log(sigma) - z - w;
    out.t2(i) = g.inverse_d2(eta);
    out.h2(i) = hl.inverse_d2(delta);
  }
  b.X = std::move(loc.jacobian);
  b.Z = std::move(disp.jacobian);
  out.xcurv = std::move(loc.curvature);
  out.zcurv = std::move(disp.curvature);
  return out;
}

double sum_ordered(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v(i);
  return s;
}

void require_finite(const PointEval& pe) {
  if (pe.overflow) throw EvaluationError("exp(-z) overflows; log-likelihood is -inf");
}

Eigen::MatrixXd observed_from(const PointEval& pe) {
  const DiagonalBundle& b = pe.bundle;
  const Eigen::Index k = b.X.cols();
  const Eigen::Index m = b.Z.cols();
  const Eigen::ArrayXd s2 = b.sigma.array().square();
  const Eigen::ArrayXd z = b.z.array();
  const Eigen::ArrayXd w = b.zbreve.array();
  const Eigen::ArrayXd t = b.t.array();
  const Eigen::ArrayXd h = b.h.array();

  const Eigen::ArrayXd l_mu = (1.0 - w) / b.sigma.array();
  const Eigen::ArrayXd l_sigma = (-1.0 + z - z * w) / b.sigma.array();
  // Negated second derivatives of l_t with respect to (mu, sigma).
  const Eigen::ArrayXd j_mumu = w / s2;
  const Eigen::ArrayXd j_musigma = (1.0 - w + z * w) / s2;
  const Eigen::ArrayXd j_sigsig = (-1.0 + 2.0 * z - 2.0 * z * w + z * z * w) / s2;

  Eigen::MatrixXd J(k + m, k + m);
  const Eigen::VectorXd wbb = (t * t * j_mumu - l_mu * pe.t2.array()).matrix();
  J.topLeftCorner(k, k) = b.X.transpose() * wbb.asDiagonal() * b.X;
  J.topLeftCorner(k, k).diagonal() -= pe.xcurv.transpose() * (l_mu * t).matrix();

  const Eigen::VectorXd wbg = (t * h * j_musigma).matrix();
  J.topRightCorner(k, m) = b.X.transpose() * wbg.asDiagonal() * b.Z;
  J.bottomLeftCorner(m, k) = J.topRightCorner(k, m).transpose();

  const Eigen::VectorXd wgg = (h * h * j_sigsig - l_sigma * pe.h2.array()).matrix();
  J.bottomRightCorner(m, m) = b.Z.transpose() * wgg.asDiagonal() * b.Z;
  J.bottomRightCorner(m, m).diagonal() -= pe.zcurv.transpose() * (l_sigma * h).matrix();
  return 0.5 * (J + J.transpose());
}

}  // namespace

DiagonalBundle make_bundle(const BoundModel& model, const Eigen::VectorXd& theta) {
  PointEval pe = evaluate_point(model, theta);
  require_finite(pe);
  return std::move(pe.bundle);
}

double loglik(const BoundModel& model, const Eigen::VectorXd& theta) {
  const PointEval pe = evaluate_point(model, theta);
  if (pe.overflow) return -std::numeric_limits<double>::infinity();
  return sum_ordered(pe.bundle.ell);
}

double loglik(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta) {
  return loglik(BoundModel(model, data), theta);
}

Eigen::MatrixXd per_observation_scores(const DiagonalBundle& b) {
  const Eigen::Index k = b.X.cols();
  const Eigen::Index m = b.Z.cols();
  const Eigen::ArrayXd z = b.z.array();
  const Eigen::ArrayXd w = b.zbreve.array();
  const Eigen::VectorXd fb = ((1.0 - w) * b.t.array() / b.sigma.array()).matrix();
  const Eigen::VectorXd fg = ((-1.0 + z - z * w) * b.h.array() / b.sigma.array()).matrix();
  Eigen::MatrixXd rows(b.n(), k + m);
  rows.leftCols(k) = fb.asDiagonal() * b.X;
  rows.rightCols(m) = fg.asDiagonal() * b.Z;
  return rows;
}

Eigen::VectorXd sum_rows(const Eigen::MatrixXd& perobs) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(perobs.cols());
  for (Eigen::Index i = 0; i < perobs.rows(); ++i) {
    for (Eigen::Index j = 0; j < perobs.cols(); ++j) s(j) += perobs(i, j);
  }
  return s;
}

Eigen::VectorXd score(const BoundModel& model, const Eigen::VectorXd& theta) {
  return sum_rows(per_observation_scores(make_bundle(model, theta)));
}

Eigen::VectorXd score(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta) {
  return score(BoundModel(model, data), theta);
}

Eigen::MatrixXd observed_info(const BoundModel& model, const Eigen::VectorXd& theta) {
  const PointEval pe = evaluate_point(model, theta);
  require_finite(pe);
  return observed_from(pe);
}

Eigen::MatrixXd observed_info(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta) {
  return observed_info(BoundModel(model, data), theta);
}

Eigen::MatrixXd expected_info(const DiagonalBundle& b) {
  const Eigen::Index k = b.X.cols();
  const Eigen::Index m = b.Z.cols();
  const Eigen::MatrixXd xs = (b.t.array() / b.sigma.array()).matrix().asDiagonal() * b.X;
  const Eigen::MatrixXd zs = (b.h.array() / b.sigma.array()).matrix().asDiagonal() * b.Z;
  Eigen::MatrixXd I(k + m, k + m);
  I.topLeftCorner(k, k) = xs.transpose() * xs;
  I.topRightCorner(k, m) = (special::kEuler - 1.0) * (xs.transpose() * zs);
  I.bottomLeftCorner(m, k) = I.topRightCorner(k, m).transpose();
  I.bottomRightCorner(m, m) = (1.0 + gamma2_at_two()) * (zs.transpose() * zs);
  return I;
}

Eigen::MatrixXd expected_info(const BoundModel& model, const Eigen::VectorXd& theta) {
  // Only sigma must be valid here; the response plays no role.
  const PointEval pe = evaluate_point(model, theta);
  return expected_info(pe.bundle);
}

Eigen::MatrixXd expected_info(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta) {
  return expected_info(BoundModel(model, data), theta);
}

LikelihoodState evaluate(const BoundModel& model, const Eigen::VectorXd& theta) {
  PointEval pe = evaluate_point(model, theta);
  require_finite(pe);
  LikelihoodState s;
  s.theta = theta;
  s.loglik = sum_ordered(pe.bundle.ell);
  s.perobs = per_observation_scores(pe.bundle);
  s.score = sum_rows(s.perobs);
  s.observed = observed_from(pe);
  s.expected = expected_info(pe.bundle);
  s.bundle = std::move(pe.bundle);
  return s;
}

}  // namespace evreg
