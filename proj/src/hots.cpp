#include "evreg/hots.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evreg/error.hpp"
#include "evreg/ortho.hpp"
#include "evreg/special.hpp"

namespace evreg {

std::string_view to_string(Statistic s) {
  switch (s) {
    case Statistic::R: return "R";
    case Statistic::R0star: return "R0star";
    case Statistic::Rbar: return "Rbar";
    case Statistic::Rhat: return "Rhat";
    case Statistic::Rtilde: return "Rtilde";
    case Statistic::Rstar: return "Rstar";
  }
  return "?";
}

Statistic parse_statistic(std::string_view text) {
  for (Statistic s : kAllStatistics) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown statistic '" + std::string(text) + "'");
}

std::vector<Statistic> parse_statistic_list(std::string_view text) {
  if (text == "all") return {kAllStatistics.begin(), kAllStatistics.end()};
  std::vector<Statistic> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    std::string_view item = text.substr(start, comma == text.npos ? text.npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    const Statistic s = parse_statistic(item);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    if (comma == text.npos) break;
    start = comma + 1;
  }
  return out;
}

CrossFitDiagonals cross_fit_diagonals(const DiagonalBundle& hat, const DiagonalBundle& tilde) {
  const Eigen::Index n = hat.n();
  CrossFitDiagonals cf;
  cf.c = hat.sigma.cwiseQuotient(tilde.sigma);
  cf.d = (hat.mu - tilde.mu).cwiseQuotient(tilde.sigma);
  cf.dbreve = (-cf.d.array()).exp().matrix();
  cf.m.resize(n);
  cf.n.resize(n);
  cf.p.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double a = 1.0 + cf.c(t);
    if (!(a < 170.0)) {
      throw EvaluationError("dispersion ratio sigma_hat / sigma_tilde = " + std::to_string(cf.c(t)) +
                            " is too large for the gamma function terms");
    }
    cf.m(t) = special::gamma(a);
    cf.n(t) = special::gamma1(a);
    cf.p(t) = special::gamma2(a);
  }
  return cf;
}

namespace {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// A' diag(w) B
MatrixXd weighted_cross(const MatrixXd& a, const ArrayXd& w, const MatrixXd& b) {
  return a.transpose() * w.matrix().asDiagonal() * b;
}

}  // namespace

CovarianceTerms skovgaard_terms(const DiagonalBundle& hat, const DiagonalBundle& tilde) {
  const CrossFitDiagonals cf = cross_fit_diagonals(hat, tilde);
  const Eigen::Index k = hat.X.cols();
  const Eigen::Index m = hat.Z.cols();
  const ArrayXd c = cf.c.array(), d = cf.d.array(), db = cf.dbreve.array();
  const ArrayXd M = cf.m.array(), N = cf.n.array(), P = cf.p.array();
  const ArrayXd th = hat.t.array() / hat.sigma.array();      // Phi_hat^{-1} T_hat
  const ArrayXd hh = hat.h.array() / hat.sigma.array();      // Phi_hat^{-1} H_hat
  const ArrayXd tt = tilde.t.array() / tilde.sigma.array();  // T_tilde Phi_tilde^{-1}
  const ArrayXd ht = tilde.h.array() / tilde.sigma.array();  // H_tilde Phi_tilde^{-1}
  const double e = special::kEuler;

  CovarianceTerms out;
  out.q.resize(k + m);
  out.q.head(k) = hat.X.transpose() * (th * c * (1.0 - M * db)).matrix();
  out.q.tail(m) = hat.Z.transpose() * (hh * (c * (e + N * db) - 1.0)).matrix();

  // E_hat[U(theta_hat) U(theta_tilde)'] block by block; rows follow theta_hat.
  MatrixXd u(k + m, k + m);
  u.topLeftCorner(k, k) = weighted_cross(hat.X, th * c * M * db * tt, tilde.X);
  u.topRightCorner(k, m) = weighted_cross(hat.X, th * c * (1.0 + db * (-M - c * N + M * d)) * ht, tilde.Z);
  u.bottomLeftCorner(m, k) = -weighted_cross(hat.Z, hh * c * N * db * tt, tilde.X);
  u.bottomRightCorner(m, m) = weighted_cross(hat.Z, hh * c * (e + db * (N + c * P - N * d)) * ht, tilde.Z);
  out.upsilon = std::move(u);
  out.information = expected_info(hat);
  return out;
}

CovarianceTerms severini_terms(const DiagonalBundle& hat, const DiagonalBundle& tilde) {
  const Eigen::Index k = hat.X.cols();
  const Eigen::Index m = hat.Z.cols();
  const ArrayXd dl = hat.ell.array() - tilde.ell.array();
  // Score factors: location (I - Zbreve), dispersion (-I + Z - Z Zbreve).
  const ArrayXd loc_h = 1.0 - hat.zbreve.array();
  const ArrayXd disp_h = -1.0 + hat.z.array() - hat.z.array() * hat.zbreve.array();
  const ArrayXd loc_t = 1.0 - tilde.zbreve.array();
  const ArrayXd disp_t = -1.0 + tilde.z.array() - tilde.z.array() * tilde.zbreve.array();
  const ArrayXd th = hat.t.array() / hat.sigma.array();
  const ArrayXd hh = hat.h.array() / hat.sigma.array();
  const ArrayXd tt = tilde.t.array() / tilde.sigma.array();
  const ArrayXd ht = tilde.h.array() / tilde.sigma.array();

  CovarianceTerms out;
  out.q.resize(k + m);
  out.q.head(k) = hat.X.transpose() * (th * dl * loc_h).matrix();
  out.q.tail(m) = hat.Z.transpose() * (hh * dl * disp_h).matrix();

  MatrixXd& u = out.upsilon;
  u.resize(k + m, k + m);
  u.topLeftCorner(k, k) = weighted_cross(tilde.X, tt * loc_t * loc_h * th, hat.X);
  u.topRightCorner(k, m) = weighted_cross(tilde.X, tt * loc_t * disp_h * hh, hat.Z);
  u.bottomLeftCorner(m, k) = weighted_cross(tilde.Z, ht * disp_t * loc_h * th, hat.X);
  u.bottomRightCorner(m, m) = weighted_cross(tilde.Z, ht * disp_t * disp_h * hh, hat.Z);
  const MatrixXd s_hat = per_observation_scores(hat);
  out.information = s_hat.transpose() * s_hat;
  return out;
}

VectorXd response_gradient(const DiagonalBundle& b) {
  return ((b.zbreve.array() - 1.0) / b.sigma.array()).matrix();
}

MatrixXd response_theta_gradient(const DiagonalBundle& b) {
  const Eigen::Index k = b.X.cols();
  const Eigen::Index m = b.Z.cols();
  const ArrayXd s2 = b.sigma.array().square();
  const ArrayXd w = b.zbreve.array();
  const ArrayXd z = b.z.array();
  MatrixXd a(k + m, b.n());
  a.topRows(k) = b.X.transpose() * (b.t.array() * w / s2).matrix().asDiagonal();
  a.bottomRows(m) = b.Z.transpose() * (b.h.array() * (1.0 - w + z * w) / s2).matrix().asDiagonal();
  return a;
}

MatrixXd ancillary_directions(const DiagonalBundle& b) {
  const Eigen::Index k = b.X.cols();
  const Eigen::Index m = b.Z.cols();
  MatrixXd v(b.n(), k + m);
  v.leftCols(k) = b.t.asDiagonal() * b.X;
  v.rightCols(m) = (b.z.array() * b.h.array()).matrix().asDiagonal() * b.Z;
  return v;
}

double signed_lr(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp) {
  const double drop = full.loglik_hat - restr.loglik_hat;
  const double tol = 1e-8 * std::max(1.0, std::abs(full.loglik_hat));
  if (drop < -tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "restricted log-likelihood " << restr.loglik_hat << " exceeds unrestricted " << full.loglik_hat;
    throw InconsistentFits(msg.str());
  }
  const double diff = full.theta_hat(static_cast<Eigen::Index>(hyp.param)) - hyp.null_value;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  return sign * std::sqrt(2.0 * std::max(drop, 0.0));
}

double adjust(double r, double u) {
  if (!std::isfinite(r) || !std::isfinite(u)) throw std::domain_error("adjust: non-finite R or U");
  if (std::abs(r) < kNearZeroR) return r;
  if (u == 0.0) throw std::domain_error("adjust: U is zero, adjustment undefined");
  return r + std::log(std::abs(u / r)) / r;
}

namespace {

// Removes row `row` of a matrix.
MatrixXd drop_row(const MatrixXd& a, Eigen::Index row) {
  MatrixXd out(a.rows() - 1, a.cols());
  out.topRows(row) = a.topRows(row);
  out.bottomRows(a.rows() - row - 1) = a.bottomRows(a.rows() - row - 1);
  return out;
}

MatrixXd drop_row_col(const MatrixXd& a, Eigen::Index idx) {
  const MatrixXd rows = drop_row(a, idx);
  return drop_row(rows.transpose(), idx).transpose();
}

double determinant(const MatrixXd& a) { return Eigen::PartialPivLU<MatrixXd>(a).determinant(); }

double positive_det(const MatrixXd& a, const char* what) {
  const double d = determinant(a);
  if (!(d > 0.0) || !std::isfinite(d)) {
    std::ostringstream msg;
    msg << what << " is not positive definite (determinant " << d << ")";
    throw ConditioningError(msg.str());
  }
  return d;
}

// [first; rest with row `drop` removed]
MatrixXd stack_with_row(const VectorXd& first, const MatrixXd& rest, Eigen::Index drop) {
  MatrixXd out(rest.rows(), rest.cols());
  out.row(0) = first.transpose();
  out.bottomRows(rest.rows() - 1) = drop_row(rest, drop);
  return out;
}

void require_restricted(const FitResult& restr, const HypothesisSpec& hyp) {
  if (!restr.restricted_to || restr.restricted_to->param != hyp.param) {
    throw std::invalid_argument("restricted fit does not match the hypothesis");
  }
}

// Ratio shared by Ubar and Uhat: |(q'; Upsilon_psi)| |I_hat|^{-1} |J_hat|^{1/2} |J~_psipsi|^{-1/2}.
double covariance_u(const CovarianceTerms& terms, const FitResult& full, const FitResult& restr,
                    const HypothesisSpec& hyp) {
  const auto idx = static_cast<Eigen::Index>(hyp.param);
  const double num = determinant(stack_with_row(terms.q, terms.upsilon, idx));
  const double det_i = positive_det(terms.information, "information at theta_hat");
  const double det_j = positive_det(full.state.observed, "observed information at theta_hat");
  const double det_jpsi = positive_det(drop_row_col(restr.state.observed, idx),
                                       "nuisance block of observed information at theta_tilde");
  return num / det_i * std::sqrt(det_j) / std::sqrt(det_jpsi);
}

}  // namespace

double skovgaard_u(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp) {
  require_restricted(restr, hyp);
  return covariance_u(skovgaard_terms(full.state.bundle, restr.state.bundle), full, restr, hyp);
}

double severini_u(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp) {
  require_restricted(restr, hyp);
  return covariance_u(severini_terms(full.state.bundle, restr.state.bundle), full, restr, hyp);
}

double fraser_u(const FitResult& full, const FitResult& restr, const HypothesisSpec& hyp) {
  require_restricted(restr, hyp);
  const auto idx = static_cast<Eigen::Index>(hyp.param);
  const DiagonalBundle& hat = full.state.bundle;
  const DiagonalBundle& tilde = restr.state.bundle;
  const MatrixXd v = ancillary_directions(hat);
  const VectorXd ly = response_gradient(hat) - response_gradient(tilde);
  const MatrixXd a_tilde = response_theta_gradient(tilde);
  const MatrixXd a_hat = response_theta_gradient(hat);

  MatrixXd top(a_tilde.rows(), v.cols());
  top.row(0) = ly.transpose() * v;
  top.bottomRows(a_tilde.rows() - 1) = drop_row(a_tilde, idx) * v;
  const double det_av = determinant(a_hat * v);
  if (det_av == 0.0 || !std::isfinite(det_av)) {
    throw ConditioningError("sample-space derivative matrix at theta_hat is singular");
  }
  const double det_j = positive_det(full.state.observed, "observed information at theta_hat");
  const double det_jpsi = positive_det(drop_row_col(restr.state.observed, idx),
                                       "nuisance block of observed information at theta_tilde");
  return determinant(top) / det_av * std::sqrt(det_j) / std::sqrt(det_jpsi);
}

double barndorff_u(const BoundModel& model, const FitResult& full, const FitResult& restr,
                   const HypothesisSpec& hyp) {
  if (!model.is_linear_homoskedastic()) {
    throw UnsupportedModel(
        "Rstar requires a linear location predictor with constant identity-link dispersion");
  }
  require_restricted(restr, hyp);
  const auto idx = static_cast<Eigen::Index>(hyp.param);
  const DiagonalBundle& hat = full.state.bundle;
  const DiagonalBundle& tilde = restr.state.bundle;
  const Eigen::Index n = hat.n();
  const Eigen::Index k = hat.X.cols();
  const double s_hat = hat.sigma(0);
  const double s_tilde = tilde.sigma(0);

  // Sample-space directions: y = X beta_hat + sigma_hat a, so dy/d(beta_hat, sigma_hat) = (X, a).
  MatrixXd dir(n, k + 1);
  dir.leftCols(k) = hat.X;
  dir.col(k) = hat.z;

  const VectorXd first = ((hat.zbreve.array() - 1.0) / s_hat - (tilde.zbreve.array() - 1.0) / s_tilde).matrix();
  MatrixXd a(k + 1, n);
  a.topRows(k) = tilde.X.transpose() * tilde.zbreve.asDiagonal();
  a.row(k) = (1.0 - tilde.zbreve.array() + tilde.z.array() * tilde.zbreve.array()).matrix().transpose();
  a /= s_tilde * s_tilde;

  MatrixXd top(k + 1, k + 1);
  top.row(0) = first.transpose() * dir;
  top.bottomRows(k) = drop_row(a, idx) * dir;
  const double det_j = positive_det(full.state.observed, "observed information at theta_hat");
  const double det_jpsi = positive_det(drop_row_col(restr.state.observed, idx),
                                       "nuisance block of observed information at theta_tilde");
  return determinant(top) / std::sqrt(det_jpsi) / std::sqrt(det_j);
}

double p_value(double stat, Direction direction) {
  const double phi = special::normal_cdf(stat);
  return direction == Direction::Less ? phi : special::normal_cdf(-stat);
}

TestReport run_tests(const BoundModel& model, const FitResult& full, const FitResult& restr,
                     const HypothesisSpec& hyp, const std::vector<Statistic>& which) {
  TestReport rep;
  rep.hypothesis = hyp;
  rep.parameter = model.spec().parameter_names().at(hyp.param);
  rep.theta_hat = full.theta_hat;
  rep.theta_tilde = restr.theta_hat;
  rep.loglik_hat = full.loglik_hat;
  rep.loglik_tilde = restr.loglik_hat;
  rep.full_converged = full.converged;
  rep.restricted_converged = restr.converged;
  rep.r = signed_lr(full, restr, hyp);
  const double r = rep.r;
  const bool near_zero = std::abs(r) < kNearZeroR;

  for (Statistic s : which) {
    StatisticResult res;
    try {
      std::optional<double> u;
      switch (s) {
        case Statistic::R: break;
        case Statistic::Rstar:
          if (!model.is_linear_homoskedastic()) {
            throw UnsupportedModel("Rstar requires a linear homoskedastic model with identity links");
          }
          if (!near_zero) u = barndorff_u(model, full, restr, hyp);
          break;
        case Statistic::R0star:
          if (!near_zero) u = r0_u(model, full, restr, hyp);
          break;
        case Statistic::Rbar:
          if (!near_zero) u = skovgaard_u(full, restr, hyp);
          break;
        case Statistic::Rhat:
          if (!near_zero) u = severini_u(full, restr, hyp);
          break;
        case Statistic::Rtilde:
          if (!near_zero) u = fraser_u(full, restr, hyp);
          break;
      }
      const double value = u ? adjust(r, *u) : r;
      if (!std::isfinite(value)) throw std::domain_error("statistic is not finite");
      res.value = value;
      res.u = u;
      res.near_zero = near_zero && s != Statistic::R;
      res.p_value = p_value(value, hyp.direction);
    } catch (const UnsupportedModel& e) {
      res.unsupported = true;
      res.error = e.what();
    } catch (const std::exception& e) {
      res.error = e.what();
    }
    rep.statistics[s] = std::move(res);
  }
  return rep;
}

TestReport run_tests(const BoundModel& model, const HypothesisSpec& hyp, const std::vector<Statistic>& which,
                     const TestOptions& options) {
  const FitResult full = fit_full(model, options.init, options.fit);
  const FitResult restr = fit_restricted(model, hyp, full.theta_hat, options.fit);
  return run_tests(model, full, restr, hyp, which);
}

}  // namespace evreg
