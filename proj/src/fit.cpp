#include "evreg/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "evreg/error.hpp"
#include "evreg/special.hpp"

namespace evreg {

std::string_view to_string(Direction d) { return d == Direction::Greater ? "greater" : "less"; }

Direction parse_direction(std::string_view text) {
  if (text == "greater") return Direction::Greater;
  if (text == "less") return Direction::Less;
  throw std::invalid_argument("unknown direction '" + std::string(text) + "' (expected greater or less)");
}

Eigen::VectorXd default_init(const BoundModel& model) {
  const auto n = static_cast<Eigen::Index>(model.n());
  const auto k = static_cast<Eigen::Index>(model.k());
  const auto m = static_cast<Eigen::Index>(model.m());
  const PredictorSpec& loc = model.spec().location;
  const double sign = loc.negated ? -1.0 : 1.0;
  const Eigen::MatrixXd& cols = model.location().columns();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k + m);
  Eigen::VectorXd target = model.y();
  std::vector<Eigen::Index> linear;
  Eigen::Index intercept = -1;
  for (Eigen::Index j = 0; j < k; ++j) {
    const TermKind kind = loc.terms[static_cast<std::size_t>(j)].kind;
    if (kind == TermKind::Power) {
      theta(j) = 1.0;
      target -= sign * cols.col(j);
    } else {
      if (kind == TermKind::Intercept) intercept = j;
      linear.push_back(j);
    }
  }

  const auto p = static_cast<Eigen::Index>(linear.size());
  Eigen::MatrixXd design(n, p);
  for (Eigen::Index c = 0; c < p; ++c) design.col(c) = sign * cols.col(linear[static_cast<std::size_t>(c)]);

  double resid_var = 0.0;
  bool ok = true;
  if (p > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p) {
      ok = false;
    } else {
      const Eigen::VectorXd coef = qr.solve(target);
      for (Eigen::Index c = 0; c < p; ++c) theta(linear[static_cast<std::size_t>(c)]) = coef(c);
      const Eigen::VectorXd resid = target - design * coef;
      resid_var = resid.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n - p, 1));
    }
  } else {
    const double mean = target.mean();
    resid_var = (target.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  }
  if (!ok) {
    theta.head(k).setZero();
    const double mean = model.y().mean();
    resid_var = (model.y().array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  }

  double sigma0 = std::sqrt(6.0 * resid_var) / std::numbers::pi;
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) sigma0 = 1.0;
  // E(y) = mu + Euler * sigma for the maximum form.
  if (ok && intercept >= 0) theta(intercept) -= sign * special::kEuler * sigma0;

  const PredictorSpec& disp = model.spec().dispersion;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (disp.terms[static_cast<std::size_t>(j)].kind == TermKind::Intercept) {
      theta(k + j) = model.spec().dispersion_link.apply(sigma0);
    } else if (disp.terms[static_cast<std::size_t>(j)].kind == TermKind::Power) {
      theta(k + j) = 1.0;
    }
  }
  return theta;
}

namespace {

// -loglik restricted to a subset of free coordinates.
class Objective {
 public:
  Objective(const BoundModel& model, Eigen::VectorXd base, std::vector<Eigen::Index> free)
      : model_(model), base_(std::move(base)), free_(std::move(free)) {}

  Eigen::Index dim() const { return static_cast<Eigen::Index>(free_.size()); }

  Eigen::VectorXd expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd theta = base_;
    for (Eigen::Index i = 0; i < dim(); ++i) theta(free_[static_cast<std::size_t>(i)]) = x(i);
    return theta;
  }

  Eigen::VectorXd restrict(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd x(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) x(i) = theta(free_[static_cast<std::size_t>(i)]);
    return x;
  }

  Eigen::MatrixXd restrict(const Eigen::MatrixXd& full) const {
    Eigen::MatrixXd out(dim(), dim());
    for (Eigen::Index i = 0; i < dim(); ++i)
      for (Eigen::Index j = 0; j < dim(); ++j)
        out(i, j) = full(free_[static_cast<std::size_t>(i)], free_[static_cast<std::size_t>(j)]);
    return out;
  }

  // +inf where the likelihood cannot be evaluated.
  double value(const Eigen::VectorXd& x) const {
    try {
      const double l = loglik(model_, expand(x));
      return std::isfinite(l) ? -l : std::numeric_limits<double>::infinity();
    } catch (const EvaluationError&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    return -restrict(score(model_, expand(x)));
  }

  const BoundModel& model() const { return model_; }
  const std::vector<Eigen::Index>& free() const { return free_; }

 private:
  const BoundModel& model_;
  Eigen::VectorXd base_;
  std::vector<Eigen::Index> free_;
};

Eigen::MatrixXd initial_inverse_hessian(const Objective& obj, const Eigen::VectorXd& x) {
  try {
    const Eigen::MatrixXd info = obj.restrict(expected_info(obj.model(), obj.expand(x)));
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(obj.dim(), obj.dim()));
      if (inv.allFinite()) return inv;
    }
  } catch (const EvaluationError&) {
  }
  return Eigen::MatrixXd::Identity(obj.dim(), obj.dim());
}

struct BfgsOutcome {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::string message;
};

BfgsOutcome bfgs(const Objective& obj, Eigen::VectorXd x, const FitOptions& opt) {
  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  BfgsOutcome out;
  double f = obj.value(x);
  if (!std::isfinite(f)) throw EvaluationError("log-likelihood is not finite at the initial point");
  Eigen::VectorXd g = obj.gradient(x);
  Eigen::MatrixXd hinv = initial_inverse_hessian(obj, x);
  bool fresh = true;

  for (;;) {
    out.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (out.grad_norm <= opt.gradient_tolerance * std::max(1.0, std::abs(f))) {
      out.converged = true;
      out.message = "gradient tolerance reached";
      break;
    }
    if (out.iterations >= opt.max_iterations) {
      out.message = "maximum iterations reached";
      break;
    }
    Eigen::VectorXd d = -hinv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      hinv = initial_inverse_hessian(obj, x);
      fresh = true;
      d = -hinv * g;
      slope = g.dot(d);
      if (!(slope < 0.0)) {
        d = -g;
        slope = -g.squaredNorm();
      }
    }

    // Armijo backtracking; decreases below the rounding level of f are
    // accepted so the gradient test can still be met near the optimum.
    const double slack = 16.0 * kEps * std::abs(f);
    double step = 1.0;
    double fn = 0.0;
    Eigen::VectorXd xn;
    bool accepted = false;
    const double dnorm = d.norm();
    while (step * dnorm > opt.step_tolerance * (1.0 + x.norm())) {
      xn = x + step * d;
      fn = obj.value(xn);
      if (fn <= f + kArmijo * step * slope + slack) {
        accepted = true;
        break;
      }
      step *= kShrink;
    }
    ++out.iterations;
    if (!accepted) {
      if (!fresh) {
        hinv = initial_inverse_hessian(obj, x);
        fresh = true;
        continue;
      }
      out.message = "line search stalled";
      break;
    }

    const Eigen::VectorXd gn = obj.gradient(xn);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd yv = gn - g;
    const double sy = s.dot(yv);
    if (sy > 1e-14 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * yv;
      // (I - rho s y') H (I - rho y s') + rho s s'
      hinv += rho * ((1.0 + rho * yv.dot(hy)) * (s * s.transpose()) - hy * s.transpose() -
                     s * hy.transpose());
      fresh = false;
    }
    x = xn;
    f = fn;
    g = gn;
  }
  out.x = std::move(x);
  return out;
}

FitResult finish(const Objective& obj, const BfgsOutcome& run) {
  FitResult r;
  r.theta_hat = obj.expand(run.x);
  r.state = evaluate(obj.model(), r.theta_hat);
  r.loglik_hat = r.state.loglik;
  r.converged = run.converged;
  r.iterations = run.iterations;
  r.grad_norm = run.grad_norm;
  r.message = run.message;
  r.se = Eigen::VectorXd::Zero(r.theta_hat.size());
  const Eigen::MatrixXd info = obj.restrict(r.state.expected);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (lu.isInvertible()) {
    const Eigen::VectorXd var = lu.inverse().diagonal();
    for (Eigen::Index i = 0; i < obj.dim(); ++i) {
      r.se(obj.free()[static_cast<std::size_t>(i)]) = std::sqrt(std::max(var(i), 0.0));
    }
  } else {
    r.se.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return r;
}

}  // namespace

FitResult fit_full(const BoundModel& model, const std::optional<Eigen::VectorXd>& init,
                   const FitOptions& options) {
  const auto p = static_cast<Eigen::Index>(model.num_params());
  Eigen::VectorXd start = init ? *init : default_init(model);
  if (start.size() != p) throw std::invalid_argument("initial theta has the wrong length");
  std::vector<Eigen::Index> free(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) free[static_cast<std::size_t>(i)] = i;
  Objective obj(model, start, std::move(free));
  return finish(obj, bfgs(obj, start, options));
}

FitResult fit_restricted(const BoundModel& model, const HypothesisSpec& hyp,
                         const std::optional<Eigen::VectorXd>& init, const FitOptions& options) {
  const auto p = static_cast<Eigen::Index>(model.num_params());
  if (hyp.param >= model.num_params()) throw std::invalid_argument("hypothesis parameter out of range");
  Eigen::VectorXd start = init ? *init : default_init(model);
  if (start.size() != p) throw std::invalid_argument("initial theta has the wrong length");
  const auto fixed = static_cast<Eigen::Index>(hyp.param);
  start(fixed) = hyp.null_value;
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (i != fixed) free.push_back(i);
  }
  Objective obj(model, start, std::move(free));
  FitResult r = finish(obj, bfgs(obj, obj.restrict(start), options));
  r.restricted_to = Restriction{hyp.param, hyp.null_value};
  return r;
}

}  // namespace evreg
