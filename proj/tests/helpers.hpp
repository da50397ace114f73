#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>

#include "evreg/datasets.hpp"
#include "evreg/model.hpp"
#include "evreg/rng.hpp"

namespace evreg::testing {

inline ModelSpec make_model(const char* location, const char* dispersion = "1", Tail tail = Tail::Max,
                            LinkKind link = LinkKind::Identity) {
  ModelSpec m;
  m.tail = tail;
  m.location = parse_formula(location);
  m.dispersion = parse_formula(dispersion);
  m.dispersion_link = Link{link};
  return m;
}

inline ModelSpec niwot_model() { return make_model("1 + temperature"); }

// n rows of covariates x1, x2 ~ U(-0.5, 0.5), p ~ U(0.2, 1.2), response drawn
// from the model at theta.
inline Dataset random_data(const ModelSpec& model, const Eigen::VectorXd& theta, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x1(n), x2(n), p(n), y(n);
  for (std::size_t t = 0; t < n; ++t) {
    x1[t] = rng.uniform(-0.5, 0.5);
    x2[t] = rng.uniform(-0.5, 0.5);
    p[t] = rng.uniform(0.2, 1.2);
  }
  Dataset data(std::vector<double>(n, 0.0));
  data.add_column("x1", x1);
  data.add_column("x2", x2);
  data.add_column("p", p);
  const auto k = static_cast<Eigen::Index>(model.k());
  const auto m = static_cast<Eigen::Index>(model.m());
  const PredictorEval loc = eval_predictor(model.location, theta.head(k), data);
  const PredictorEval disp = eval_predictor(model.dispersion, theta.tail(m), data);
  for (std::size_t t = 0; t < n; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    y[t] = sample(rng, {loc.value(i), model.dispersion_link.inverse(disp.value(i)), model.tail});
  }
  data.mutable_response() = y;
  return data;
}

// Central differences with step h * max(1, |x_i|).
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd a = x, b = x;
    a(i) += step;
    b(i) -= step;
    g(i) = (f(a) - f(b)) / (2 * step);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd a = x, b = x;
    a(i) += step;
    b(i) -= step;
    jac.col(i) = (f(a) - f(b)) / (2 * step);
  }
  return jac;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace evreg::testing
