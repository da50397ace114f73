#include "doctest.h"
#include "evreg/error.hpp"
#include "evreg/evd.hpp"
#include "evreg/inference.hpp"
#include "evreg/special.hpp"
#include "helpers.hpp"

using namespace evreg;
using testing::make_model;

namespace {

struct Case {
  ModelSpec model;
  Eigen::VectorXd theta;
};

std::vector<Case> cases() {
  std::vector<Case> out;
  out.push_back({make_model("1 + x1 + x2"), Eigen::Vector4d(1.0, 2.0, -1.0, 0.8)});
  Eigen::VectorXd t2(5);
  t2 << 0.5, 1.0, 0.2, -0.3, 0.7;
  out.push_back({make_model("1 + x1 + x2", "1 + x1", Tail::Max, LinkKind::Log), t2.head(5)});
  Eigen::VectorXd t3(4);
  t3 << 1.0, -1.0, 0.6, 1.2;
  out.push_back({make_model("1 + x1 + pow(p)"), t3});
  Eigen::VectorXd t4(5);
  t4 << 0.4, 1.5, 0.8, 1.1, 0.5;
  out.push_back({make_model("1 + x1 + pow(p)", "1 + x2", Tail::Min, LinkKind::Identity), t4});
  Eigen::VectorXd t5(5);
  t5 << 0.4, 1.5, 0.8, 0.1, 0.5;
  out.push_back({make_model("1 + x1 + pow(p)", "1 + x2", Tail::Min, LinkKind::Log), t5});
  return out;
}

}  // namespace

TEST_CASE("score matches finite differences of the log-likelihood") {
  int seed = 1;
  for (const auto& c : cases()) {
    const BoundModel bm(c.model, testing::random_data(c.model, c.theta, 40, seed++));
    Eigen::VectorXd at = c.theta;
    at(0) += 0.1;
    auto f = [&](const Eigen::VectorXd& th) { return loglik(bm, th); };
    const Eigen::VectorXd fd = testing::fd_gradient(f, at);
    CHECK(testing::max_rel_diff(score(bm, at), fd) <= 1e-7);
  }
}

TEST_CASE("observed information matches the finite-difference Hessian") {
  int seed = 10;
  for (const auto& c : cases()) {
    const BoundModel bm(c.model, testing::random_data(c.model, c.theta, 40, seed++));
    Eigen::VectorXd at = c.theta;
    at(1) -= 0.05;
    auto g = [&](const Eigen::VectorXd& th) { return Eigen::VectorXd(score(bm, th)); };
    const Eigen::MatrixXd hess = testing::fd_jacobian(g, at);
    const Eigen::MatrixXd j = observed_info(bm, at);
    CHECK(testing::max_rel_diff(j, -hess) <= 1e-4);
    CHECK(testing::max_rel_diff(j, j.transpose()) <= 1e-12);
  }
}

TEST_CASE("per-observation scores sum to the score") {
  const auto c = cases()[3];
  const BoundModel bm(c.model, testing::random_data(c.model, c.theta, 30, 3));
  const LikelihoodState st = evaluate(bm, c.theta);
  CHECK(testing::max_rel_diff(sum_rows(st.perobs), st.score) <= 1e-13);
  CHECK(st.loglik == doctest::Approx(loglik(bm, c.theta)).epsilon(1e-14));
  CHECK(testing::max_rel_diff(st.expected, expected_info(bm, c.theta)) <= 1e-14);
}

TEST_CASE("loglik equals the sum of log densities") {
  const auto c = cases()[4];
  const Dataset d = testing::random_data(c.model, c.theta, 25, 4);
  const auto k = static_cast<Eigen::Index>(c.model.k());
  const PredictorEval loc = eval_predictor(c.model.location, c.theta.head(k), d);
  const PredictorEval disp = eval_predictor(c.model.dispersion, c.theta.tail(c.theta.size() - k), d);
  double total = 0;
  for (std::size_t t = 0; t < d.n(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    total += log_density(d.response()[t], {loc.value(i), std::exp(disp.value(i)), Tail::Min});
  }
  CHECK(loglik(c.model, d, c.theta) == doctest::Approx(total).epsilon(1e-13));
}

TEST_CASE("min and max forms give identical likelihoods under reflection") {
  const ModelSpec mx = make_model("1 + x1 + x2", "1 + x1", Tail::Max, LinkKind::Log);
  ModelSpec mn = mx;
  mn.tail = Tail::Min;
  Eigen::VectorXd th(5);
  th << 0.5, 1.0, -2.0, 0.1, 0.3;
  Dataset d = testing::random_data(mx, th, 30, 5);
  Dataset dn = d;
  for (double& y : dn.mutable_response()) y = -y;
  Eigen::VectorXd thn = th;
  thn.head(3) *= -1.0;
  CHECK(std::abs(loglik(mx, d, th) - loglik(mn, dn, thn)) <= 1e-12 * std::abs(loglik(mx, d, th)));
}

TEST_CASE("mean observed information approaches the expected information") {
  for (const auto& c : {cases()[1], cases()[2]}) {
    const Dataset base = testing::random_data(c.model, c.theta, 30, 77);
    Eigen::MatrixXd mean_j = Eigen::MatrixXd::Zero(c.theta.size(), c.theta.size());
    const int reps = 20000;
    Rng rng(123);
    const auto k = static_cast<Eigen::Index>(c.model.k());
    const PredictorEval loc = eval_predictor(c.model.location, c.theta.head(k), base);
    const PredictorEval disp = eval_predictor(c.model.dispersion, c.theta.tail(c.theta.size() - k), base);
    for (int r = 0; r < reps; ++r) {
      Dataset d = base;
      for (std::size_t t = 0; t < d.n(); ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        d.mutable_response()[t] =
            sample(rng, {loc.value(i), c.model.dispersion_link.inverse(disp.value(i)), c.model.tail});
      }
      mean_j += observed_info(c.model, d, c.theta);
    }
    mean_j /= reps;
    const Eigen::MatrixXd info = expected_info(c.model, base, c.theta);
    CHECK(testing::max_rel_diff(mean_j, info) <= 0.02);
  }
}

TEST_CASE("expected information closed form for the intercept-only model") {
  // One observation block: I = n/sigma^2 [[1, E-1], [E-1, 1 + Gamma''(2)]]
  const ModelSpec m = make_model("1");
  Dataset d(std::vector<double>(7, 0.0));
  const Eigen::Vector2d th(0.0, 2.0);
  const Eigen::MatrixXd info = expected_info(m, d, th);
  const double e = special::kEuler;
  CHECK(info(0, 0) == doctest::Approx(7 / 4.0));
  CHECK(info(0, 1) == doctest::Approx(7 * (e - 1) / 4.0));
  CHECK(info(1, 1) == doctest::Approx(7 * (1 + gamma2_at_two()) / 4.0));
  CHECK(gamma2_at_two() == doctest::Approx(0.823680660852));
}

TEST_CASE("invalid dispersion is an evaluation error") {
  const ModelSpec m = make_model("1");
  Dataset d(std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(loglik(m, d, Eigen::Vector2d(0, -1)), EvaluationError);
  CHECK(loglik(m, d, Eigen::Vector2d(1e6, 1e-3)) == -std::numeric_limits<double>::infinity());
}
