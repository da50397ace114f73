// Acceptance suite: one PASS/FAIL line per check, exit status 1 on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "evreg/datasets.hpp"
#include "evreg/fit.hpp"
#include "evreg/hots.hpp"
#include "evreg/inference.hpp"
#include "evreg/ortho.hpp"
#include "evreg/sim.hpp"
#include "evreg/special.hpp"

using namespace evreg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

class Report {
 public:
  void check(const std::string& id, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << id << "  " << detail << std::endl;
    ok ? ++passed_ : ++failed_;
  }
  int failed() const { return failed_; }
  int passed() const { return passed_; }

 private:
  int passed_ = 0, failed_ = 0;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::size_t alpha_index(const std::vector<double>& alphas, double a) {
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    if (std::abs(alphas[j] - a) < 1e-12) return j;
  }
  throw std::runtime_error("alpha not in design");
}

double pct(const sim::SimResult& r, Statistic s, double alpha) {
  return 100.0 * r.statistics.at(s).rate(alpha_index(r.alphas, alpha));
}

void band(Report& rep, const std::string& id, double value, double centre, double half) {
  rep.check(id, std::abs(value - centre) <= half, fmt("%.2f%% (target %.1f +/- %.1f)", value, centre, half));
}

BoundModel niwot_bound() {
  ModelSpec m;
  m.location = parse_formula("1 + temperature");
  m.dispersion = parse_formula("1");
  return BoundModel(m, datasets::niwot());
}

// ---------------------------------------------------------------------------

void criterion1(Report& rep) {
  const auto start = std::chrono::steady_clock::now();
  const BoundModel bm = niwot_bound();
  const FitResult f = fit_full(bm);
  const double elapsed = seconds(start);
  const double est[] = {34.3412, -0.4409, 3.4211};
  const double se[] = {3.0910, 0.1740, 0.8435};
  const char* names[] = {"beta0", "beta1", "sigma"};
  rep.check("C1 converged", f.converged, f.message);
  for (int i = 0; i < 3; ++i) {
    rep.check(std::string("C1 ") + names[i], std::abs(f.theta_hat(i) - est[i]) <= 1e-3,
              fmt("%.4f (target %.4f)", f.theta_hat(i), est[i]));
  }
  const VectorXd se_obs = observed_info(bm, f.theta_hat).inverse().diagonal().cwiseSqrt();
  for (int i = 0; i < 3; ++i) {
    rep.check(std::string("C1 se ") + names[i] + " (inverse expected information)", std::abs(f.se(i) - se[i]) <= 1e-2,
              fmt("%.4f (target %.4f; inverse observed information gives %.4f)", f.se(i), se[i], se_obs(i)));
  }
  rep.check("C1 runtime", elapsed < 1.0, fmt("%.3f s (limit 1 s)", elapsed));
}

void criterion2(Report& rep) {
  const auto start = std::chrono::steady_clock::now();
  const BoundModel bm = niwot_bound();
  const TestReport tr = run_tests(bm, {1, 0.0, Direction::Less}, {kAllStatistics.begin(), kAllStatistics.end()});
  const double elapsed = seconds(start);
  const std::map<Statistic, std::pair<double, double>> target = {
      {Statistic::R, {-2.2912, 0.0110}},    {Statistic::R0star, {-1.8989, 0.0288}},
      {Statistic::Rbar, {-1.6085, 0.0539}}, {Statistic::Rhat, {-1.7592, 0.0393}},
      {Statistic::Rtilde, {-1.9043, 0.0284}}, {Statistic::Rstar, {-1.9043, 0.0284}}};
  for (const auto& [s, t] : target) {
    const StatisticResult& res = tr.statistics.at(s);
    const std::string name(to_string(s));
    if (!res.ok()) {
      rep.check("C2 " + name, false, "not computed: " + res.error);
      continue;
    }
    rep.check("C2 " + name, std::abs(*res.value - t.first) <= 2e-3,
              fmt("%.4f (target %.4f, |diff| %.4f <= 0.002)", *res.value, t.first, std::abs(*res.value - t.first)));
    rep.check("C2 p-value " + name, std::abs(*res.p_value - t.second) <= 5e-4,
              fmt("%.4f (target %.4f)", *res.p_value, t.second));
  }
  const auto& rs = tr.statistics.at(Statistic::Rstar);
  const auto& rt = tr.statistics.at(Statistic::Rtilde);
  if (rs.ok() && rt.ok()) {
    const double d = std::abs(*rs.value - *rt.value);
    rep.check("C2 |Rstar - Rtilde|", d <= 1e-3, fmt("%.2e (limit 1e-3)", d));
  } else {
    rep.check("C2 |Rstar - Rtilde|", false, "statistic missing");
  }
  rep.check("C2 runtime", elapsed < 2.0, fmt("%.3f s (limit 2 s)", elapsed));
}

struct Runs {
  sim::SimResult n200;
};

Runs criterion3(Report& rep, const std::string& designs, const sim::RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  sim::SimDesign d = sim::read_design_file(designs + "/model1.design");
  d.reps = 10000;
  d.n = 20;
  const sim::SimResult r20 = sim::run_size(d, opts);
  band(rep, "C3 n=20 alpha=5% R", pct(r20, Statistic::R, 0.05), 8.1, 0.9);
  band(rep, "C3 n=20 alpha=5% Rtilde", pct(r20, Statistic::Rtilde, 0.05), 5.0, 0.8);
  band(rep, "C3 n=20 alpha=5% R0star", pct(r20, Statistic::R0star, 0.05), 5.0, 0.8);
  band(rep, "C3 n=20 alpha=5% Rbar", pct(r20, Statistic::Rbar, 0.05), 4.0, 0.8);
  band(rep, "C3 n=20 alpha=5% Rhat", pct(r20, Statistic::Rhat, 0.05), 3.8, 0.8);
  d.n = 200;
  Runs out{sim::run_size(d, opts)};
  for (Statistic s : kAllStatistics) {
    band(rep, "C3 n=200 alpha=5% " + std::string(to_string(s)), pct(out.n200, s, 0.05), 5.0, 0.8);
  }
  const double elapsed = seconds(start);
  rep.check("C3 runtime", elapsed < 600.0, fmt("%.1f s (target 600 s)", elapsed));
  return out;
}

void criterion4(Report& rep, const std::string& designs, const sim::RunOptions& opts) {
  sim::SimDesign d = sim::read_design_file(designs + "/model1.design");
  d.n = 20;
  d.reps = 10000;
  d.critical_reps = std::max<std::size_t>(d.critical_reps, 100000);
  const sim::SimResult null_r = sim::null_distribution(d, d.critical_reps, opts);
  const sim::CriticalValues crit = sim::critical_values(null_r, d.hypothesis.direction);
  const std::size_t j10 = alpha_index(d.alphas, 0.10);
  std::cout << "     exact 10% critical values from " << d.critical_reps << " null replicates:";
  for (const auto& [s, c] : crit) std::cout << ' ' << to_string(s) << '=' << fmt("%.4f", c[j10]);
  std::cout << '\n';
  const auto pts = sim::run_power(d, {0.0, 3.0}, crit, opts);
  for (Statistic s : kAllStatistics) {
    band(rep, "C4 eps=0 alpha=10% " + std::string(to_string(s)), pct(pts[0].result, s, 0.10), 10.0, 0.8);
  }
  band(rep, "C4 eps=3.0 alpha=10% R", pct(pts[1].result, Statistic::R, 0.10), 94.6, 1.0);
  band(rep, "C4 eps=3.0 alpha=10% Rtilde", pct(pts[1].result, Statistic::Rtilde, 0.10), 94.8, 1.0);
}

void criterion5(Report& rep, const std::string& designs, const sim::RunOptions& opts) {
  sim::SimDesign d = sim::read_design_file(designs + "/model3.design");
  d.n = 15;
  d.reps = 10000;
  const sim::SimResult r = sim::run_size(d, opts);
  band(rep, "C5 n=15 alpha=10% R", pct(r, Statistic::R, 0.10), 14.2, 1.1);
  band(rep, "C5 n=15 alpha=10% Rbar", pct(r, Statistic::Rbar, 0.10), 8.7, 1.0);
  band(rep, "C5 n=15 alpha=10% Rhat", pct(r, Statistic::Rhat, 0.10), 10.6, 1.0);
  if (r.failures) std::cout << "     " << r.failures << " replicates with failed fits\n";
}

// ---------------------------------------------------------------------------
// Property suite

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

double rel(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

struct PropertyModel {
  std::string name;
  ModelSpec spec;
  VectorXd theta;
};

std::vector<PropertyModel> property_models() {
  auto make = [](const char* loc, const char* disp, Tail tail, LinkKind link) {
    ModelSpec m;
    m.tail = tail;
    m.location = parse_formula(loc);
    m.dispersion = parse_formula(disp);
    m.dispersion_link = Link{link};
    return m;
  };
  std::vector<PropertyModel> out;
  out.push_back({"linear", make("1 + x1 + x2", "1", Tail::Max, LinkKind::Identity), VectorXd(4)});
  out.back().theta << 1.0, 2.0, -1.0, 0.8;
  out.push_back({"heteroskedastic log link", make("1 + x1 + x2", "1 + x1", Tail::Max, LinkKind::Log), VectorXd(5)});
  out.back().theta << 0.5, 1.0, 0.2, -0.3, 0.7;
  out.push_back({"power term, min form", make("1 + x1 + pow(p)", "1 + x2", Tail::Min, LinkKind::Identity),
                 VectorXd(5)});
  out.back().theta << 0.4, 1.5, 0.8, 1.1, 0.5;
  return out;
}

Dataset property_data(const ModelSpec& m, const VectorXd& theta, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x1(n), x2(n), p(n);
  for (std::size_t t = 0; t < n; ++t) {
    x1[t] = rng.uniform(-0.5, 0.5);
    x2[t] = rng.uniform(-0.5, 0.5);
    p[t] = rng.uniform(0.2, 1.2);
  }
  Dataset d(std::vector<double>(n, 0.0));
  d.add_column("x1", x1);
  d.add_column("x2", x2);
  d.add_column("p", p);
  d.mutable_response() = sim::simulate_response(m, d, theta, rng);
  return d;
}

double ks_normal(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = special::normal_cdf(v[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

void criterion6(Report& rep, const std::string& designs, const sim::RunOptions& opts, const sim::SimResult& n200) {
  double worst_score = 0, worst_j = 0, worst_mean = 0, worst_dual = 0, worst_cross = 0, worst_q = 0;
  std::uint64_t seed = 100;
  for (const auto& pm : property_models()) {
    const Dataset d = property_data(pm.spec, pm.theta, 40, seed++);
    const BoundModel bm(pm.spec, d);
    VectorXd at = pm.theta;
    at(0) += 0.1;
    worst_score = std::max(worst_score, rel(score(bm, at), fd_gradient([&](const VectorXd& x) { return loglik(bm, x); }, at)));
    MatrixXd hess(at.size(), at.size());
    for (Eigen::Index i = 0; i < at.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(at(i)));
      VectorXd a = at, b = at;
      a(i) += h;
      b(i) -= h;
      hess.col(i) = (score(bm, a) - score(bm, b)) / (2 * h);
    }
    worst_j = std::max(worst_j, rel(observed_info(bm, at), -hess));

    // mean J over 20 000 simulated samples against I at the truth
    MatrixXd mean_j = MatrixXd::Zero(at.size(), at.size());
    Rng rng(seed++);
    Dataset sim_d = d;
    for (int r = 0; r < 20000; ++r) {
      sim_d.mutable_response() = sim::simulate_response(pm.spec, d, pm.theta, rng);
      mean_j += observed_info(pm.spec, sim_d, pm.theta);
    }
    mean_j /= 20000.0;
    worst_mean = std::max(worst_mean, rel(mean_j, expected_info(pm.spec, d, pm.theta)));

    // loglik is unchanged by reflecting y and the location
    ModelSpec flipped = pm.spec;
    flipped.tail = pm.spec.tail == Tail::Max ? Tail::Min : Tail::Max;
    Dataset dn = d;
    for (double& y : dn.mutable_response()) y = -y;
    VectorXd tn = pm.theta;
    const auto k = static_cast<Eigen::Index>(pm.spec.k());
    bool linear = true;
    for (const auto& term : pm.spec.location.terms) linear = linear && term.kind != TermKind::Power;
    if (linear) {
      tn.head(k) *= -1.0;
      const double l0 = loglik(pm.spec, d, pm.theta);
      worst_dual = std::max(worst_dual, std::abs(l0 - loglik(flipped, dn, tn)) / std::max(1.0, std::abs(l0)));
    }

    const FitResult f = fit_full(bm);
    for (std::size_t r = 0; r < pm.spec.k(); ++r) {
      const OrthogonalizedModel om = orthogonalize(bm, {r, 0.0}, f.theta_hat);
      const ReparamLikelihood rl = reparam_likelihood(bm, om, om.to_vartheta(f.theta_hat));
      const double scale = rl.expected.cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < rl.expected.rows(); ++j) {
        if (j != static_cast<Eigen::Index>(r)) {
          worst_cross = std::max(worst_cross, std::abs(rl.expected(static_cast<Eigen::Index>(r), j)) / scale);
        }
      }
    }
    const auto& b = f.state.bundle;
    worst_q = std::max({worst_q, skovgaard_terms(b, b).q.cwiseAbs().maxCoeff(),
                        severini_terms(b, b).q.cwiseAbs().maxCoeff()});
  }
  rep.check("C6 score vs finite differences", worst_score <= 1e-7, fmt("max rel %.2e (limit 1e-7)", worst_score));
  rep.check("C6 J vs finite-difference Hessian", worst_j <= 1e-4, fmt("max rel %.2e (limit 1e-4)", worst_j));
  rep.check("C6 mean J over 20000 samples vs I", worst_mean <= 0.02, fmt("max rel %.4f (limit 0.02)", worst_mean));
  rep.check("C6 min/max duality of loglik", worst_dual <= 1e-12, fmt("max rel %.2e (limit 1e-12)", worst_dual));
  rep.check("C6 orthogonalized cross block", worst_cross <= 1e-8, fmt("max rel %.2e (limit 1e-8)", worst_cross));
  rep.check("C6 qbar = qhat = 0 at theta_hat = theta_tilde", worst_q <= 1e-10, fmt("max |q| %.2e", worst_q));

  for (Statistic s : kAllStatistics) {
    if (s == Statistic::R) continue;
    const auto& sum = n200.statistics.at(s);
    const double ks = ks_normal(sum.values);
    rep.check("C6 KS to N(0,1), model 1 n=200, " + std::string(to_string(s)), ks <= 0.025,
              fmt("%.4f over %.0f replicates (limit 0.025)", ks, static_cast<double>(sum.count())));
  }

  sim::SimDesign d = sim::read_design_file(designs + "/model3.design");
  d.reps = 2000;
  sim::RunOptions one = opts, many = opts;
  one.threads = 1;
  many.threads = std::max(2u, opts.threads);
  const std::string a = sim::rates_csv(sim::run_size(d, one));
  const std::string b = sim::rates_csv(sim::run_size(d, many));
  const std::string c = sim::critical_csv(sim::exact_critical_values(d, 2000, one), d.alphas);
  const std::string e = sim::critical_csv(sim::exact_critical_values(d, 2000, many), d.alphas);
  rep.check("C6 determinism across thread counts", a == b && c == e,
            "1 vs " + std::to_string(many.threads) + " threads, " + std::to_string(a.size() + c.size()) + " bytes");
}

// ---------------------------------------------------------------------------

void full_grid(const std::string& designs, const std::string& out_dir, const sim::RunOptions& opts) {
  std::filesystem::create_directories(out_dir);
  sim::SimDesign d = sim::read_design_file(designs + "/model1.design");
  d.reps = 10000;
  std::ofstream table(std::filesystem::path(out_dir) / "table1.csv");
  table << "n,alpha";
  for (Statistic s : kAllStatistics) table << ',' << to_string(s);
  table << '\n';
  std::cout << "\nModel 1 null rejection rates (%)\n";
  for (std::size_t n : {15u, 20u, 30u, 40u, 100u, 200u}) {
    d.n = n;
    const sim::SimResult r = sim::run_size(d, opts);
    for (double a : d.alphas) {
      table << n << ',' << a;
      std::cout << "n=" << n << " alpha=" << a << ':';
      for (Statistic s : kAllStatistics) {
        table << ',' << fmt("%.2f", pct(r, s, a));
        std::cout << ' ' << to_string(s) << '=' << fmt("%.2f", pct(r, s, a));
      }
      table << '\n';
      std::cout << '\n';
    }
    if (n <= 30) {
      const sim::DiscrepancyCurve curve = sim::pvalue_discrepancy(r, d.hypothesis.direction);
      const std::string stem = (std::filesystem::path(out_dir) / ("discrepancy_model1_n" + std::to_string(n))).string();
      std::ofstream(stem + ".csv") << sim::discrepancy_csv(curve);
      std::ofstream(stem + ".svg") << sim::discrepancy_svg(curve, "model 1, n = " + std::to_string(n));
    }
  }
  std::cout << "full grid written to " << out_dir << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evreg acceptance suite"};
  bool grid = false;
  std::string designs = EVREG_DESIGN_DIR;
  std::string out_dir = "acceptance_out";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_flag("--full-grid", grid, "Also run the full model 1 size grid and discrepancy curves");
  app.add_option("--designs", designs, "Directory holding model1.design and model3.design")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Output directory for --full-grid")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const auto start = std::chrono::steady_clock::now();
  sim::RunOptions opts;
  opts.threads = std::max(1u, threads);
  Report rep;
  try {
    criterion1(rep);
    criterion2(rep);
    const Runs runs = criterion3(rep, designs, opts);
    criterion4(rep, designs, opts);
    criterion5(rep, designs, opts);
    criterion6(rep, designs, opts, runs.n200);
    if (grid) full_grid(designs, out_dir, opts);
  } catch (const std::exception& e) {
    rep.check("suite", false, std::string("aborted: ") + e.what());
  }
  std::cout << "\n" << rep.passed() << " passed, " << rep.failed() << " failed in " << fmt("%.1f", seconds(start))
            << " s\n";
  return rep.failed() ? 1 : 0;
}
