#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "evreg/datasets.hpp"
#include "evreg/error.hpp"
#include "evreg/sim.hpp"

namespace evreg::cli {

using nlohmann::json;

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

Eigen::VectorXd vector_from(const json& a) {
  if (!a.is_array()) throw DataError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = a[i].is_null() ? std::nan("") : a[i].get<double>();
  }
  return v;
}

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(a(i) == b(i) || (std::isnan(a(i)) && std::isnan(b(i))))) return false;
  }
  return true;
}

json optional_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

}  // namespace

bool FitReport::operator==(const FitReport& o) const {
  return model == o.model && response == o.response && parameters == o.parameters && same_vector(theta, o.theta) &&
         same_vector(se, o.se) && loglik == o.loglik && converged == o.converged && iterations == o.iterations &&
         grad_norm == o.grad_norm && message == o.message;
}

FitReport make_fit_report(const ModelSpec& model, std::string response, const FitResult& fit) {
  FitReport r;
  r.model = model;
  r.response = std::move(response);
  r.parameters = model.parameter_names();
  r.theta = fit.theta_hat;
  r.se = fit.se;
  r.loglik = fit.loglik_hat;
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  r.grad_norm = fit.grad_norm;
  r.message = fit.message;
  return r;
}

json to_json(const FitReport& r) {
  return json{
      {"model",
       {{"family", std::string(to_string(r.model.tail))},
        {"location", to_string(r.model.location)},
        {"dispersion", to_string(r.model.dispersion)},
        {"dispersion_link", std::string(to_string(r.model.dispersion_link.kind))},
        {"response", r.response}}},
      {"parameters", r.parameters},
      {"theta", vector_json(r.theta)},
      {"se", vector_json(r.se)},
      {"loglik", r.loglik},
      {"converged", r.converged},
      {"iterations", r.iterations},
      {"grad_norm", r.grad_norm},
      {"message", r.message},
  };
}

FitReport fit_report_from_json(const json& j) {
  try {
    FitReport r;
    const json& m = j.at("model");
    r.model.tail = parse_tail(m.at("family").get<std::string>());
    r.model.location = parse_formula(m.at("location").get<std::string>());
    r.model.dispersion = parse_formula(m.at("dispersion").get<std::string>());
    r.model.dispersion_link = Link{parse_link(m.at("dispersion_link").get<std::string>())};
    r.response = m.at("response").get<std::string>();
    r.parameters = j.at("parameters").get<std::vector<std::string>>();
    r.theta = vector_from(j.at("theta"));
    r.se = vector_from(j.at("se"));
    r.loglik = j.at("loglik").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.grad_norm = j.at("grad_norm").get<double>();
    r.message = j.value("message", "");
    if (static_cast<std::size_t>(r.theta.size()) != r.model.num_params()) {
      throw DataError("theta has the wrong length for the model");
    }
    return r;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed fit report: ") + e.what());
  }
}

json to_json(const TestReport& rep) {
  json stats = json::object(), pvalues = json::object(), us = json::object(), errors = json::object();
  json unsupported = json::array();
  for (const auto& [s, res] : rep.statistics) {
    const std::string name(to_string(s));
    stats[name] = optional_json(res.value);
    pvalues[name] = optional_json(res.p_value);
    if (res.u) us[name] = optional_json(res.u);
    if (res.unsupported) unsupported.push_back(name);
    if (!res.error.empty()) errors[name] = res.error;
  }
  return json{
      {"hypothesis",
       {{"param", rep.parameter},
        {"index", rep.hypothesis.param},
        {"null", rep.hypothesis.null_value},
        {"direction", std::string(to_string(rep.hypothesis.direction))}}},
      {"R", rep.r},
      {"statistics", stats},
      {"p_values", pvalues},
      {"u", us},
      {"unsupported", unsupported},
      {"errors", errors},
      {"theta_hat", vector_json(rep.theta_hat)},
      {"theta_tilde", vector_json(rep.theta_tilde)},
      {"loglik_hat", rep.loglik_hat},
      {"loglik_tilde", rep.loglik_tilde},
      {"converged", rep.full_converged && rep.restricted_converged},
  };
}

namespace {

struct ModelFlags {
  std::string data;
  std::string dataset;
  std::string response;
  std::string location;
  std::string dispersion = "1";
  std::string family = "max";
  std::string link = "identity";
  std::string out = "text";
};

void add_model_flags(CLI::App& cmd, ModelFlags& f) {
  cmd.add_option("--data", f.data, "CSV file with a header row");
  cmd.add_option("--dataset", f.dataset, "Bundled dataset (niwot)");
  cmd.add_option("--response", f.response, "Response column (default: wind for niwot)");
  cmd.add_option("--location", f.location, "Location formula, e.g. \"1 + x1 + pow(x2)\"");
  cmd.add_option("--dispersion", f.dispersion, "Dispersion formula")->capture_default_str();
  cmd.add_option("--family", f.family, "max or min")->capture_default_str();
  cmd.add_option("--dispersion-link", f.link, "identity or log")->capture_default_str();
  cmd.add_option("--out", f.out, "text or json")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ModelSpec build_model(const ModelFlags& f) {
  if (f.location.empty()) throw UsageError("--location is required");
  ModelSpec m;
  try {
    m.tail = parse_tail(f.family);
    m.location = parse_formula(f.location);
    m.dispersion = parse_formula(f.dispersion);
    m.dispersion_link = Link{parse_link(f.link)};
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return m;
}

std::string response_name(const ModelFlags& f) {
  if (!f.response.empty()) return f.response;
  if (f.dataset == "niwot") return "wind";
  throw UsageError("--response is required");
}

Dataset load_data(const ModelFlags& f) {
  if (f.data.empty() == f.dataset.empty()) throw UsageError("give exactly one of --data or --dataset");
  const std::string response = response_name(f);
  if (!f.dataset.empty()) {
    try {
      return datasets::by_name(f.dataset, response);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return read_csv_file(f.data, response);
}

void print_fit_text(std::ostream& out, const FitReport& r, std::size_t n) {
  out << "family      " << to_string(r.model.tail) << '\n'
      << "location    " << to_string(r.model.location) << '\n'
      << "dispersion  " << to_string(r.model.dispersion) << " (" << to_string(r.model.dispersion_link.kind)
      << " link)\n"
      << "n           " << n << '\n'
      << std::fixed << std::setprecision(6) << "loglik      " << r.loglik << '\n'
      << "converged   " << (r.converged ? "yes" : "no") << " (" << r.iterations << " iterations)\n\n";
  std::size_t width = 9;
  for (const auto& p : r.parameters) width = std::max(width, p.size());
  out << std::left << std::setw(static_cast<int>(width)) << "parameter" << std::right << std::setw(14) << "estimate"
      << std::setw(12) << "se" << '\n';
  out << std::setprecision(4);
  for (std::size_t i = 0; i < r.parameters.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << std::left << std::setw(static_cast<int>(width)) << r.parameters[i] << std::right << std::setw(14)
        << r.theta(idx) << std::setw(12) << r.se(idx) << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void print_test_text(std::ostream& out, const TestReport& rep) {
  out << "H0: " << rep.parameter << " = " << rep.hypothesis.null_value << "  vs  H1: " << rep.parameter
      << (rep.hypothesis.direction == Direction::Greater ? " > " : " < ") << rep.hypothesis.null_value << "\n\n";
  out << std::left << std::setw(10) << "statistic" << std::right << std::setw(12) << "value" << std::setw(12)
      << "p-value" << '\n';
  out << std::fixed << std::setprecision(4);
  for (Statistic s : kAllStatistics) {
    const auto it = rep.statistics.find(s);
    if (it == rep.statistics.end()) continue;
    const StatisticResult& res = it->second;
    out << std::left << std::setw(10) << to_string(s) << std::right;
    if (res.ok()) {
      out << std::setw(12) << *res.value << std::setw(12) << *res.p_value;
      if (res.near_zero) out << "  (R ~ 0, reported as R)";
    } else if (res.unsupported) {
      out << std::setw(24) << "unsupported";
    } else {
      out << std::setw(24) << "failed" << "  " << res.error;
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

int cmd_fit(const ModelFlags& f, std::ostream& out) {
  const ModelSpec model = build_model(f);
  const Dataset data = load_data(f);
  const BoundModel bound(model, data);
  const FitResult fit = fit_full(bound);
  const FitReport rep = make_fit_report(model, response_name(f), fit);
  if (f.out == "json") {
    out << to_json(rep).dump(2) << '\n';
  } else {
    print_fit_text(out, rep, data.n());
  }
  return fit.converged ? kOk : kNotConverged;
}

struct TestFlags {
  std::string param;
  double null_value = 0.0;
  std::string direction = "greater";
  std::string stats = "all";
  std::string fit;
};

int cmd_test(ModelFlags f, const TestFlags& t, std::ostream& out) {
  std::optional<Eigen::VectorXd> init;
  if (!t.fit.empty()) {
    std::ifstream in(t.fit);
    if (!in) throw DataError("cannot open fit report '" + t.fit + "'");
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DataError(std::string("fit report is not valid JSON: ") + e.what());
    }
    const FitReport prior = fit_report_from_json(j);
    if (f.location.empty()) {
      f.location = to_string(prior.model.location);
      f.dispersion = to_string(prior.model.dispersion);
      f.family = std::string(to_string(prior.model.tail));
      f.link = std::string(to_string(prior.model.dispersion_link.kind));
    }
    if (f.response.empty()) f.response = prior.response;
    if (build_model(f) == prior.model) init = prior.theta;
  }
  if (t.param.empty()) throw UsageError("--param is required");
  const ModelSpec model = build_model(f);
  std::vector<Statistic> which;
  HypothesisSpec hyp;
  try {
    which = parse_statistic_list(t.stats);
    hyp.param = model.resolve_parameter(t.param);
    hyp.direction = parse_direction(t.direction);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  hyp.null_value = t.null_value;
  const Dataset data = load_data(f);
  const BoundModel bound(model, data);
  TestOptions opts;
  opts.init = init;
  const TestReport rep = run_tests(bound, hyp, which, opts);
  if (f.out == "json") {
    out << to_json(rep).dump(2) << '\n';
  } else {
    print_test_text(out, rep);
  }
  return rep.full_converged && rep.restricted_converged ? kOk : kNotConverged;
}

struct SimFlags {
  std::string design;
  std::string mode = "size";
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> critical_reps;
  unsigned threads = 1;
  std::string out_dir = ".";
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw DataError("cannot write '" + path.string() + "'");
  o << text;
}

json rates_json(const sim::SimResult& r) {
  json stats = json::object();
  for (const auto& [s, sum] : r.statistics) {
    json rates = json::array();
    for (std::size_t j = 0; j < r.alphas.size(); ++j) rates.push_back(sum.count() ? json(sum.rate(j)) : json(nullptr));
    stats[std::string(to_string(s))] = {
        {"rates", rates}, {"count", sum.count()}, {"errors", sum.errors}, {"unsupported", sum.unsupported}};
  }
  return json{{"alphas", r.alphas}, {"reps", r.reps}, {"failures", r.failures}, {"statistics", stats},
              {"warning", r.warning.empty() ? json(nullptr) : json(r.warning)}};
}

int cmd_simulate(const SimFlags& f, std::ostream& out) {
  sim::SimDesign design = sim::read_design_file(f.design);
  if (f.reps) design.reps = *f.reps;
  if (f.seed) design.seed = *f.seed;
  if (f.critical_reps) design.critical_reps = *f.critical_reps;
  try {
    design.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("design: ") + e.what());
  }
  const std::filesystem::path dir(f.out_dir);
  std::filesystem::create_directories(dir);
  sim::RunOptions opts;
  opts.threads = std::max(1u, f.threads);

  json summary = {{"mode", f.mode},
                  {"design", f.design},
                  {"n", design.n},
                  {"reps", design.reps},
                  {"seed", design.seed},
                  {"covariate_seed", design.covariate_seed},
                  {"parameter", design.model.parameter_names().at(design.hypothesis.param)},
                  {"null", design.hypothesis.null_value},
                  {"direction", std::string(to_string(design.hypothesis.direction))}};
  std::vector<std::string> warnings;
  if (f.mode == "size") {
    const sim::SimResult r = sim::run_size(design, opts);
    write_file(dir / "rates.csv", sim::rates_csv(r));
    summary["result"] = rates_json(r);
    if (!r.warning.empty()) warnings.push_back(r.warning);
  } else if (f.mode == "power") {
    if (design.epsilon.empty()) throw DataError("design: power mode needs an epsilon list");
    const sim::SimResult null_r = sim::null_distribution(design, design.critical_reps, opts);
    const sim::CriticalValues crit = sim::critical_values(null_r, design.hypothesis.direction);
    const auto points = sim::run_power(design, design.epsilon, crit, opts);
    write_file(dir / "critical.csv", sim::critical_csv(crit, design.alphas));
    write_file(dir / "power.csv", sim::power_csv(points));
    summary["critical_reps"] = design.critical_reps;
    json pj = json::array();
    for (const auto& p : points) {
      pj.push_back({{"epsilon", p.epsilon}, {"result", rates_json(p.result)}});
      if (!p.result.warning.empty()) warnings.push_back(p.result.warning);
    }
    summary["power"] = pj;
    if (!null_r.warning.empty()) warnings.push_back(null_r.warning);
  } else {
    const sim::SimResult r = sim::null_distribution(design, design.reps, opts);
    const sim::DiscrepancyCurve curve = sim::pvalue_discrepancy(r, design.hypothesis.direction);
    write_file(dir / "discrepancy.csv", sim::discrepancy_csv(curve));
    write_file(dir / "discrepancy.svg",
               sim::discrepancy_svg(curve, "relative p-value discrepancy, n = " + std::to_string(design.n)));
    write_file(dir / "rates.csv", sim::rates_csv(r));
    summary["result"] = rates_json(r);
    if (!r.warning.empty()) warnings.push_back(r.warning);
  }
  summary["warnings"] = warnings;
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  out << "wrote " << (dir / "summary.json").string() << '\n';
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  return kOk;
}

unsigned default_threads() {
  if (const char* env = std::getenv("EVREG_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Extreme value regression: fitting and adjusted likelihood ratio tests"};
  app.require_subcommand(1);

  ModelFlags fit_flags;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model by maximum likelihood");
  add_model_flags(*fit, fit_flags);

  ModelFlags test_model;
  TestFlags test_flags;
  CLI::App* test = app.add_subcommand("test", "Test a scalar hypothesis with R and its adjustments");
  add_model_flags(*test, test_model);
  test->add_option("--param", test_flags.param, "Parameter of interest");
  test->add_option("--null", test_flags.null_value, "Null value")->capture_default_str();
  test->add_option("--direction", test_flags.direction, "greater or less")->capture_default_str();
  test->add_option("--stats", test_flags.stats, "all or a comma-separated list")->capture_default_str();
  test->add_option("--fit", test_flags.fit, "JSON fit report used as the starting point");

  SimFlags sim_flags;
  sim_flags.threads = default_threads();
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo size, power and p-value discrepancy studies");
  simulate->add_option("--design", sim_flags.design, "Design file")->required();
  simulate->add_option("--mode", sim_flags.mode, "size, power or discrepancy")
      ->check(CLI::IsMember({"size", "power", "discrepancy"}))
      ->capture_default_str();
  simulate->add_option("--reps", sim_flags.reps, "Replicates (overrides the design)");
  simulate->add_option("--seed", sim_flags.seed, "Master seed (overrides the design)");
  simulate->add_option("--critical-reps", sim_flags.critical_reps, "Null replicates for exact critical values");
  simulate->add_option("--threads", sim_flags.threads, "Worker threads (default $EVREG_THREADS or 1)");
  simulate->add_option("--out-dir", sim_flags.out_dir, "Output directory")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_flags, out);
    if (test->parsed()) return cmd_test(test_model, test_flags, out);
    return cmd_simulate(sim_flags, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SyntaxError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace evreg::cli
