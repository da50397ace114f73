#include "evreg/sim.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "evreg/error.hpp"
#include "evreg/evd.hpp"
#include "evreg/special.hpp"

namespace evreg::sim {

namespace {

constexpr std::uint64_t kSizeStream = 0;
constexpr std::uint64_t kNullStream = 1;
constexpr std::uint64_t kPowerStream = 2;
constexpr std::uint64_t kCovariateStream = 0xC0FFEE;

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw DataError("design line " + std::to_string(line) + ": " + what);
}

double to_double(std::string_view text, std::size_t line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_line(line, "expected a number, got '" + t + "'");
  return v;
}

std::uint64_t to_uint(std::string_view text, std::size_t line) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    bad_line(line, "expected a non-negative integer, got '" + t + "'");
  }
  return v;
}

std::vector<double> to_list(std::string_view text, std::size_t line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    out.push_back(to_double(text.substr(start, comma == text.npos ? text.npos : comma - start), line));
    if (comma == text.npos) break;
    start = comma + 1;
  }
  return out;
}

bool to_bool(std::string_view text, std::size_t line) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  bad_line(line, "expected true or false, got '" + t + "'");
}

CovariateGen parse_covariate(const std::string& name, std::string_view spec, std::size_t line) {
  const std::string s = trim(spec);
  const std::string prefix = "uniform(";
  if (s.rfind(prefix, 0) != 0 || s.back() != ')') bad_line(line, "covariate must be uniform(a, b)");
  const std::vector<double> bounds = to_list(std::string_view(s).substr(prefix.size(), s.size() - prefix.size() - 1), line);
  if (bounds.size() != 2 || !(bounds[0] < bounds[1])) bad_line(line, "uniform(a, b) needs a < b");
  return {name, bounds[0], bounds[1]};
}

}  // namespace

void SimDesign::validate() const {
  model.validate();
  if (static_cast<std::size_t>(truth.size()) != model.num_params()) {
    throw std::invalid_argument("truth has " + std::to_string(truth.size()) + " values, model has " +
                                std::to_string(model.num_params()) + " parameters");
  }
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (n <= model.num_params()) throw std::invalid_argument("n must exceed the number of parameters");
  if (hypothesis.param >= model.num_params()) throw std::invalid_argument("interest parameter out of range");
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("alphas must lie in (0, 1)");
  }
  if (statistics.empty()) throw std::invalid_argument("no statistics requested");
}

SimDesign parse_design(std::istream& in) {
  SimDesign d;
  std::string location, dispersion = "1", family = "max", link = "identity", param;
  std::optional<std::vector<double>> truth;
  std::optional<double> null_value;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad_line(lineno, "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.rfind("covariate ", 0) == 0) {
      d.covariates.push_back(parse_covariate(trim(std::string_view(key).substr(10)), value, lineno));
    } else if (key == "family") {
      family = value;
    } else if (key == "location") {
      location = value;
    } else if (key == "dispersion") {
      dispersion = value;
    } else if (key == "dispersion_link") {
      link = value;
    } else if (key == "truth") {
      truth = to_list(value, lineno);
    } else if (key == "n") {
      d.n = to_uint(value, lineno);
    } else if (key == "reps") {
      d.reps = to_uint(value, lineno);
    } else if (key == "param") {
      param = value;
    } else if (key == "null") {
      null_value = to_double(value, lineno);
    } else if (key == "direction") {
      try {
        d.hypothesis.direction = parse_direction(value);
      } catch (const std::exception& e) {
        bad_line(lineno, e.what());
      }
    } else if (key == "alphas") {
      d.alphas = to_list(value, lineno);
    } else if (key == "statistics") {
      try {
        d.statistics = parse_statistic_list(value);
      } catch (const std::exception& e) {
        bad_line(lineno, e.what());
      }
    } else if (key == "seed") {
      d.seed = to_uint(value, lineno);
    } else if (key == "covariate_seed") {
      d.covariate_seed = to_uint(value, lineno);
    } else if (key == "redraw_covariates") {
      d.redraw_covariates = to_bool(value, lineno);
    } else if (key == "epsilon") {
      d.epsilon = to_list(value, lineno);
    } else if (key == "critical_reps") {
      d.critical_reps = to_uint(value, lineno);
    } else {
      bad_line(lineno, "unknown key '" + key + "'");
    }
  }
  if (location.empty()) throw DataError("design: missing location");
  if (!truth) throw DataError("design: missing truth");
  if (param.empty()) throw DataError("design: missing param");
  try {
    d.model.tail = parse_tail(family);
    d.model.location = parse_formula(location);
    d.model.dispersion = parse_formula(dispersion);
    d.model.dispersion_link = Link{parse_link(link)};
    d.hypothesis.param = d.model.resolve_parameter(param);
  } catch (const std::exception& e) {
    throw DataError(std::string("design: ") + e.what());
  }
  d.hypothesis.null_value = null_value.value_or(0.0);
  d.truth = Eigen::Map<const Eigen::VectorXd>(truth->data(), static_cast<Eigen::Index>(truth->size()));
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("design: ") + e.what());
  }
  return d;
}

SimDesign parse_design(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_design(in);
}

SimDesign read_design_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open design file '" + path + "'");
  return parse_design(in);
}

namespace {

void draw_covariates(const SimDesign& design, Dataset& data, Rng& rng) {
  for (const auto& c : design.covariates) {
    std::vector<double> col(design.n);
    for (double& v : col) v = rng.uniform(c.lower, c.upper);
    data.add_column(c.name, std::move(col));
  }
}

}  // namespace

Dataset design_data(const SimDesign& design) {
  Dataset data(std::vector<double>(design.n, 0.0));
  Rng rng(derive_seed(design.covariate_seed, kCovariateStream, 0));
  draw_covariates(design, data, rng);
  return data;
}

std::vector<double> simulate_response(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta,
                                      Rng& rng) {
  const auto k = static_cast<Eigen::Index>(model.k());
  const auto m = static_cast<Eigen::Index>(model.m());
  const PredictorEval loc = eval_predictor(model.location, theta.head(k), data);
  const PredictorEval disp = eval_predictor(model.dispersion, theta.tail(m), data);
  std::vector<double> y(data.n());
  for (std::size_t t = 0; t < y.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    const GumbelParams p{model.location_link.inverse(loc.value(i)), model.dispersion_link.inverse(disp.value(i)),
                         model.tail};
    y[t] = sample(rng, p);
  }
  return y;
}

double StatisticSummary::rate(std::size_t alpha_index) const {
  if (values.empty()) return std::nan("");
  return static_cast<double>(rejections.at(alpha_index)) / static_cast<double>(values.size());
}

std::vector<double> StatisticSummary::sorted() const {
  std::vector<double> out = values;
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Replicate {
  bool failed = false;
  std::array<std::optional<double>, kAllStatistics.size()> values;
  std::array<bool, kAllStatistics.size()> unsupported{};
};

std::size_t slot(Statistic s) { return static_cast<std::size_t>(s); }

Replicate one_replicate(const SimDesign& design, const Dataset& fixed, const Eigen::VectorXd& theta,
                        std::uint64_t stream, std::size_t index) {
  Rng rng(derive_seed(design.seed, stream, index));
  Dataset data = fixed;
  if (design.redraw_covariates) {
    data = Dataset(std::vector<double>(design.n, 0.0));
    draw_covariates(design, data, rng);
  }
  data.mutable_response() = simulate_response(design.model, data, theta, rng);

  Replicate rep;
  try {
    const BoundModel model(design.model, data);
    FitResult full = fit_full(model);
    if (!full.converged) full = fit_full(model, theta);
    if (!full.converged) {
      rep.failed = true;
      return rep;
    }
    FitResult restr = fit_restricted(model, design.hypothesis, full.theta_hat);
    if (!restr.converged) {
      Eigen::VectorXd start = theta;
      start(static_cast<Eigen::Index>(design.hypothesis.param)) = design.hypothesis.null_value;
      restr = fit_restricted(model, design.hypothesis, start);
    }
    if (!restr.converged) {
      rep.failed = true;
      return rep;
    }
    const TestReport report = run_tests(model, full, restr, design.hypothesis, design.statistics);
    for (const auto& [s, res] : report.statistics) {
      rep.values[slot(s)] = res.value;
      rep.unsupported[slot(s)] = res.unsupported;
    }
  } catch (const std::exception&) {
    rep.failed = true;
  }
  return rep;
}

std::vector<Replicate> run_replicates(const SimDesign& design, const Eigen::VectorXd& theta, std::uint64_t stream,
                                      std::size_t reps, const RunOptions& options) {
  const Dataset fixed = design_data(design);
  std::vector<Replicate> out(reps);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(reps)));
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= reps) return;
      out[i] = one_replicate(design, fixed, theta, stream, i);
      const std::size_t finished = done.fetch_add(1) + 1;
      if (options.progress && workers == 1) options.progress(finished);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (options.progress) options.progress(reps);
  }
  return out;
}

using RejectRule = std::function<bool(Statistic, std::size_t, double)>;

SimResult aggregate(const SimDesign& design, const std::vector<Replicate>& reps, const RejectRule& reject,
                    double seconds) {
  SimResult res;
  res.alphas = design.alphas;
  res.reps = reps.size();
  res.elapsed_seconds = seconds;
  for (Statistic s : design.statistics) {
    res.statistics[s].rejections.assign(design.alphas.size(), 0);
  }
  for (const Replicate& r : reps) {
    if (r.failed) {
      ++res.failures;
      continue;
    }
    for (Statistic s : design.statistics) {
      StatisticSummary& sum = res.statistics[s];
      const auto& v = r.values[slot(s)];
      if (!v) {
        if (r.unsupported[slot(s)]) {
          ++sum.unsupported;
        } else {
          ++sum.errors;
        }
        continue;
      }
      sum.values.push_back(*v);
      for (std::size_t j = 0; j < design.alphas.size(); ++j) {
        if (reject(s, j, *v)) ++sum.rejections[j];
      }
    }
  }
  if (res.failures * 20 > res.reps) {
    std::ostringstream msg;
    msg << res.failures << " of " << res.reps << " replicates failed to fit (more than 5%)";
    res.warning = msg.str();
  }
  return res;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void require_null_truth(const SimDesign& design) {
  const double v = design.truth(static_cast<Eigen::Index>(design.hypothesis.param));
  if (v != design.hypothesis.null_value) {
    throw std::invalid_argument("truth is not on the null boundary for the interest parameter");
  }
}

RejectRule asymptotic_rule(const SimDesign& design) {
  return [&design](Statistic, std::size_t j, double v) {
    return p_value(v, design.hypothesis.direction) < design.alphas[j];
  };
}

}  // namespace

SimResult run_size(const SimDesign& design, const RunOptions& options) {
  design.validate();
  require_null_truth(design);
  const auto start = std::chrono::steady_clock::now();
  const auto reps = run_replicates(design, design.truth, kSizeStream, design.reps, options);
  return aggregate(design, reps, asymptotic_rule(design), seconds_since(start));
}

SimResult null_distribution(const SimDesign& design, std::size_t reps, const RunOptions& options) {
  design.validate();
  require_null_truth(design);
  const auto start = std::chrono::steady_clock::now();
  const auto out = run_replicates(design, design.truth, kNullStream, reps, options);
  return aggregate(design, out, asymptotic_rule(design), seconds_since(start));
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("empirical_quantile: no values");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("empirical_quantile: p outside [0, 1]");
  const double pos = std::ceil(p * static_cast<double>(sorted.size()));
  const std::size_t idx = pos < 1.0 ? 0 : static_cast<std::size_t>(pos) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

CriticalValues critical_values(const SimResult& null_result, Direction direction) {
  CriticalValues out;
  for (const auto& [s, sum] : null_result.statistics) {
    if (sum.values.empty()) continue;
    const std::vector<double> sorted = sum.sorted();
    auto& crit = out[s];
    for (double a : null_result.alphas) {
      crit.push_back(empirical_quantile(sorted, direction == Direction::Greater ? 1.0 - a : a));
    }
  }
  return out;
}

CriticalValues exact_critical_values(const SimDesign& design, std::size_t reps, const RunOptions& options) {
  return critical_values(null_distribution(design, reps, options), design.hypothesis.direction);
}

std::vector<PowerPoint> run_power(const SimDesign& design, const std::vector<double>& epsilon,
                                  const CriticalValues& critical, const RunOptions& options) {
  design.validate();
  const auto param = static_cast<Eigen::Index>(design.hypothesis.param);
  const bool greater = design.hypothesis.direction == Direction::Greater;
  const RejectRule rule = [&](Statistic s, std::size_t j, double v) {
    const auto it = critical.find(s);
    if (it == critical.end()) return false;
    return greater ? v > it->second.at(j) : v < it->second.at(j);
  };
  std::vector<PowerPoint> out;
  for (double eps : epsilon) {
    const auto start = std::chrono::steady_clock::now();
    Eigen::VectorXd theta = design.truth;
    theta(param) = design.hypothesis.null_value + (greater ? eps : -eps);
    const auto reps = run_replicates(design, theta, kPowerStream, design.reps, options);
    out.push_back({eps, aggregate(design, reps, rule, seconds_since(start))});
  }
  return out;
}

std::vector<double> discrepancy_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(i / 1000.0);
  for (int i = 2; i <= 25; ++i) g.push_back(i / 100.0);
  return g;
}

DiscrepancyCurve pvalue_discrepancy(const SimResult& null_result, Direction direction,
                                    const std::vector<double>& grid) {
  DiscrepancyCurve curve;
  curve.grid = grid;
  for (const auto& [s, sum] : null_result.statistics) {
    if (sum.values.empty()) continue;
    const std::vector<double> sorted = sum.sorted();
    const double total = static_cast<double>(sorted.size());
    auto& rel = curve.relative[s];
    for (double g : grid) {
      double empirical = 0.0;
      if (direction == Direction::Greater) {
        const double cut = special::normal_quantile(1.0 - g);
        empirical = static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), cut)) / total;
      } else {
        const double cut = special::normal_quantile(g);
        empirical = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), cut) - sorted.begin()) / total;
      }
      rel.push_back((empirical - g) / g);
    }
  }
  return curve;
}

namespace {

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

}  // namespace

std::string rates_csv(const SimResult& result) {
  std::ostringstream out;
  out << "statistic,alpha,rate,rejections,count,errors,unsupported\n";
  for (const auto& [s, sum] : result.statistics) {
    for (std::size_t j = 0; j < result.alphas.size(); ++j) {
      out << to_string(s) << ',' << fmt(result.alphas[j]) << ',' << (sum.count() ? fmt(sum.rate(j)) : "") << ','
          << sum.rejections[j] << ',' << sum.count() << ',' << sum.errors << ',' << sum.unsupported << '\n';
    }
  }
  return out.str();
}

std::string power_csv(const std::vector<PowerPoint>& points) {
  std::ostringstream out;
  out << "epsilon,statistic,alpha,rate,rejections,count\n";
  for (const auto& p : points) {
    for (const auto& [s, sum] : p.result.statistics) {
      for (std::size_t j = 0; j < p.result.alphas.size(); ++j) {
        out << fmt(p.epsilon) << ',' << to_string(s) << ',' << fmt(p.result.alphas[j]) << ','
            << (sum.count() ? fmt(sum.rate(j)) : "") << ',' << sum.rejections[j] << ',' << sum.count() << '\n';
      }
    }
  }
  return out.str();
}

std::string critical_csv(const CriticalValues& critical, const std::vector<double>& alphas) {
  std::ostringstream out;
  out << "statistic,alpha,critical_value\n";
  for (const auto& [s, crit] : critical) {
    for (std::size_t j = 0; j < alphas.size() && j < crit.size(); ++j) {
      out << to_string(s) << ',' << fmt(alphas[j]) << ',' << fmt(crit[j]) << '\n';
    }
  }
  return out.str();
}

std::string discrepancy_csv(const DiscrepancyCurve& curve) {
  std::ostringstream out;
  out << "asymptotic_p";
  for (const auto& [s, _] : curve.relative) out << ',' << to_string(s);
  out << '\n';
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    out << fmt(curve.grid[i]);
    for (const auto& [_, rel] : curve.relative) out << ',' << fmt(rel[i]);
    out << '\n';
  }
  return out.str();
}

std::string discrepancy_svg(const DiscrepancyCurve& curve, std::string_view title) {
  constexpr double width = 640, height = 420, left = 60, right = 130, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double xmax = 0.0, ylo = -0.1, yhi = 0.1;
  for (double g : curve.grid) xmax = std::max(xmax, g);
  for (const auto& [_, rel] : curve.relative) {
    for (double v : rel) {
      if (std::isfinite(v)) {
        ylo = std::min(ylo, v);
        yhi = std::max(yhi, v);
      }
    }
  }
  auto sx = [&](double x) { return left + pw * x / xmax; };
  auto sy = [&](double y) { return top + ph * (yhi - y) / (yhi - ylo); };
  static const char* colors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream out;
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << left + pw << "\" y2=\"" << sy(0)
      << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << "asymptotic p-value</text>\n";
  out << "<text x=\"14\" y=\"" << top + ph / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << top + ph / 2
      << ")\" text-anchor=\"middle\">relative discrepancy</text>\n";
  for (double y : {ylo, 0.0, yhi}) {
    out << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" font-size=\"10\" text-anchor=\"end\">" << y
        << "</text>\n";
  }
  for (double x : {0.0, xmax / 2, xmax}) {
    out << "<text x=\"" << sx(x) << "\" y=\"" << top + ph + 14 << "\" font-size=\"10\" text-anchor=\"middle\">" << x
        << "</text>\n";
  }
  std::size_t c = 0;
  for (const auto& [s, rel] : curve.relative) {
    const char* color = colors[c % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
      if (std::isfinite(rel[i])) out << sx(curve.grid[i]) << ',' << sy(rel[i]) << ' ';
    }
    out << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(c);
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\"/>\n";
    out << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << to_string(s)
        << "</text>\n";
    ++c;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace evreg::sim
