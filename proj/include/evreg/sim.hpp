#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evreg/fit.hpp"
#include "evreg/hots.hpp"
#include "evreg/model.hpp"
#include "evreg/rng.hpp"

namespace evreg::sim {

struct CovariateGen {
  std::string name;
  double lower = -0.5;
  double upper = 0.5;
};

struct SimDesign {
  ModelSpec model;
  Eigen::VectorXd truth;
  std::vector<CovariateGen> covariates;
  std::size_t n = 20;
  std::size_t reps = 10000;
  HypothesisSpec hypothesis;
  std::vector<double> alphas = {0.10, 0.05, 0.01};
  std::vector<Statistic> statistics = {kAllStatistics.begin(), kAllStatistics.end()};
  std::uint64_t seed = 1;
  std::uint64_t covariate_seed = 1;
  bool redraw_covariates = false;
  std::vector<double> epsilon;        // power grid
  std::size_t critical_reps = 100000;

  // Throws std::invalid_argument on inconsistent fields.
  void validate() const;
};

// Plain "key = value" lines, '#' comments. Keys: family, location,
// dispersion, dispersion_link, truth, covariate <name> = uniform(a, b), n,
// reps, param, null, direction, alphas, statistics, seed, covariate_seed,
// redraw_covariates, epsilon, critical_reps. Throws DataError with the line
// number on malformed input.
SimDesign parse_design(std::istream& in);
SimDesign parse_design(std::string_view text);
SimDesign read_design_file(const std::string& path);

// Covariates drawn once from covariate_seed; the response column holds zeros.
Dataset design_data(const SimDesign& design);

// One response vector drawn at `theta` for the covariates in `data`.
std::vector<double> simulate_response(const ModelSpec& model, const Dataset& data, const Eigen::VectorXd& theta,
                                      Rng& rng);

struct StatisticSummary {
  std::vector<double> values;            // successful replicates, in replicate order
  std::vector<std::size_t> rejections;   // one per alpha
  std::size_t errors = 0;                // replicates where only this statistic failed
  std::size_t unsupported = 0;

  std::size_t count() const { return values.size(); }
  double rate(std::size_t alpha_index) const;
  std::vector<double> sorted() const;
};

struct SimResult {
  std::vector<double> alphas;
  std::size_t reps = 0;
  std::size_t failures = 0;  // replicates whose fits failed
  std::map<Statistic, StatisticSummary> statistics;
  double elapsed_seconds = 0.0;
  std::string warning;
};

struct RunOptions {
  unsigned threads = 1;
  // Called with the number of finished replicates; may be empty.
  std::function<void(std::size_t)> progress;
};

// Rejection when the asymptotic p-value is below alpha.
SimResult run_size(const SimDesign& design, const RunOptions& options = {});

// Null statistics from `reps` replicates (stream distinct from run_size).
SimResult null_distribution(const SimDesign& design, std::size_t reps, const RunOptions& options = {});

// Type-1 empirical quantile: the ceil(p n)-th order statistic (1-based),
// the smallest for p == 0.
double empirical_quantile(const std::vector<double>& sorted, double p);

// critical[stat][j] for design.alphas[j]: the (1 - alpha) quantile for
// Greater, the alpha quantile for Less.
using CriticalValues = std::map<Statistic, std::vector<double>>;
CriticalValues critical_values(const SimResult& null_result, Direction direction);
CriticalValues exact_critical_values(const SimDesign& design, std::size_t reps, const RunOptions& options = {});

struct PowerPoint {
  double epsilon = 0.0;
  SimResult result;
};

// Truth shifted by epsilon on the interest parameter (away from the null in
// the alternative direction); rejection uses the supplied critical values.
std::vector<PowerPoint> run_power(const SimDesign& design, const std::vector<double>& epsilon,
                                  const CriticalValues& critical, const RunOptions& options = {});

// Asymptotic p-value grid: 0.001..0.010 by 0.001, then 0.02..0.25 by 0.01.
std::vector<double> discrepancy_grid();

struct DiscrepancyCurve {
  std::vector<double> grid;
  std::map<Statistic, std::vector<double>> relative;  // (empirical - asymptotic) / asymptotic
};

DiscrepancyCurve pvalue_discrepancy(const SimResult& null_result, Direction direction,
                                    const std::vector<double>& grid = discrepancy_grid());

// CSV "statistic,alpha,rate,rejections,count,errors,unsupported"; one row per
// statistic and alpha.
std::string rates_csv(const SimResult& result);
std::string power_csv(const std::vector<PowerPoint>& points);
std::string critical_csv(const CriticalValues& critical, const std::vector<double>& alphas);
std::string discrepancy_csv(const DiscrepancyCurve& curve);
std::string discrepancy_svg(const DiscrepancyCurve& curve, std::string_view title);

}  // namespace evreg::sim
