#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evreg/fit.hpp"
#include "evreg/hots.hpp"
#include "evreg/model.hpp"
#include "json.hpp"

namespace evreg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNotConverged = 3 };

// What `evreg fit --out json` writes and `evreg test --fit` reads back.
struct FitReport {
  ModelSpec model;
  std::string response;
  std::vector<std::string> parameters;
  Eigen::VectorXd theta;
  Eigen::VectorXd se;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::string message;

  bool operator==(const FitReport& other) const;
};

FitReport make_fit_report(const ModelSpec& model, std::string response, const FitResult& fit);
nlohmann::json to_json(const FitReport& report);
// Throws DataError on missing or malformed fields.
FitReport fit_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TestReport& report);

// argv-style entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evreg::cli
