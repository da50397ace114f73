#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "evreg/evd.hpp"

namespace evreg {

enum class TermKind { Intercept, Linear, Power };

// One additive piece of a predictor. Power(x) contributes x^b with its own
// parameter b; Linear(x) contributes b * x; Intercept contributes b.
struct Term {
  TermKind kind = TermKind::Intercept;
  std::string covariate;

  friend bool operator==(const Term&, const Term&) = default;
};

std::string to_string(const Term& term);

// Ordered list of terms; term order is parameter order.
struct PredictorSpec {
  std::vector<Term> terms;
  // Set by to_max_form: value and jacobian are the negation of the terms' sum.
  bool negated = false;

  std::size_t size() const { return terms.size(); }
  bool is_linear() const;
  bool is_intercept_only() const;

  friend bool operator==(const PredictorSpec&, const PredictorSpec&) = default;
};

// formula := term ('+' term)* ; term := '1' | NAME | 'pow(' NAME ')'.
// Throws SyntaxError (with byte offset) on malformed input, a repeated
// intercept, or a covariate repeated within the same term kind.
PredictorSpec parse_formula(std::string_view text);

// Canonical text, e.g. "1 + x1 + pow(x2)". A negated predictor prints as "-(...)".
std::string to_string(const PredictorSpec& spec);

enum class LinkKind { Identity, Log };

std::string_view to_string(LinkKind kind);
LinkKind parse_link(std::string_view text);

// A link g with g(mu) = eta. Everything downstream consumes the inverse and
// its first two derivatives with respect to eta, so 1/g'(mu) = inverse_d1(eta).
struct Link {
  LinkKind kind = LinkKind::Identity;

  double apply(double mu) const;
  double inverse(double eta) const;
  double inverse_d1(double eta) const;
  double inverse_d2(double eta) const;

  friend bool operator==(const Link&, const Link&) = default;
};

struct ModelSpec {
  Tail tail = Tail::Max;
  PredictorSpec location;
  Link location_link{LinkKind::Identity};
  PredictorSpec dispersion;
  Link dispersion_link{LinkKind::Identity};

  std::size_t k() const { return location.size(); }
  std::size_t m() const { return dispersion.size(); }
  std::size_t num_params() const { return k() + m(); }

  // "x1", "pow(x2)", "intercept" for location terms; dispersion terms carry a
  // "dispersion:" prefix.
  std::vector<std::string> parameter_names() const;

  // Resolves "x1", "location:x1", "dispersion:z1", "pow(x2)", "intercept" or
  // a decimal index into the theta layout. Throws std::invalid_argument.
  std::size_t resolve_parameter(std::string_view name) const;

  // Structural checks independent of data (links supported, non-empty predictors).
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Response plus named covariate columns, all of length n.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<double> response);

  void add_column(std::string name, std::vector<double> values);

  std::size_t n() const { return response_.size(); }
  const std::vector<double>& response() const { return response_; }
  std::vector<double>& mutable_response() { return response_; }
  const std::vector<std::string>& names() const { return names_; }
  bool has_column(std::string_view name) const;
  // Throws DataError naming the column when absent.
  const std::vector<double>& column(std::string_view name) const;

 private:
  std::vector<double> response_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

// Header row of column names, comma separated, '.' decimal point. Every
// column other than `response` becomes a covariate. Throws DataError.
Dataset read_csv(std::istream& in, std::string_view response);
Dataset read_csv_file(const std::string& path, std::string_view response);

struct PredictorEval {
  Eigen::VectorXd value;      // n
  Eigen::MatrixXd jacobian;   // n x p, d value / d params
  Eigen::MatrixXd curvature;  // n x p, d^2 value / d param_j^2 (terms are separable)
};

// A predictor with its covariate columns resolved against a dataset.
class BoundPredictor {
 public:
  BoundPredictor() = default;
  BoundPredictor(PredictorSpec spec, const Dataset& data);

  const PredictorSpec& spec() const { return spec_; }
  std::size_t size() const { return spec_.size(); }
  std::size_t n() const { return static_cast<std::size_t>(columns_.rows()); }
  // Column j holds the covariate of term j (ones for the intercept).
  const Eigen::MatrixXd& columns() const { return columns_; }

  PredictorEval evaluate(const Eigen::Ref<const Eigen::VectorXd>& params) const;

 private:
  PredictorSpec spec_;
  Eigen::MatrixXd columns_;
};

PredictorEval eval_predictor(const PredictorSpec& spec,
                             const Eigen::Ref<const Eigen::VectorXd>& params,
                             const Dataset& data);

// Rewrites a Min model as the equivalent Max model on -y with a negated
// location predictor. Throws std::invalid_argument when model is already Max.
std::pair<ModelSpec, Dataset> to_max_form(const ModelSpec& model, const Dataset& data);

// A validated model in maximum form bound to its data; this is what the
// likelihood, fitting and test code operate on.
class BoundModel {
 public:
  BoundModel(const ModelSpec& model, const Dataset& data);

  // Model as supplied (may be Min) and its maximum-form equivalent.
  const ModelSpec& original() const { return original_; }
  const ModelSpec& spec() const { return spec_; }
  const Eigen::VectorXd& y() const { return y_; }
  const BoundPredictor& location() const { return location_; }
  const BoundPredictor& dispersion() const { return dispersion_; }

  std::size_t n() const { return static_cast<std::size_t>(y_.size()); }
  std::size_t k() const { return spec_.k(); }
  std::size_t m() const { return spec_.m(); }
  std::size_t num_params() const { return spec_.num_params(); }

  // Linear location, identity links, intercept-only dispersion.
  bool is_linear_homoskedastic() const;

 private:
  ModelSpec original_;
  ModelSpec spec_;
  Eigen::VectorXd y_;
  BoundPredictor location_;
  BoundPredictor dispersion_;
};

}  // namespace evreg
